#include "oracles.hpp"

#include "rtc/coordinator.hpp"
#include "rtc/errors.hpp"
#include "rtc/response.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace rtc;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Two identical agents on one PCC: a = 0.05, a_r = 0.02, b = 0, r = 3,
/// x_hat = 2, x_hat_m = 0, s_hat = 0. Unconstrained optimum (0.23 - u) / 0.14.
std::vector<HouseholdState> two_agents() {
    HouseholdState h = fixture::cost_example();
    h.r_hat = 2.0;
    h.r_tilde = 1.0;
    h.r = 3.0;
    h.commitment = {0.0, 2.0, 0.12, 0.0, 2.0};
    h.prices.reward = 0.0;
    auto g = h;
    g.id = 2;
    return {h, g};
}

CoordinatorConfig one_pcc_config(double d) {
    CoordinatorConfig c;
    c.d_scale = {d};
    c.step_beta = 0.07;
    return c;
}

} // namespace

TEST_CASE("aggregate divides by the total household count") {
    CHECK(aggregate(std::vector<Strategy>{{PccId{0}, 2.0, 0.0}}, 1, 3) == std::vector<double>{2.0, 0.0, 0.0});
    const std::vector<Strategy> four = {
        {PccId{1}, 1.0, 0}, {PccId{1}, 1.0, 0}, {PccId{1}, -1.0, 0}, {PccId{1}, 3.0, 0}};
    CHECK(aggregate(four, 4, 3) == std::vector<double>{0.0, 1.0, 0.0});
    const std::vector<Strategy> zeros = {{PccId{0}, 0.0, 0}, {PccId{2}, 0.0, 0}};
    CHECK(aggregate(zeros, 2, 3) == std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("control update rules") {
    CoordinatorConfig cfg;
    cfg.d_scale = {0.0};
    cfg.step_beta = 0.1;
    cfg.avg_gamma = 0.5;

    SUBCASE("inactive constraint and no coupling scale") {
        ControlSignal s = ControlSignal::zero(1);
        s.u = {0.08};
        const auto n = control_update(cfg, s, std::vector<double>{0.5}, ConstraintSet{{0.0}, {1.0}});
        CHECK(n.u[0] == doctest::Approx(0.04));
        CHECK(n.lambda_up[0] == 0.0);
        CHECK(n.lambda_dn[0] == 0.0);
        CHECK(n.iteration == 1);
        const auto z = control_update(cfg, ControlSignal::zero(1), std::vector<double>{0.5}, ConstraintSet{{0.0}, {1.0}});
        CHECK(z.u[0] == 0.0);
    }
    SUBCASE("upper dual ascent") {
        const auto n = control_update(cfg, ControlSignal::zero(1), std::vector<double>{1.5}, ConstraintSet{{-kInf}, {1.0}});
        CHECK(n.lambda_up[0] == doctest::Approx(0.05));
        CHECK(n.u[0] == doctest::Approx(0.025));
    }
    SUBCASE("projection onto the non-negative orthant") {
        ControlSignal s = ControlSignal::zero(1);
        s.lambda_dn = {0.02};
        const auto n = control_update(cfg, s, std::vector<double>{0.5}, ConstraintSet{{0.0}, {kInf}});
        CHECK(n.lambda_dn[0] == 0.0);
    }
    SUBCASE("infinite bounds keep their dual at zero") {
        const auto n = control_update(cfg, ControlSignal::zero(1), std::vector<double>{100.0},
                                      ConstraintSet::wide_open(1));
        CHECK(n.lambda_up[0] == 0.0);
        CHECK(n.lambda_dn[0] == 0.0);
    }
}

TEST_CASE("decoupled slot converges at once to the unconstrained optima") {
    std::mt19937_64 rng(31);
    std::vector<HouseholdState> agents;
    for (int i = 0; i < 10; ++i) {
        agents.push_back(fixture::random_household(rng, i + 1));
        agents.back().pcc = PccId{static_cast<std::size_t>(i % 2)};
    }
    CoordinatorConfig cfg;
    cfg.d_scale = {0.0, 0.0};
    const auto run = run_slot(agents, ConstraintSet::wide_open(2), cfg);
    CHECK(run.converged);
    CHECK(run.iterations == 1);
    for (std::size_t i = 0; i < agents.size(); ++i) CHECK(run.strategies[i].x == best_response(agents[i], 0.0).x);
}

TEST_CASE("two-agent game matches the hand KKT solution") {
    const auto agents = two_agents();
    // Unconstrained: 0.14 x = 0.23 - u.
    CHECK(best_response(agents[0], 0.0).x == doctest::Approx(0.23 / 0.14).epsilon(1e-12));

    auto cfg = one_pcc_config(0.01);
    cfg.tol_u = 1e-7;
    cfg.tol_c = 1e-6;
    const ConstraintSet c{{-kInf}, {1.5}};
    const auto run = run_slot(agents, c, cfg);
    REQUIRE(run.converged);
    // KKT: x = 1.5 for both, u = 0.23 - 0.14 * 1.5 = 0.02, lambda = u - d * avg = 0.005.
    CHECK(run.strategies[0].x == doctest::Approx(1.5).epsilon(1e-5));
    CHECK(run.strategies[1].x == doctest::Approx(1.5).epsilon(1e-5));
    CHECK(run.signal.u[0] == doctest::Approx(0.02).epsilon(1e-5));
    CHECK(run.signal.lambda_up[0] == doctest::Approx(0.005).epsilon(1e-4));
    CHECK(run.signal.lambda_dn[0] == 0.0);
}

TEST_CASE("converged slot: certificate, duals, slackness, fixed point") {
    std::mt19937_64 rng(32);
    std::vector<HouseholdState> agents;
    for (int i = 0; i < 12; ++i) {
        agents.push_back(fixture::random_household(rng, i + 1));
        agents.back().pcc = PccId{static_cast<std::size_t>(i % 3)};
    }
    CoordinatorConfig cfg;
    cfg.d_scale = {0.01, 0.01, 0.01};
    cfg.step_beta = 5.0;
    cfg.max_iterations = 60;

    const auto box = attainable_box(agents, 3);
    ConstraintSet c = ConstraintSet::wide_open(3);
    // Tighten the upper bound of PCC 0 to the middle of its box.
    c.c_hi[0] = 0.5 * (box.lo[0] + box.hi[0]);
    const auto run = run_slot(agents, c, cfg);
    REQUIRE(run.converged);
    for (const auto& it : run.trace) {
        for (std::size_t p = 0; p < 3; ++p) {
            CHECK(it.signal.lambda_up[p] >= 0.0);
            CHECK(it.signal.lambda_dn[p] >= 0.0);
        }
    }
    const auto chk = verify_equilibrium(run.strategies, run.signal, agents, cfg, c);
    CHECK(chk.max_regret <= 1e-4);
    CHECK(chk.constraint_satisfied);
    for (std::size_t p = 0; p < 3; ++p) {
        // An active dual means the bound is tight up to tol_c.
        if (run.signal.lambda_up[p] > 1e-9) CHECK(std::abs(c.c_hi[p] - run.average[p]) <= cfg.tol_c);
        if (run.signal.lambda_dn[p] > 1e-9) CHECK(std::abs(c.c_lo[p] - run.average[p]) <= cfg.tol_c);
    }
    const auto next = control_update(cfg, run.signal, run.average, c);
    for (std::size_t p = 0; p < 3; ++p) CHECK(std::abs(next.u[p] - run.signal.u[p]) <= cfg.tol_u);
}

TEST_CASE("x_0k and s_0k advance with each held setpoint") {
    const auto agents = two_agents();
    auto cfg = one_pcc_config(0.01);
    const auto run = run_slot(agents, ConstraintSet{{-kInf}, {1.5}}, cfg);
    REQUIRE(run.trace.size() >= 2);
    const double dt = cfg.iteration_period_s, T = cfg.slot_duration_s;
    for (std::size_t k = 0; k + 1 < run.trace.size(); ++k) {
        for (std::size_t i = 0; i < 2; ++i) {
            const auto& a = run.trace[k].agents[i];
            const auto& b = run.trace[k + 1].agents[i];
            const double frac = dt / (T - static_cast<double>(k) * dt);
            CHECK(b.x_0k == doctest::Approx(a.x_0k + (a.x_star - a.x_0k) * frac).epsilon(1e-12));
            CHECK(a.x_kT == doctest::Approx(a.x_star - a.x_0k).epsilon(1e-12));
            CHECK(a.s_setpoint == doctest::Approx(agents[i].r - a.x_star - a.s_0k).epsilon(1e-12));
        }
    }
    CHECK(run.trace[0].agents[0].x_0k == 0.0);
}

TEST_CASE("non-convergence returns the least-violating iterate") {
    const auto agents = two_agents();
    auto cfg = one_pcc_config(0.01);
    cfg.max_iterations = 3;
    const ConstraintSet c{{-kInf}, {1.0}};
    const auto run = run_slot(agents, c, cfg);
    CHECK_FALSE(run.converged);
    CHECK(run.iterations == 3);
    double least = kInf;
    for (const auto& it : run.trace) least = std::min(least, std::max(0.0, it.average[0] - 1.0));
    CHECK(std::max(0.0, run.average[0] - 1.0) == least);
}

TEST_CASE("custom control law is used") {
    const auto agents = two_agents();
    auto cfg = one_pcc_config(0.0);
    int calls = 0;
    ControlLaw frozen = [&](const CoordinatorConfig&, const ControlSignal& s, std::span<const double>,
                            const ConstraintSet&) {
        ++calls;
        auto n = s;
        ++n.iteration;
        return n;
    };
    const auto run = run_slot(agents, ConstraintSet::wide_open(1), cfg, frozen);
    CHECK(run.converged);
    CHECK(calls == 1);
}

TEST_CASE("verify_equilibrium") {
    SUBCASE("single agent, wide constraints") {
        const auto h = fixture::cost_example();
        CoordinatorConfig cfg;
        cfg.d_scale = {0.01};
        const std::vector<HouseholdState> one{h};
        const auto br = best_response(h, 0.0, 0.01);
        const auto chk = verify_equilibrium(std::vector<Strategy>{br}, ControlSignal::zero(1), one, cfg,
                                            ConstraintSet::wide_open(1));
        CHECK(chk.max_regret <= 1e-9);
        CHECK(chk.constraint_satisfied);
    }
    SUBCASE("perturbed agent shows its own cost gap") {
        const auto agents = two_agents();
        auto cfg = one_pcc_config(0.01);
        cfg.tol_u = 1e-9;
        const ConstraintSet c{{-kInf}, {1.5}};
        const auto run = run_slot(agents, c, cfg);
        REQUIRE(run.converged);
        auto moved = run.strategies;
        moved[1].x += 0.5;
        moved[1].s -= 0.5;
        const auto chk = verify_equilibrium(moved, run.signal, agents, cfg, c);
        CHECK(chk.max_regret > 0.0);
        CHECK(chk.max_regret == chk.regrets[1]);
        // Hand gap: the agent's objective is quadratic with curvature
        // 0.07 + d/H around its optimum.
        const double d_over_h = 0.01 / 2.0;
        const double u_eff = d_over_h * moved[0].x + run.signal.net_lambda()[0];
        const double best = best_response(agents[1], u_eff, d_over_h).x;
        const double gap = oracle::objective(agents[1], moved[1].x, u_eff, d_over_h) -
                           oracle::objective(agents[1], best, u_eff, d_over_h);
        CHECK(chk.regrets[1] == doctest::Approx(gap).epsilon(1e-9));
        CHECK_FALSE(chk.constraint_satisfied);
    }
}

TEST_CASE("attainability") {
    std::vector<HouseholdState> agents;
    for (int i = 0; i < 4; ++i) {
        auto h = fixture::cost_example();
        h.id = i + 1;
        h.r = 1.0;
        h.e0 = 5.0;
        h.battery.cyc_up = 1.0;
        h.battery.cyc_dn = -1.0; // x in [0, 2]
        agents.push_back(h);
    }
    const auto box = attainable_box(agents, 1);
    CHECK(box.lo[0] == doctest::Approx(0.0));
    CHECK(box.hi[0] == doctest::Approx(2.0));

    const auto ok = check_attainability(agents, ConstraintSet{{0.5}, {0.8}});
    CHECK(ok.attainable);
    CHECK(ok.margin == doctest::Approx(0.5));

    const auto high = check_attainability(agents, ConstraintSet{{0.5}, {2.5}});
    CHECK_FALSE(high.attainable);
    CHECK(high.margin == doctest::Approx(-0.5));

    // Nobody on PCC 1, finite bound there.
    const auto empty = check_attainability(agents, ConstraintSet{{-kInf, 0.1}, {kInf, 0.2}});
    CHECK_FALSE(empty.attainable);

    const auto wide = check_attainability(agents, ConstraintSet::wide_open(1));
    CHECK(wide.attainable);

    const auto clamped = clamp_to_box(ConstraintSet{{-1.0}, {2.5}}, box);
    CHECK(clamped.c_lo[0] == doctest::Approx(0.0));
    CHECK(clamped.c_hi[0] == doctest::Approx(2.0));
}

TEST_CASE("constraint and config validation") {
    CHECK_THROWS_AS(ConstraintSet({{1.0}, {0.0}}).validate(), ValidationError);
    CoordinatorConfig cfg;
    cfg.d_scale = {0.01};
    cfg.avg_gamma = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg.avg_gamma = 0.5;
    cfg.max_iterations = 61;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
