#include "rtc/coordinator.hpp"

#include "rtc/costs.hpp"
#include "rtc/errors.hpp"
#include "rtc/response.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rtc {

namespace {

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double max_violation(std::span<const double> avg, const ConstraintSet& c) {
    double m = 0.0;
    for (std::size_t p = 0; p < avg.size(); ++p) {
        m = std::max({m, avg[p] - c.c_hi[p], c.c_lo[p] - avg[p]});
    }
    return m;
}

} // namespace

ConstraintSet ConstraintSet::wide_open(std::size_t pcc_count) {
    const double inf = std::numeric_limits<double>::infinity();
    return {std::vector<double>(pcc_count, -inf), std::vector<double>(pcc_count, inf)};
}

void ConstraintSet::validate() const {
    if (c_lo.size() != c_hi.size()) throw ValidationError("constraint set: bound vectors differ in length");
    for (std::size_t p = 0; p < c_lo.size(); ++p) {
        if (!(c_lo[p] <= c_hi[p])) throw ValidationError("constraint set: c_lo > c_hi at PCC " + std::to_string(p));
    }
}

ControlSignal ControlSignal::zero(std::size_t pcc_count) {
    return {std::vector<double>(pcc_count, 0.0), std::vector<double>(pcc_count, 0.0),
            std::vector<double>(pcc_count, 0.0), 0};
}

std::vector<double> ControlSignal::net_lambda() const {
    std::vector<double> out(lambda_up.size());
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = lambda_up[p] - lambda_dn[p];
    return out;
}

void CoordinatorConfig::validate() const {
    for (double d : d_scale) {
        if (!(d >= 0.0)) throw ValidationError("coordinator: d_scale must be non-negative");
    }
    if (!(step_beta > 0.0)) throw ValidationError("coordinator: step_beta must be positive");
    if (!(avg_gamma > 0.0 && avg_gamma <= 1.0)) throw ValidationError("coordinator: avg_gamma must be in (0, 1]");
    if (!(tol_u > 0.0) || !(tol_c > 0.0)) throw ValidationError("coordinator: tolerances must be positive");
    if (max_iterations <= 0) throw ValidationError("coordinator: max_iterations must be positive");
    if (max_iterations * iteration_period_s > slot_duration_s + 1e-9)
        throw ValidationError("coordinator: iteration budget exceeds the slot");
}

CoordinatorConfig default_coordinator_config(std::span<const HouseholdState> agents, std::size_t pcc_count,
                                             const SlotConfig& slots) {
    CoordinatorConfig cfg;
    cfg.d_scale.assign(pcc_count, 0.01);
    double sum_a = 0.0;
    double sum_ar = 0.0;
    for (const auto& h : agents) {
        sum_a += h.battery.a;
        sum_ar += h.prices.a_r;
    }
    if (!agents.empty()) {
        cfg.step_beta = (sum_a + sum_ar) / static_cast<double>(agents.size());
    }
    cfg.max_iterations = slots.max_iterations;
    cfg.iteration_period_s = slots.iteration_period_s;
    cfg.slot_duration_s = slots.slot_seconds();
    return cfg;
}

std::vector<double> aggregate(std::span<const Strategy> strategies, std::size_t household_count,
                              std::size_t pcc_count) {
    std::vector<double> avg(pcc_count, 0.0);
    for (const auto& s : strategies) avg.at(s.pcc.index) += s.x;
    for (double& v : avg) v /= static_cast<double>(household_count);
    return avg;
}

ControlSignal control_update(const CoordinatorConfig& cfg, const ControlSignal& sig,
                             std::span<const double> measured_avg, const ConstraintSet& c) {
    ControlSignal next = sig;
    for (std::size_t p = 0; p < measured_avg.size(); ++p) {
        const double hi_gap = std::isfinite(c.c_hi[p]) ? measured_avg[p] - c.c_hi[p] : -1.0;
        const double lo_gap = std::isfinite(c.c_lo[p]) ? c.c_lo[p] - measured_avg[p] : -1.0;
        next.lambda_up[p] = std::isfinite(c.c_hi[p]) ? std::max(0.0, sig.lambda_up[p] + cfg.step_beta * hi_gap) : 0.0;
        next.lambda_dn[p] = std::isfinite(c.c_lo[p]) ? std::max(0.0, sig.lambda_dn[p] + cfg.step_beta * lo_gap) : 0.0;
        const double target = cfg.d_scale[p] * measured_avg[p] + next.lambda_up[p] - next.lambda_dn[p];
        next.u[p] = (1.0 - cfg.avg_gamma) * sig.u[p] + cfg.avg_gamma * target;
    }
    next.iteration = sig.iteration + 1;
    return next;
}

SlotRun run_slot(std::span<const HouseholdState> agents, const ConstraintSet& c, const CoordinatorConfig& cfg,
                 const ControlLaw& law) {
    cfg.validate();
    c.validate();
    const std::size_t n_pcc = c.size();
    if (cfg.d_scale.size() != n_pcc) throw ValidationError("coordinator: d_scale size differs from PCC count");
    const std::size_t n_agents = agents.size();

    std::vector<FeasibleInterval> intervals;
    intervals.reserve(n_agents);
    for (const auto& h : agents) intervals.push_back(feasible_interval(h));

    SlotRun run;
    run.agents.assign(agents.begin(), agents.end());

    ControlSignal sig = ControlSignal::zero(n_pcc);
    std::vector<Strategy> responses(n_agents);

    struct Best {
        double violation = std::numeric_limits<double>::infinity();
        double du = std::numeric_limits<double>::infinity();
        std::vector<Strategy> strategies;
        ControlSignal signal;
        std::vector<double> average;
    } best;

    const double dt = cfg.iteration_period_s;
    const double slot_s = cfg.slot_duration_s;

    for (int k = 0; k < cfg.max_iterations; ++k) {
        IterationTrace it;
        it.iteration = k;
        it.signal = sig;
        it.agents.reserve(n_agents);

        for (std::size_t i = 0; i < n_agents; ++i) {
            const auto& h = run.agents[i];
            responses[i] = best_response(h, intervals[i], sig.u[h.pcc.index]);
            const double x_star = responses[i].x;
            const double s_kT = battery_setpoint(h, x_star);
            it.agents.push_back({h.id, x_star, s_kT, h.x_0k, h.s_0k, x_star - h.x_0k});
        }
        const std::vector<double> avg = aggregate(responses, n_agents, n_pcc);
        it.average = avg;

        const ControlSignal next = law(cfg, sig, avg, c);
        const double du = max_abs_diff(next.u, sig.u);
        const double dl = std::max(max_abs_diff(next.lambda_up, sig.lambda_up),
                                   max_abs_diff(next.lambda_dn, sig.lambda_dn));
        const double viol = max_violation(avg, c);

        // Setpoints are held for one iteration period; the planned remainder
        // is spread evenly over the time left in the slot.
        const double remaining = slot_s - k * dt;
        const double frac = remaining > dt ? dt / remaining : 1.0;
        for (std::size_t i = 0; i < n_agents; ++i) {
            const auto& a = it.agents[i];
            run.agents[i].x_0k += a.x_kT * frac;
            run.agents[i].s_0k += a.s_setpoint * frac;
        }
        run.trace.push_back(std::move(it));

        if (viol < best.violation - 1e-15 || (viol <= best.violation + 1e-15 && du < best.du)) {
            best = {viol, du, responses, sig, avg};
        }
        run.iterations = k + 1;
        if (du <= cfg.tol_u && dl <= cfg.tol_u && viol <= cfg.tol_c) {
            run.converged = true;
            run.strategies = responses;
            run.signal = sig;
            run.average = avg;
            return run;
        }
        sig = next;
    }

    run.converged = false;
    run.strategies = std::move(best.strategies);
    run.signal = std::move(best.signal);
    run.average = std::move(best.average);
    return run;
}

EquilibriumCheck verify_equilibrium(std::span<const Strategy> strategies, const ControlSignal& sig,
                                    std::span<const HouseholdState> agents, const CoordinatorConfig& cfg,
                                    const ConstraintSet& c) {
    const std::size_t n_pcc = c.size();
    const std::size_t n = agents.size();
    const double h_count = static_cast<double>(n);

    EquilibriumCheck out;
    out.average = aggregate(strategies, n, n_pcc);
    out.regrets.assign(n, 0.0);

    std::vector<double> pcc_sum(n_pcc, 0.0);
    for (const auto& s : strategies) pcc_sum[s.pcc.index] += s.x;
    const std::vector<double> lambda = sig.net_lambda();

    for (std::size_t i = 0; i < n; ++i) {
        const auto& h = agents[i];
        const std::size_t p = h.pcc.index;
        const double d_over_h = cfg.d_scale[p] / h_count;
        const double others = pcc_sum[p] - strategies[i].x;
        const double u_eff = d_over_h * others + lambda[p];
        const Strategy br = best_response(h, u_eff, d_over_h);
        const double current = response_objective(h, strategies[i].x, u_eff, d_over_h);
        const double optimum = response_objective(h, br.x, u_eff, d_over_h);
        out.regrets[i] = std::max(0.0, current - optimum);
        out.max_regret = std::max(out.max_regret, out.regrets[i]);
    }

    out.constraint_satisfied = true;
    for (std::size_t p = 0; p < n_pcc; ++p) {
        if (out.average[p] < c.c_lo[p] - cfg.tol_c || out.average[p] > c.c_hi[p] + cfg.tol_c) {
            out.constraint_satisfied = false;
        }
    }
    return out;
}

AverageBox attainable_box(std::span<const HouseholdState> agents, std::size_t pcc_count) {
    AverageBox box{std::vector<double>(pcc_count, 0.0), std::vector<double>(pcc_count, 0.0)};
    if (agents.empty()) return box;
    for (const auto& h : agents) {
        const FeasibleInterval iv = feasible_interval(h);
        box.lo.at(h.pcc.index) += iv.lo;
        box.hi.at(h.pcc.index) += iv.hi;
    }
    const double h_count = static_cast<double>(agents.size());
    for (std::size_t p = 0; p < pcc_count; ++p) {
        box.lo[p] /= h_count;
        box.hi[p] /= h_count;
    }
    return box;
}

Attainability check_attainability(std::span<const HouseholdState> agents, const ConstraintSet& c) {
    const AverageBox box = attainable_box(agents, c.size());
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < c.size(); ++p) {
        for (double bound : {c.c_lo[p], c.c_hi[p]}) {
            if (!std::isfinite(bound)) continue;
            margin = std::min({margin, bound - box.lo[p], box.hi[p] - bound});
        }
    }
    return {margin >= 0.0, margin};
}

ConstraintSet clamp_to_box(const ConstraintSet& c, const AverageBox& box) {
    ConstraintSet out = c;
    for (std::size_t p = 0; p < c.size(); ++p) {
        if (std::isfinite(out.c_lo[p])) out.c_lo[p] = std::clamp(out.c_lo[p], box.lo[p], box.hi[p]);
        if (std::isfinite(out.c_hi[p])) out.c_hi[p] = std::clamp(out.c_hi[p], box.lo[p], box.hi[p]);
        if (out.c_lo[p] > out.c_hi[p]) out.c_lo[p] = out.c_hi[p];
    }
    return out;
}

} // namespace rtc
