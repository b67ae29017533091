#include "oracles.hpp"

#include "rtc/costs.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace rtc;

TEST_CASE("degradation cost") {
    auto h = fixture::cost_example();
    h.battery.b = 0.01;
    h.commitment.s_hat = 0.3;
    CHECK(degradation_cost(h, 0.3) == 0.0);
    CHECK(degradation_cost(h, 2.3) == doctest::Approx(0.22).epsilon(1e-12));
    CHECK(degradation_cost(h, -1.7) == doctest::Approx(0.18).epsilon(1e-12));
}

TEST_CASE("price cost branches") {
    const auto h = fixture::cost_example();
    CHECK(price_cost(h, 2.0) == doctest::Approx(0.24).epsilon(1e-15));
    CHECK(price_cost(h, 3.0) == doctest::Approx(0.39).epsilon(1e-12));
    CHECK(price_cost(h, 1.0) == doctest::Approx(0.14).epsilon(1e-12));
    // Injection below the traded amount is settled at the feed-in tariff.
    CHECK(price_cost(h, -1.0) == doctest::Approx(-0.06).epsilon(1e-12));
}

TEST_CASE("reward cost") {
    const auto h = fixture::cost_example();
    CHECK(reward_cost(h, 2.0) == doctest::Approx(-0.05).epsilon(1e-15));
    CHECK(reward_cost(h, 4.0) == doctest::Approx(0.03).epsilon(1e-12));
    CHECK(reward_cost(h, 0.0) == doctest::Approx(0.03).epsilon(1e-12));
    CHECK(std::abs(reward_cost(h, 2.0 + std::sqrt(2.5))) < 1e-15);
    CHECK(reward_cost(h, 2.0 + std::sqrt(2.5) + 1e-6) > 0.0);
    CHECK(reward_cost(h, 2.0 + std::sqrt(2.5) - 1e-6) < 0.0);
}

TEST_CASE("local and coupled cost of the worked example") {
    const auto h = fixture::cost_example();
    CHECK(local_cost(h, 2.0) == doctest::Approx(0.19).epsilon(1e-12));
    CHECK(local_cost(h, 3.0) == doctest::Approx(0.41).epsilon(1e-12));

    const auto c0 = coupled_cost(h, 2.0, 0.0);
    CHECK(c0.total == c0.local_total);

    const auto c = coupled_cost(h, 3.0, 0.10);
    CHECK(c.degradation == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(c.reward == doctest::Approx(-0.03).epsilon(1e-12));
    CHECK(c.price == doctest::Approx(0.39).epsilon(1e-12));
    CHECK(c.coupling == doctest::Approx(0.30).epsilon(1e-12));
    CHECK(c.total == doctest::Approx(0.71).epsilon(1e-12));
}

TEST_CASE("breakdown identities and agreement with the direct oracle") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> xs(-4.0, 4.0), us(-0.3, 0.3);
    for (int k = 0; k < 2000; ++k) {
        const auto h = fixture::random_household(rng);
        const double x = xs(rng), u = us(rng);
        const auto c = coupled_cost(h, x, u);
        CHECK(std::abs(c.local_total - (c.degradation + c.price + c.reward)) <= 1e-12);
        CHECK(std::abs(c.total - (c.local_total + c.coupling)) <= 1e-12);
        CHECK(std::abs(c.total - oracle::objective(h, x, u, 0.0)) <= 1e-12);
    }
}

TEST_CASE("convexity, strong convexity and kink continuity on random draws") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> xs(-4.0, 4.0), th(0.0, 1.0);
    for (int k = 0; k < 10000; ++k) {
        const auto h = fixture::random_household(rng);
        const double x1 = xs(rng), x2 = xs(rng), t = th(rng);
        const double xm = t * x1 + (1.0 - t) * x2;
        CHECK(local_cost(h, xm) <= t * local_cost(h, x1) + (1.0 - t) * local_cost(h, x2) + 1e-9);

        const double l = h.battery.a + h.prices.a_r;
        auto g = [&](double x) { return local_cost(h, x) - l * x * x; };
        CHECK(g(xm) <= t * g(x1) + (1.0 - t) * g(x2) + 1e-9);

        const double km = h.commitment.x_hat_m;
        const double upper = (km - km) * h.prices.p_u + km * h.commitment.p_m;
        const double lower = (km - km) * h.prices.p_f + km * h.commitment.p_m;
        CHECK(std::abs(upper - lower) < 1e-12);
        CHECK(std::abs(price_cost(h, km) - km * h.commitment.p_m) < 1e-12);
        const double eps = 1e-9;
        CHECK(std::abs(price_cost(h, km + eps) - price_cost(h, km - eps)) < 1e-9);
    }
}
