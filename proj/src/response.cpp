#include "rtc/response.hpp"

#include "rtc/costs.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace rtc {

namespace {

constexpr double kTieTol = 1e-12;

} // namespace

BatteryRange battery_range(const HouseholdState& h) {
    const auto& b = h.battery;
    return {std::max({h.e0 - b.e_max, b.s_min, b.cyc_dn}), std::min({h.e0 - b.e_min, b.s_max, b.cyc_up})};
}

FeasibleInterval feasible_interval(const HouseholdState& h) {
    const BatteryRange s = battery_range(h);
    const double batt_lo = h.r - s.hi;
    const double batt_hi = h.r - s.lo;

    FeasibleInterval out{std::max(batt_lo, -h.x_bar), std::min(batt_hi, h.x_bar), false};
    if (out.lo > out.hi && batt_lo <= batt_hi) {
        // Battery physics wins over the supply contract.
        const double point = (batt_lo > h.x_bar) ? batt_lo : batt_hi;
        out = {point, point, true};
    }
    return out;
}

double response_objective(const HouseholdState& h, double x, double u_at_pcc, double d_over_h) {
    return local_cost(h, x) + u_at_pcc * x + d_over_h * x * x;
}

Strategy best_response(const HouseholdState& h, double u_at_pcc, double d_over_h) {
    return best_response(h, feasible_interval(h), u_at_pcc, d_over_h);
}

Strategy best_response(const HouseholdState& h, const FeasibleInterval& interval, double u_at_pcc,
                       double d_over_h) {
    if (interval.empty()) {
        std::ostringstream os;
        os << "household " << h.id << ": empty feasible interval [" << interval.lo << ", " << interval.hi << "]";
        throw InfeasibleInterval(os.str());
    }

    const double lo = interval.lo;
    const double hi = interval.hi;
    const double kink = h.commitment.x_hat_m;
    const double a = h.battery.a;
    const double q = a + h.prices.a_r + d_over_h;
    const double base = 2.0 * a * (h.r - h.commitment.s_hat) + h.battery.b + 2.0 * h.prices.a_r * h.commitment.x_hat -
                        u_at_pcc;

    std::array<double, 5> cand{};
    std::size_t n = 0;
    cand[n++] = lo;
    cand[n++] = hi;
    if (kink >= lo && kink <= hi) cand[n++] = kink;
    if (const double from = std::max(lo, kink); from <= hi) {
        cand[n++] = std::clamp((base - h.prices.p_u) / (2.0 * q), from, hi);
    }
    if (const double to = std::min(hi, kink); lo <= to) {
        cand[n++] = std::clamp((base - h.prices.p_f) / (2.0 * q), lo, to);
    }

    double best_x = cand[0];
    double best_f = response_objective(h, best_x, u_at_pcc, d_over_h);
    for (std::size_t i = 1; i < n; ++i) {
        const double x = cand[i];
        const double f = response_objective(h, x, u_at_pcc, d_over_h);
        if (f < best_f - kTieTol) {
            best_x = x;
            best_f = f;
            continue;
        }
        if (f > best_f + kTieTol) continue;
        const double d_new = std::abs(x - h.commitment.x_hat);
        const double d_old = std::abs(best_x - h.commitment.x_hat);
        if (d_new < d_old || (d_new == d_old && x < best_x)) {
            best_x = x;
            best_f = std::min(best_f, f);
        }
    }
    return {h.pcc, best_x, h.r - best_x};
}

double battery_setpoint(const HouseholdState& h, double x_star) {
    return h.r - x_star - h.s_0k;
}

} // namespace rtc
