#include "rtc/model.hpp"

#include "rtc/errors.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace rtc {

namespace {

constexpr double kIdentityTol = 1e-9;

[[noreturn]] void fail(int id, const std::string& field, const std::string& what) {
    std::ostringstream os;
    os << "household " << id << ": " << field << ": " << what;
    throw ValidationError(os.str());
}

bool close(double a, double b) {
    return std::abs(a - b) <= kIdentityTol * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

} // namespace

void SlotConfig::validate() const {
    if (!(slot_duration_min > 0.0) || !(iteration_period_s > 0.0) || max_iterations <= 0 ||
        slots_per_day <= 0) {
        throw ValidationError("slots: all fields must be positive");
    }
    if (max_iterations * iteration_period_s > slot_seconds() + 1e-9) {
        throw ValidationError("slots: max_iterations * iteration_period exceeds the slot duration");
    }
}

std::vector<double> Strategy::grid_vector(std::size_t pcc_count) const {
    std::vector<double> v(pcc_count, 0.0);
    if (pcc.index < pcc_count) v[pcc.index] = x;
    return v;
}

HouseholdState update_gap(HouseholdState h, double l_tilde, double g_tilde) {
    h.r_tilde = l_tilde - g_tilde;
    h.r = h.r_hat + h.r_tilde;
    return h;
}

void validate_household(const HouseholdState& h) {
    const auto& c = h.commitment;
    const auto& bat = h.battery;
    const auto& p = h.prices;

    if (!close(c.x_hat, c.x_hat_m + c.x_hat_u)) fail(h.id, "x_hat", "differs from x_hat_m + x_hat_u");
    if (!close(h.r, h.r_hat + h.r_tilde)) fail(h.id, "r", "differs from r_hat + r_tilde");
    if (!(bat.e_min < bat.e_max)) fail(h.id, "battery.e_min", "must be below e_max");
    if (h.e0 < bat.e_min - kIdentityTol || h.e0 > bat.e_max + kIdentityTol)
        fail(h.id, "e0", "outside [e_min, e_max]");
    if (!(bat.s_min < 0.0 && 0.0 < bat.s_max)) fail(h.id, "battery.s_min/s_max", "need s_min < 0 < s_max");
    if (!(bat.cyc_dn <= 0.0 && 0.0 <= bat.cyc_up)) fail(h.id, "battery.cyc_dn/cyc_up", "need cyc_dn <= 0 <= cyc_up");
    if (!(bat.a > 0.0)) fail(h.id, "battery.a", "must be positive");
    if (!(h.x_bar > 0.0)) fail(h.id, "x_bar", "must be positive");
    if (!(p.p_f < c.p_m && c.p_m < p.p_u)) fail(h.id, "p_m", "need p_f < p_m < p_u");
    if (!(p.a_r >= 0.0)) fail(h.id, "prices.a_r", "must be non-negative");
    if (!(p.reward >= 0.0)) fail(h.id, "prices.reward", "must be non-negative");
}

} // namespace rtc
