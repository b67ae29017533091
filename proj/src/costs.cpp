#include "rtc/costs.hpp"

namespace rtc {

double degradation_cost(const HouseholdState& h, double s) {
    const double dev = s - h.commitment.s_hat;
    return h.battery.a * dev * dev + h.battery.b * dev;
}

double price_cost(const HouseholdState& h, double x) {
    const auto& c = h.commitment;
    const double p = (x >= c.x_hat_m) ? h.prices.p_u : h.prices.p_f;
    return (x - c.x_hat_m) * p + c.x_hat_m * c.p_m;
}

double reward_cost(const HouseholdState& h, double x) {
    const double dev = x - h.commitment.x_hat;
    return h.prices.a_r * dev * dev - h.prices.reward;
}

double local_cost(const HouseholdState& h, double x) {
    return degradation_cost(h, h.r - x) + reward_cost(h, x) + price_cost(h, x);
}

CostBreakdown coupled_cost(const HouseholdState& h, double x, double u_at_pcc) {
    CostBreakdown out;
    out.degradation = degradation_cost(h, h.r - x);
    out.price = price_cost(h, x);
    out.reward = reward_cost(h, x);
    out.local_total = out.degradation + out.price + out.reward;
    out.coupling = u_at_pcc * x;
    out.total = out.local_total + out.coupling;
    return out;
}

} // namespace rtc
