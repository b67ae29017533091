#pragma once

#include "rtc/model.hpp"

namespace rtc {

struct CostBreakdown {
    double degradation = 0.0;
    double price = 0.0;
    double reward = 0.0;      ///< negative when the household earns a net reward
    double local_total = 0.0; ///< degradation + price + reward
    double coupling = 0.0;    ///< u * x
    double total = 0.0;       ///< local_total + coupling
};

/// a (s - s_hat)^2 + b (s - s_hat)
double degradation_cost(const HouseholdState& h, double s);

/// Piecewise linear settlement of the exchanged flow `x`. Flow at or above
/// the neighbour-traded quantity is priced at the supplier tariff, below it
/// at the feed-in tariff; the traded quantity itself is settled at P_m.
double price_cost(const HouseholdState& h, double x);

/// a_r (x - x_hat)^2 - R. Positive (a penalty) once |x - x_hat| > sqrt(R / a_r).
double reward_cost(const HouseholdState& h, double x);

/// Local cost f(x) with the battery flow eliminated through s = r - x.
double local_cost(const HouseholdState& h, double x);

CostBreakdown coupled_cost(const HouseholdState& h, double x, double u_at_pcc);

} // namespace rtc
