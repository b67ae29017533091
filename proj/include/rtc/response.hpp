#pragma once

#include "rtc/model.hpp"

#include <stdexcept>

namespace rtc {

/// Bounds on the battery flow s for the slot: the intersection of the
/// energy, power and cycling limits. Always contains 0 for a valid state.
struct BatteryRange {
    double lo = 0.0;
    double hi = 0.0;
};

/// Bounds on the grid flow x for the slot.
struct FeasibleInterval {
    double lo = 0.0;
    double hi = 0.0;
    /// The battery range mapped through x = r - s misses [-x_bar, x_bar].
    /// The interval then collapses onto the battery-feasible point nearest
    /// to the contract box.
    bool contract_clash = false;

    bool empty() const { return lo > hi; }
};

class InfeasibleInterval : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

BatteryRange battery_range(const HouseholdState& h);

FeasibleInterval feasible_interval(const HouseholdState& h);

/// Objective minimised by a best response: local cost + u x + d_over_h x^2.
double response_objective(const HouseholdState& h, double x, double u_at_pcc, double d_over_h);

/// Exact minimiser of `response_objective` over the feasible interval.
///
/// The objective is convex and piecewise quadratic with one breakpoint at
/// x_hat_m (the price kink). Each piece's vertex is clamped to its domain
/// and compared against the breakpoint and the interval ends. Candidates
/// whose objective differs by at most 1e-12 are ordered by distance to
/// x_hat, then by value.
Strategy best_response(const HouseholdState& h, double u_at_pcc, double d_over_h = 0.0);

/// Same, over an explicit interval. Throws InfeasibleInterval if it is empty.
Strategy best_response(const HouseholdState& h, const FeasibleInterval& interval, double u_at_pcc,
                       double d_over_h = 0.0);

/// Battery setting for the rest of the slot so that, held to the end, the
/// slot totals are x_star on the grid and r - x_star on the battery.
double battery_setpoint(const HouseholdState& h, double x_star);

} // namespace rtc
