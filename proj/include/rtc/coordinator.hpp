#pragma once

// Operator side of the real-time control loop: measure the average grid
// flow per PCC, update the broadcast signal, repeat until the agents' best
// responses settle inside the coupling constraint.

#include "rtc/model.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace rtc {

/// Per-PCC bounds on the average grid flow (1/H) sum_i x_i, kWh per slot.
struct ConstraintSet {
    std::vector<double> c_lo;
    std::vector<double> c_hi;

    std::size_t size() const { return c_lo.size(); }
    static ConstraintSet wide_open(std::size_t pcc_count);
    void validate() const;

    bool operator==(const ConstraintSet&) const = default;
};

struct ControlSignal {
    std::vector<double> u;         ///< broadcast price signal, EUR/kWh
    std::vector<double> lambda_up; ///< dual of the upper bound, >= 0
    std::vector<double> lambda_dn; ///< dual of the lower bound, >= 0
    int iteration = 0;

    static ControlSignal zero(std::size_t pcc_count);
    std::vector<double> net_lambda() const;
};

struct CoordinatorConfig {
    std::vector<double> d_scale; ///< diagonal of the aggregate coupling matrix
    double step_beta = 0.07;     ///< dual ascent step
    double avg_gamma = 0.5;      ///< signal averaging weight in (0, 1]
    double tol_u = 1e-4;         ///< EUR/kWh
    double tol_c = 1e-3;         ///< kWh
    int max_iterations = 60;
    double iteration_period_s = 10.0;
    double slot_duration_s = 600.0;

    void validate() const;
};

/// Defaults: d_scale 0.01 per PCC, gamma 0.5, beta = mean(a) + mean(a_r).
CoordinatorConfig default_coordinator_config(std::span<const HouseholdState> agents, std::size_t pcc_count,
                                             const SlotConfig& slots);

/// (1/H) sum of grid flows per PCC. H is the total household count, not the
/// count at each PCC.
std::vector<double> aggregate(std::span<const Strategy> strategies, std::size_t household_count,
                              std::size_t pcc_count);

/// Projected dual ascent on both bounds followed by an averaged step of the
/// broadcast towards d_scale * average + net dual.
ControlSignal control_update(const CoordinatorConfig& cfg, const ControlSignal& sig,
                             std::span<const double> measured_avg, const ConstraintSet& c);

using ControlLaw = std::function<ControlSignal(const CoordinatorConfig&, const ControlSignal&,
                                               std::span<const double>, const ConstraintSet&)>;

struct AgentTrace {
    int household = 0;
    double x_star = 0.0;     ///< slot-total grid flow planned at this iteration
    double s_setpoint = 0.0; ///< battery flow for the rest of the slot
    double x_0k = 0.0;       ///< grid energy exchanged before this iteration
    double s_0k = 0.0;       ///< battery energy used before this iteration
    double x_kT = 0.0;       ///< x_star - x_0k
};

struct IterationTrace {
    int iteration = 0;
    ControlSignal signal; ///< the broadcast the agents responded to
    std::vector<double> average;
    std::vector<AgentTrace> agents;
};

struct SlotRun {
    std::vector<Strategy> strategies;
    ControlSignal signal;             ///< final broadcast
    std::vector<double> average;      ///< aggregate of `strategies`
    std::vector<HouseholdState> agents; ///< states with x_0k / s_0k at exit
    bool converged = false;
    int iterations = 0;
    std::vector<IterationTrace> trace;
};

/// Runs the broadcast / respond / measure / update loop for one slot,
/// starting from u = 0. On non-convergence the iterate with the smallest
/// constraint violation is returned with `converged == false`.
SlotRun run_slot(std::span<const HouseholdState> agents, const ConstraintSet& c, const CoordinatorConfig& cfg,
                 const ControlLaw& law = control_update);

struct EquilibriumCheck {
    double max_regret = 0.0;
    std::vector<double> regrets;
    std::vector<double> average;
    bool constraint_satisfied = false;
};

/// Largest cost decrease any agent could obtain by deviating unilaterally
/// under the aggregate-coupled objective
///   f_i(y) + (d/H)(y + sum_{j != i at same PCC} x_j) y + lambda y,
/// plus membership of the average in [c_lo - tol_c, c_hi + tol_c].
EquilibriumCheck verify_equilibrium(std::span<const Strategy> strategies, const ControlSignal& sig,
                                    std::span<const HouseholdState> agents, const CoordinatorConfig& cfg,
                                    const ConstraintSet& c);

/// Minkowski average (1/H) sum_i X_i per PCC.
struct AverageBox {
    std::vector<double> lo;
    std::vector<double> hi;
};

AverageBox attainable_box(std::span<const HouseholdState> agents, std::size_t pcc_count);

struct Attainability {
    bool attainable = false;
    double margin = 0.0; ///< smallest slack of a finite bound; negative if violated
};

/// Every finite bound must lie inside the attainable box of its PCC.
/// Infinite bounds are inactive.
Attainability check_attainability(std::span<const HouseholdState> agents, const ConstraintSet& c);

/// Moves each finite bound into the attainable box.
ConstraintSet clamp_to_box(const ConstraintSet& c, const AverageBox& box);

} // namespace rtc
