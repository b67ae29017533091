#pragma once

// Per-phase radial load flow (backward/forward sweep), limit checks,
// coupling-constraint derivation and greedy phase rebalancing.

#include "rtc/coordinator.hpp"
#include "rtc/model.hpp"

#include <complex>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace rtc {

struct FeederNode {
    int id = 0;
    std::size_t phase = 0;
    int parent = -1;     ///< -1 for the slack node of a phase
    std::size_t bus = 0; ///< physical position shared by the phases
    std::optional<PccId> pcc;

    bool operator==(const FeederNode&) const = default;
};

struct FeederLine {
    int from = 0; ///< parent node
    int to = 0;   ///< child node
    double resistance = 0.0; ///< ohm
    double reactance = 0.0;  ///< ohm
    double ampacity = 200.0; ///< A

    bool operator==(const FeederLine&) const = default;
};

struct FeederModel {
    std::vector<FeederNode> nodes; ///< node ids equal their position
    std::vector<FeederLine> lines;
    double slack_voltage = 236.7; ///< phase-to-neutral nominal Un, V
    double v_limit_frac = 0.10;
    double monitor_v_frac = 0.09;
    double monitor_i_frac = 0.70;
    double transformer_kva = 160.0;
    double power_factor = 1.0; ///< applied to every household flow

    bool operator==(const FeederModel&) const = default;
};

class TopologyError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A validated radial feeder: one slack-rooted tree per phase, every
/// non-slack node fed by exactly one line from its parent.
class RadialFeeder {
public:
    explicit RadialFeeder(FeederModel model);

    const FeederModel& model() const { return model_; }
    std::size_t node_count() const { return model_.nodes.size(); }
    std::size_t phase_count() const { return phase_count_; }
    /// Node index of a physical bus on a given phase; throws if absent.
    std::size_t node_at(std::size_t bus, std::size_t phase) const;
    bool has_node(std::size_t bus, std::size_t phase) const;

    /// Parents before children.
    const std::vector<std::size_t>& order() const { return order_; }
    /// Index of the line feeding each node, -1 for slack nodes.
    const std::vector<int>& feeding_line() const { return feeding_line_; }

private:
    FeederModel model_;
    std::size_t phase_count_ = 0;
    std::vector<std::size_t> order_;
    std::vector<int> feeding_line_;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> by_bus_phase_;
};

struct LoadFlowResult {
    std::vector<std::complex<double>> node_voltages; ///< V
    std::vector<double> line_currents;               ///< A, indexed like FeederModel::lines
    double max_v_dev_frac = 0.0;
    double max_i_frac_of_ampacity = 0.0;
    bool converged = false;
    int iterations = 0;
    double max_mismatch_pu = 0.0;         ///< per-node power mismatch, base transformer_kva / phases
    std::complex<double> slack_power;     ///< VA summed over phases
    std::complex<double> losses;          ///< VA summed over lines
    std::complex<double> load_power;      ///< VA summed over nodes

    std::vector<double> voltage_magnitudes() const;
};

/// Constant-power backward/forward sweep. `node_kw[n]` is the active power
/// drawn at node n (consumption positive). Stops once the largest voltage
/// update is below 1e-8 p.u.; gives up after 100 sweeps.
LoadFlowResult solve_load_flow(const RadialFeeder& feeder, std::span<const double> node_kw);

struct LimitStatus {
    bool violation = false;       ///< beyond v_limit_frac or 100 % ampacity
    bool monitor_trigger = false; ///< at/above monitor_v_frac or above monitor_i_frac
};

LimitStatus check_limits(const LoadFlowResult& r, const FeederModel& f);

/// Where a household is connected.
struct Connection {
    std::size_t node = 0;
    PccId pcc;
};

/// Per-node load vector from per-household flows.
std::vector<double> node_loads(const RadialFeeder& feeder, std::span<const Connection> connections,
                               std::span<const double> household_kw);

enum class FlowDirection { Injection, Demand };

class BaselineViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DerivedConstraints {
    ConstraintSet set;
    double scale = 1.0;   ///< multiplier of the directional flows at the bound
    bool limited = false; ///< a violation was found below max_scale
    std::vector<double> bound_kw; ///< household flows at the bound
};

/// Household flows at a given directional scale. Flows in `dir` are
/// multiplied by `scale`; the others are left as they are. If no household
/// flows in `dir`, every household receives (scale - 1) kW in that direction.
std::vector<double> scaled_flows(std::span<const double> baseline_kw, FlowDirection dir, double scale);

/// Sensitivity sweep: raise the directional flows in steps of `step_frac`
/// until the first limit violation; the last clean iterate, aggregated per
/// PCC and divided by the household count, becomes the bound for `dir`.
/// The other bound comes from `box`. Without a violation up to `max_scale`
/// the result is `box` itself. Throws BaselineViolation if the unscaled
/// flows already violate a limit.
DerivedConstraints derive_constraints(const RadialFeeder& feeder, std::span<const Connection> connections,
                                      std::span<const double> baseline_kw, FlowDirection dir, double step_frac,
                                      const AverageBox& box, double slot_hours, double max_scale = 10.0);

/// Per-PCC average over all households, kWh per slot.
std::vector<double> pcc_average_kwh(std::span<const Connection> connections, std::span<const double> household_kw,
                                    std::size_t pcc_count, double slot_hours);

/// Greedy phase balancing. Switchable households are visited by descending
/// |net load| (stable) and placed on the phase that minimises the variance
/// of the per-phase sums, ties to the lowest phase. The current assignment
/// is kept if the greedy one is not better.
std::vector<std::size_t> rebalance_phases(std::size_t phase_count, std::span<const std::size_t> current,
                                          const std::vector<bool>& switchable, std::span<const double> net_loads);

/// Population variance of per-phase sums.
double phase_variance(std::size_t phase_count, std::span<const std::size_t> phases, std::span<const double> net_loads);

} // namespace rtc
