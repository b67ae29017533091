#pragma once

// Multi-slot driver: phase switching, baseline load flow, monitoring and,
// when triggered, constraint derivation plus the coordination loop.

#include "rtc/coordinator.hpp"
#include "rtc/costs.hpp"
#include "rtc/powerflow.hpp"
#include "rtc/scenario.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rtc {

enum class Mode { NoControl, DpsOnly, RtcDps };

std::string to_string(Mode m);
/// "no-control", "dps-only" or "rtc+dps"; throws ValidationError otherwise.
Mode parse_mode(const std::string& text);

/// Tunables that are not part of the scenario document.
struct RunOptions {
    double step_frac = 0.02; ///< sensitivity sweep step
    double max_scale = 10.0;
    std::optional<double> d_scale;
    std::optional<double> step_beta;
    std::optional<double> avg_gamma;
    std::optional<double> tol_u;
    std::optional<double> tol_c;
    std::optional<int> max_iterations;
    std::optional<std::size_t> slot_limit; ///< simulate only the first N slots
};

struct RunConfig {
    Mode mode = Mode::NoControl;
    std::filesystem::path scenario_path;
    std::filesystem::path output_dir;
    std::uint64_t seed = 0; ///< recorded; the simulation itself draws no random numbers
    std::map<std::string, std::string> overrides;
};

/// Applies `key=value` overrides. Scenario keys: feeder.v_limit_frac,
/// feeder.monitor_v_frac, feeder.monitor_i_frac, feeder.ampacity_a,
/// feeder.slack_voltage, monitoring.first_slot, monitoring.end_slot.
/// Run keys: coordinator.{d_scale, step_beta, avg_gamma, tol_u, tol_c,
/// max_iterations}, constraints.{step_frac, max_scale}, horizon.slots.
/// Throws ValidationError on unknown keys or bad values.
void apply_overrides(const std::map<std::string, std::string>& overrides, Scenario& s, RunOptions& opt);

struct HouseholdRecord {
    std::size_t slot = 0;
    int household = 0;
    std::size_t pcc = 0;
    std::size_t phase = 0;
    double e0 = 0.0;
    double r = 0.0;
    double x = 0.0;
    double s = 0.0;
    double e_end = 0.0;
    double u = 0.0;
    bool contract_clash = false;
    CostBreakdown cost;
};

struct SlotRecord {
    std::size_t slot = 0;
    bool in_window = false;
    bool rtc_active = false;
    bool monitor_trigger = false; ///< from this slot's baseline flows
    bool baseline_violation = false;
    bool violation = false;       ///< from the applied flows
    double baseline_v_dev = 0.0;
    double baseline_i_frac = 0.0;
    double v_dev = 0.0;
    double i_frac = 0.0;
    bool lf_converged = true;
    // Coordination, meaningful when rtc_active
    FlowDirection direction = FlowDirection::Injection;
    double derived_scale = 1.0;
    bool derived_limited = false;
    bool tightened = false; ///< previous flows already violated; bound found by shrinking
    bool converged = true;
    int iterations = 0;
    double max_regret = 0.0;
    bool constraint_satisfied = true;
    ConstraintSet constraints;
    ControlSignal signal;
    std::vector<double> average;
    std::vector<double> voltages; ///< V, per node
    std::vector<double> currents; ///< A, per line
    std::vector<IterationTrace> trace;
    std::string error; ///< non-empty if a module error was caught in this slot
};

struct RunSummary {
    Mode mode = Mode::NoControl;
    std::size_t horizon = 0;
    std::size_t pcc_count = 0;
    RunOptions options;
    CoordinatorConfig base_config; ///< defaults before per-slot overrides, for the manifest
    std::vector<SlotRecord> slots;
    std::vector<HouseholdRecord> households;
    std::vector<std::string> log;

    int rtc_slots() const;
    int nonconverged_slots() const;
    int error_slots() const;
    int violation_slots() const;
};

/// Coordinator configuration used for every RTC slot of a run.
CoordinatorConfig run_coordinator_config(const Scenario& s, const RunOptions& opt);

RunSummary simulate_horizon(const Scenario& s, Mode mode, const RunOptions& opt = {});

} // namespace rtc
