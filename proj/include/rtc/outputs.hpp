#pragma once

// Run artifacts: voltage and current surfaces, per-household flows and
// costs, per-slot status, coordinator traces and a manifest; plus the
// offline re-check used by `rtcsim verify`.

#include "rtc/scenario.hpp"
#include "rtc/simulation.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace rtc {

/// File names inside a run directory.
namespace files {
inline constexpr const char* voltage = "voltage.csv";
inline constexpr const char* current = "current.csv";
inline constexpr const char* households = "households.csv";
inline constexpr const char* slots = "slots.csv";
inline constexpr const char* signal_trace = "coordinator_trace.csv";
inline constexpr const char* agent_trace = "agent_trace.csv";
inline constexpr const char* manifest = "manifest.json";
} // namespace files

/// Writes every artifact of `summary` into `dir` (created if needed).
/// Throws IoError naming the path on failure.
void write_outputs(const RunSummary& summary, const Scenario& scenario, const RunConfig& cfg,
                   const std::filesystem::path& dir);

struct VerifyReport {
    std::vector<std::string> failures;
    int checked_slots = 0;
    int checked_rtc_slots = 0;
    double max_regret = 0.0;

    bool ok() const { return failures.empty(); }
};

/// Reloads the scenario named in the manifest and re-checks, from the CSVs:
/// battery continuity and bounds, x + s = r, the equilibrium certificate of
/// every RTC slot, and the x_0k accumulation recorded in the agent trace.
/// Throws IoError / ParseError if the run directory is unreadable.
VerifyReport verify_run(const std::filesystem::path& dir, double regret_tol = 1e-4);

} // namespace rtc
