#pragma once

// Scenario document: static household parameters, ex-ante market
// commitments, metered profiles and the feeder, expanded at ingestion into
// one validated HouseholdState per household and slot.

#include "rtc/model.hpp"
#include "rtc/powerflow.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace rtc {

enum class FlexKind { Battery, FlexibleLoad };

struct StorageSpec {
    FlexKind kind = FlexKind::Battery;
    double e_min = 0.0;
    double e_max = 0.0;
    double s_min = 0.0;
    double s_max = 0.0;
    double a = 0.0;
    double b = 0.0;
    double e0 = 0.0;              ///< energy at the start of the horizon
    double extra_cycle_kwh = 0.0; ///< daily budget beyond the market schedule

    bool operator==(const StorageSpec&) const = default;
};

struct PriceSpec {
    double p_f = 0.10;
    double a_r = 0.02;
    double reward_frac = 0.05; ///< R = reward_frac * |x_hat_m| * P_m

    bool operator==(const PriceSpec&) const = default;
};

/// Per-slot ex-ante data, one entry per slot of the horizon.
struct CommitmentSeries {
    std::vector<double> l_hat; ///< load forecast
    std::vector<double> g_hat; ///< generation forecast
    std::vector<double> x_hat_m;
    std::vector<double> x_hat_u;
    std::vector<double> x_hat;
    std::vector<double> p_m;
    std::vector<double> s_hat;

    bool operator==(const CommitmentSeries&) const = default;
};

struct HouseholdSpec {
    int id = 0;
    std::size_t bus = 0;
    std::size_t phase = 0;
    bool switchable = true;
    double x_bar = 0.0; ///< kWh per slot
    StorageSpec storage;
    PriceSpec prices;
    CommitmentSeries commitments;
    std::vector<double> load_kwh; ///< metered, per slot
    std::vector<double> pv_kwh;   ///< metered, per slot

    bool operator==(const HouseholdSpec&) const = default;
};

struct TouBand {
    double from_hour = 0.0;
    double to_hour = 24.0;
    double p_u = 0.15;

    bool operator==(const TouBand&) const = default;
};

/// Slots of the day [first_slot, end_slot) watched for limit risks.
struct MonitoringWindow {
    int first_slot = 60;
    int end_slot = 84;

    bool contains(int slot_of_day) const { return slot_of_day >= first_slot && slot_of_day < end_slot; }
    bool operator==(const MonitoringWindow&) const = default;
};

struct Scenario {
    SlotConfig slots;
    std::size_t horizon = 0;
    std::vector<TouBand> tou_schedule;
    MonitoringWindow monitoring_window;
    FeederModel feeder;
    std::vector<HouseholdSpec> households;
    std::string profiles_file = "profiles.csv"; ///< relative to the scenario document

    /// states[slot][household], built by `expand_states`. e0 is the value
    /// at the start of the horizon; the simulation overrides it.
    std::vector<std::vector<HouseholdState>> states;

    double supplier_price(std::size_t slot) const;
    std::size_t pcc_count() const;

    bool operator==(const Scenario&) const = default;
};

/// PCC of a household: the nearest ancestor of its node that carries a PCC.
PccId pcc_of(const RadialFeeder& feeder, std::size_t bus, std::size_t phase);

/// Daily extra cycle split across slots in proportion to the mean
/// generation forecast, normalised so each day's shares sum to one.
std::vector<double> cycling_shares(const Scenario& s);

/// Validates the static parts and rebuilds `states`. Throws ValidationError.
void expand_states(Scenario& s);

/// Parses and validates a scenario document and its profiles CSV.
/// Throws ParseError, ValidationError or IoError.
Scenario load_scenario(const std::filesystem::path& path);

/// Writes the document and, next to it, the profiles CSV named by
/// `s.profiles_file`. Throws IoError.
void save_scenario(const Scenario& s, const std::filesystem::path& path);

} // namespace rtc
