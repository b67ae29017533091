#pragma once

// Domain types shared by every module.
//
// Units: energies are kWh per slot (10 minutes by default), prices are
// EUR/kWh, quadratic cost coefficients EUR/kWh^2. Grid flows are positive
// when the household consumes from the grid and negative when it injects.
// Battery flows are positive on discharge and negative on charge.

#include <compare>
#include <cstddef>
#include <vector>

namespace rtc {

struct SlotConfig {
    double slot_duration_min = 10.0;
    double iteration_period_s = 10.0;
    int max_iterations = 60;
    int slots_per_day = 144;

    double slot_hours() const { return slot_duration_min / 60.0; }
    double slot_seconds() const { return slot_duration_min * 60.0; }

    /// Throws ValidationError if a field is non-positive or the iteration
    /// budget does not fit in one slot.
    void validate() const;

    bool operator==(const SlotConfig&) const = default;
};

/// Logical point of common coupling. With phase-level aggregation there is
/// one PCC per feeder phase.
struct PccId {
    std::size_t index = 0;

    auto operator<=>(const PccId&) const = default;
};

struct MarketCommitment {
    double x_hat_m = 0.0; ///< traded with neighbours
    double x_hat_u = 0.0; ///< contracted with the supplier
    double p_m = 0.0;     ///< local market price
    double s_hat = 0.0;   ///< scheduled battery flow
    double x_hat = 0.0;   ///< x_hat_m + x_hat_u

    bool operator==(const MarketCommitment&) const = default;
};

struct BatteryParams {
    double e_max = 0.0;
    double e_min = 0.0;
    double s_max = 0.0;  ///< max discharge per slot (> 0)
    double s_min = 0.0;  ///< max charge per slot (< 0)
    double cyc_up = 0.0; ///< remaining discharge cycling budget (>= 0)
    double cyc_dn = 0.0; ///< remaining charge cycling budget (<= 0)
    double a = 0.0;      ///< quadratic degradation coefficient
    double b = 0.0;      ///< linear degradation coefficient

    bool operator==(const BatteryParams&) const = default;
};

struct PriceParams {
    double p_u = 0.0;    ///< supplier time-of-use price
    double p_f = 0.0;    ///< feed-in tariff
    double a_r = 0.0;    ///< reward deviation coefficient
    double reward = 0.0; ///< slot reward R

    bool operator==(const PriceParams&) const = default;
};

struct HouseholdState {
    int id = 0;
    PccId pcc;
    double r_hat = 0.0;   ///< forecast gap (load - generation)
    double r_tilde = 0.0; ///< forecast error
    double r = 0.0;       ///< updated gap r_hat + r_tilde
    double e0 = 0.0;      ///< battery energy at slot start
    double x_0k = 0.0;    ///< grid energy already exchanged this slot
    double s_0k = 0.0;    ///< battery energy already used this slot
    double x_bar = 0.0;   ///< contracted power, kWh per slot
    MarketCommitment commitment;
    BatteryParams battery;
    PriceParams prices;

    bool operator==(const HouseholdState&) const = default;
};

/// Grid and battery flow of one household for the current slot. The grid
/// flow lives at a single PCC; every other component is zero.
struct Strategy {
    PccId pcc;
    double x = 0.0;
    double s = 0.0;

    /// Dense view of x over `pcc_count` PCCs.
    std::vector<double> grid_vector(std::size_t pcc_count) const;

    bool operator==(const Strategy&) const = default;
};

/// Returns `h` with the forecast error replaced by l_tilde - g_tilde and the
/// gap recomputed as r_hat + r_tilde.
HouseholdState update_gap(HouseholdState h, double l_tilde, double g_tilde);

/// Checks the per-household invariants; throws ValidationError naming the
/// household id and the offending field.
void validate_household(const HouseholdState& h);

} // namespace rtc
