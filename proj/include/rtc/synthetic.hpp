#pragma once

// Seeded synthetic scenarios: two-peak household load, a shared clear-sky
// PV curve scaled per day, an ex-ante battery schedule and local market
// split computed from day-ahead persistence forecasts, and a three-phase
// radial feeder.

#include "rtc/scenario.hpp"

#include <cstddef>
#include <cstdint>

namespace rtc {

struct SyntheticParams {
    std::size_t households = 50;
    double pv_share = 0.8;
    double battery_share = 0.6;
    std::uint64_t seed = 1;
    std::size_t days = 7;
    std::size_t critical_day = 3; ///< day with the full clear-sky peak

    // Storage
    double battery_kwh = 9.0;
    double battery_kw = 3.0;
    double market_soc_lo = 0.10;
    double market_soc_hi = 0.77;
    double rtc_soc_lo = 0.10;
    double rtc_soc_hi = 0.90;
    double initial_soc = 0.25;
    double battery_a = 0.5;
    double battery_b = 0.01;
    double flex_kwh = 1.0;
    double flex_a = 0.5;

    // Prices, EUR/kWh
    double p_offpeak = 0.15; ///< hours 0..16
    double p_peak = 0.20;    ///< hours 17..23
    double p_feed_in = 0.10;
    double a_r = 0.02;
    double reward_frac = 0.05;

    // Households
    double contract_kva = 12.0;
    double pv_kwp_min = 4.0;
    double pv_kwp_max = 5.0;

    // Feeder
    std::size_t buses_per_phase = 10;
    double span_m = 40.0;
    double r_ohm_per_km = 0.443; ///< 70 mm2 aluminium
    double x_ohm_per_km = 0.08;
    double ampacity_a = 200.0;
    double transformer_kva = 160.0;
};

/// Shape of the shared PV curve at a given hour, in [0, 1].
double clear_sky_shape(double hour);

/// Three phases, each a chain of `buses_per_phase` spans from its slack
/// node (bus 0, carrying the phase's PCC).
FeederModel synthetic_feeder(const SyntheticParams& p);

/// Deterministic for a given parameter set; the result is validated.
Scenario generate_synthetic_scenario(const SyntheticParams& p);

} // namespace rtc
