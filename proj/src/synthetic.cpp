#include "rtc/synthetic.hpp"

#include "rtc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace rtc {

namespace {

constexpr double kPi = 3.14159265358979323846;

double round6(double v) { return std::round(v * 1e6) / 1e6; }

double bump(double hour, double centre, double width) {
    const double z = (hour - centre) / width;
    return std::exp(-z * z);
}

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

struct Profiles {
    std::vector<double> load; // kWh per slot, warm-up day included
    std::vector<double> pv;
};

} // namespace

double clear_sky_shape(double hour) {
    constexpr double sunrise = 7.0;
    constexpr double sunset = 17.0;
    if (hour <= sunrise || hour >= sunset) return 0.0;
    return std::pow(std::sin(kPi * (hour - sunrise) / (sunset - sunrise)), 1.5);
}

FeederModel synthetic_feeder(const SyntheticParams& p) {
    FeederModel f;
    f.transformer_kva = p.transformer_kva;
    const std::size_t per_phase = p.buses_per_phase + 1;
    for (std::size_t ph = 0; ph < 3; ++ph) {
        for (std::size_t bus = 0; bus < per_phase; ++bus) {
            FeederNode n;
            n.id = static_cast<int>(ph * per_phase + bus);
            n.phase = ph;
            n.bus = bus;
            n.parent = bus == 0 ? -1 : n.id - 1;
            if (bus == 0) n.pcc = PccId{ph};
            f.nodes.push_back(n);
            if (bus > 0) {
                const double km = p.span_m / 1000.0;
                f.lines.push_back({n.id - 1, n.id, p.r_ohm_per_km * km, p.x_ohm_per_km * km, p.ampacity_a});
            }
        }
    }
    return f;
}

Scenario generate_synthetic_scenario(const SyntheticParams& p) {
    if (p.pv_share < 0.0 || p.pv_share > 1.0 || p.battery_share < 0.0 || p.battery_share > 1.0)
        throw ValidationError("synthetic: shares must lie in [0, 1]");
    if (p.households == 0 || p.days == 0) throw ValidationError("synthetic: need households and days");
    if (p.buses_per_phase == 0) throw ValidationError("synthetic: need at least one bus per phase");

    std::mt19937_64 rng(p.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    Scenario s;
    s.slots = SlotConfig{};
    const auto per_day = static_cast<std::size_t>(s.slots.slots_per_day);
    const double slot_h = s.slots.slot_hours();
    const std::size_t total_days = p.days + 1; // day 0 only feeds the first forecasts
    const std::size_t total = total_days * per_day;
    s.horizon = p.days * per_day;
    s.tou_schedule = {{0.0, 17.0, p.p_offpeak}, {17.0, 24.0, p.p_peak}};
    s.feeder = synthetic_feeder(p);

    // Shared PV curve, kW per kWp.
    std::vector<double> day_factor(total_days);
    for (std::size_t d = 0; d < total_days; ++d) day_factor[d] = uniform(0.35, 0.70);
    if (p.critical_day < p.days) day_factor[p.critical_day + 1] = 1.0;
    std::vector<double> pv_unit(total);
    double cloud = 0.0;
    for (std::size_t t = 0; t < total; ++t) {
        const std::size_t d = t / per_day;
        const double hour = static_cast<double>(t % per_day) * slot_h;
        cloud = std::clamp(cloud + uniform(-0.08, 0.08), 0.0, 0.4);
        const bool clear = p.critical_day < p.days && d == p.critical_day + 1;
        pv_unit[t] = clear_sky_shape(hour) * day_factor[d] * (clear ? 1.0 : 1.0 - cloud);
    }

    const auto pv_order = shuffled(p.households, rng);
    const auto bat_order = shuffled(p.households, rng);
    const auto n_pv = static_cast<std::size_t>(std::llround(p.pv_share * static_cast<double>(p.households)));
    const auto n_bat = static_cast<std::size_t>(std::llround(p.battery_share * static_cast<double>(p.households)));
    std::vector<bool> has_pv(p.households, false), has_bat(p.households, false);
    for (std::size_t i = 0; i < n_pv; ++i) has_pv[pv_order[i]] = true;
    for (std::size_t i = 0; i < n_bat; ++i) has_bat[bat_order[i]] = true;

    // Uneven initial phase split, so rebalancing has something to do.
    const std::discrete_distribution<std::size_t> phase_pick({0.45, 0.35, 0.20});

    std::vector<Profiles> profiles(p.households);
    for (std::size_t i = 0; i < p.households; ++i) {
        HouseholdSpec h;
        h.id = static_cast<int>(i + 1);
        h.bus = 1 + static_cast<std::size_t>(unit(rng) * static_cast<double>(p.buses_per_phase));
        h.bus = std::min(h.bus, p.buses_per_phase);
        auto pick = phase_pick;
        h.phase = pick(rng);
        h.switchable = true;
        h.x_bar = p.contract_kva * slot_h;
        h.prices = {p.p_feed_in, p.a_r, p.reward_frac};

        if (has_bat[i]) {
            h.storage = {FlexKind::Battery,
                         p.rtc_soc_lo * p.battery_kwh,
                         p.rtc_soc_hi * p.battery_kwh,
                         -p.battery_kw * slot_h,
                         p.battery_kw * slot_h,
                         p.battery_a,
                         p.battery_b,
                         p.initial_soc * p.battery_kwh,
                         (p.rtc_soc_hi - p.rtc_soc_lo) * p.battery_kwh};
        } else {
            h.storage = {FlexKind::FlexibleLoad, 0.0, p.flex_kwh, -0.5 * p.flex_kwh, 0.5 * p.flex_kwh,
                         p.flex_a, 0.0, 0.5 * p.flex_kwh, p.flex_kwh};
        }

        const double base = uniform(0.20, 0.45);
        const double morning = uniform(0.4, 1.2);
        const double evening = uniform(0.6, 1.8);
        const double kwp = has_pv[i] ? uniform(p.pv_kwp_min, p.pv_kwp_max) : 0.0;
        auto& pr = profiles[i];
        pr.load.resize(total);
        pr.pv.resize(total);
        double day_scale = 1.0;
        for (std::size_t t = 0; t < total; ++t) {
            if (t % per_day == 0) day_scale = uniform(0.85, 1.15);
            const double hour = static_cast<double>(t % per_day) * slot_h;
            const double kw = (base + morning * bump(hour, 7.5, 1.0) + evening * bump(hour, 19.5, 1.5)) * day_scale *
                              uniform(0.8, 1.2);
            pr.load[t] = round6(kw * slot_h);
            pr.pv[t] = round6(kwp * pv_unit[t] * slot_h);
        }
        s.households.push_back(std::move(h));
    }

    // Ex-ante schedule on persistence forecasts.
    for (std::size_t i = 0; i < p.households; ++i) {
        auto& h = s.households[i];
        const auto& pr = profiles[i];
        auto& c = h.commitments;
        for (auto* v : {&c.l_hat, &c.g_hat, &c.x_hat_m, &c.x_hat_u, &c.x_hat, &c.p_m, &c.s_hat}) v->assign(s.horizon, 0.0);
        h.load_kwh.assign(pr.load.begin() + static_cast<long>(per_day), pr.load.end());
        h.pv_kwh.assign(pr.pv.begin() + static_cast<long>(per_day), pr.pv.end());
        for (std::size_t t = 0; t < s.horizon; ++t) {
            c.l_hat[t] = pr.load[t];
            c.g_hat[t] = pr.pv[t];
        }
        if (h.storage.kind != FlexKind::Battery) continue;

        const double lo = p.market_soc_lo * p.battery_kwh;
        const double hi = p.market_soc_hi * p.battery_kwh;
        const double rate = p.battery_kw * slot_h;
        double e = h.storage.e0;
        for (std::size_t start = 0; start < s.horizon; start += per_day) {
            double day_g = 0.0;
            for (std::size_t t = start; t < start + per_day; ++t) day_g += c.g_hat[t];
            for (std::size_t t = start; t < start + per_day; ++t) {
                const double gap = c.l_hat[t] - c.g_hat[t];
                double sh = 0.0;
                if (gap < 0.0 && day_g > 0.0) {
                    const double spread = 1.5 * (hi - lo) * c.g_hat[t] / day_g;
                    sh = -std::min({-gap, rate, std::max(0.0, hi - e), spread});
                } else if (gap > 0.0) {
                    sh = std::min({gap, rate, std::max(0.0, e - lo)});
                }
                sh = round6(sh);
                c.s_hat[t] = sh;
                e -= sh;
            }
        }
    }

    // Local market: each slot, matched volume min(total demand, total
    // injection) shared pro rata on both sides, at the mid price.
    for (std::size_t t = 0; t < s.horizon; ++t) {
        double demand = 0.0, injection = 0.0;
        for (auto& h : s.households) {
            auto& c = h.commitments;
            c.x_hat[t] = c.l_hat[t] - c.g_hat[t] - c.s_hat[t];
            if (c.x_hat[t] > 0.0) demand += c.x_hat[t];
            else injection -= c.x_hat[t];
        }
        const double matched = std::min(demand, injection);
        const double p_u = s.supplier_price(t);
        for (auto& h : s.households) {
            auto& c = h.commitments;
            double share = 0.0;
            if (c.x_hat[t] > 0.0 && demand > 0.0) share = matched / demand;
            if (c.x_hat[t] < 0.0 && injection > 0.0) share = matched / injection;
            c.x_hat_m[t] = round6(c.x_hat[t] * share);
            c.x_hat_u[t] = c.x_hat[t] - c.x_hat_m[t];
            c.p_m[t] = 0.5 * (h.prices.p_f + p_u);
        }
    }

    expand_states(s);
    return s;
}

} // namespace rtc
