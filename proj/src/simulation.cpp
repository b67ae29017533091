#include "rtc/simulation.hpp"

#include "rtc/csv.hpp"
#include "rtc/errors.hpp"
#include "rtc/response.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace rtc {

namespace {

double to_double(const std::string& key, const std::string& v) { return parse_double(v, key); }

int to_int(const std::string& key, const std::string& v) { return static_cast<int>(parse_int(v, key)); }

/// Bound from shrinking the directional flows until they stop violating.
ConstraintSet tightened_constraints(const RadialFeeder& feeder, std::span<const Connection> conns,
                                    std::span<const double> prev_kw, FlowDirection dir, double step,
                                    const AverageBox& box, double slot_h) {
    double scale = 1.0;
    std::vector<double> kw(prev_kw.begin(), prev_kw.end());
    while (scale > 0.0) {
        scale = std::max(0.0, scale - step);
        kw = scaled_flows(prev_kw, dir, scale);
        const auto lf = solve_load_flow(feeder, node_loads(feeder, conns, kw));
        if (!check_limits(lf, feeder.model()).violation) break;
    }
    ConstraintSet c{box.lo, box.hi};
    const auto bound = pcc_average_kwh(conns, kw, box.lo.size(), slot_h);
    if (dir == FlowDirection::Injection) c.c_lo = bound;
    else c.c_hi = bound;
    return c;
}

std::string slot_message(std::size_t slot, const std::string& what) {
    std::ostringstream os;
    os << "slot " << slot << ": " << what;
    return os.str();
}

} // namespace

std::string to_string(Mode m) {
    switch (m) {
    case Mode::NoControl: return "no-control";
    case Mode::DpsOnly: return "dps-only";
    case Mode::RtcDps: return "rtc+dps";
    }
    return "?";
}

Mode parse_mode(const std::string& text) {
    if (text == "no-control") return Mode::NoControl;
    if (text == "dps-only") return Mode::DpsOnly;
    if (text == "rtc+dps") return Mode::RtcDps;
    throw ValidationError("unknown mode '" + text + "' (expected no-control, dps-only or rtc+dps)");
}

void apply_overrides(const std::map<std::string, std::string>& overrides, Scenario& s, RunOptions& opt) {
    bool feeder_changed = false;
    for (const auto& [key, value] : overrides) {
        try {
            if (key == "feeder.v_limit_frac") s.feeder.v_limit_frac = to_double(key, value);
            else if (key == "feeder.monitor_v_frac") s.feeder.monitor_v_frac = to_double(key, value);
            else if (key == "feeder.monitor_i_frac") s.feeder.monitor_i_frac = to_double(key, value);
            else if (key == "feeder.slack_voltage") s.feeder.slack_voltage = to_double(key, value);
            else if (key == "feeder.ampacity_a") {
                const double a = to_double(key, value);
                for (auto& l : s.feeder.lines) l.ampacity = a;
            } else if (key == "monitoring.first_slot") s.monitoring_window.first_slot = to_int(key, value);
            else if (key == "monitoring.end_slot") s.monitoring_window.end_slot = to_int(key, value);
            else if (key == "coordinator.d_scale") opt.d_scale = to_double(key, value);
            else if (key == "coordinator.step_beta") opt.step_beta = to_double(key, value);
            else if (key == "coordinator.avg_gamma") opt.avg_gamma = to_double(key, value);
            else if (key == "coordinator.tol_u") opt.tol_u = to_double(key, value);
            else if (key == "coordinator.tol_c") opt.tol_c = to_double(key, value);
            else if (key == "coordinator.max_iterations") opt.max_iterations = to_int(key, value);
            else if (key == "constraints.step_frac") opt.step_frac = to_double(key, value);
            else if (key == "constraints.max_scale") opt.max_scale = to_double(key, value);
            else if (key == "horizon.slots") {
                const auto n = parse_int(value, key);
                if (n < 0) throw ValidationError("horizon.slots must be >= 0");
                opt.slot_limit = static_cast<std::size_t>(n);
            } else {
                throw ValidationError("unknown override '" + key + "'");
            }
        } catch (const ParseError& e) {
            throw ValidationError(e.what());
        }
        if (key.rfind("feeder.", 0) == 0) feeder_changed = true;
    }
    if (feeder_changed) {
        try {
            RadialFeeder check(s.feeder);
        } catch (const TopologyError& e) {
            throw ValidationError(e.what());
        }
    }
    if (s.monitoring_window.first_slot < 0 || s.monitoring_window.end_slot < s.monitoring_window.first_slot ||
        s.monitoring_window.end_slot > s.slots.slots_per_day)
        throw ValidationError("monitoring window outside the day");
    if (!(opt.step_frac > 0.0)) throw ValidationError("constraints.step_frac must be positive");
    if (!(opt.max_scale >= 1.0)) throw ValidationError("constraints.max_scale must be >= 1");
    run_coordinator_config(s, opt).validate();
}

int RunSummary::rtc_slots() const {
    return static_cast<int>(std::count_if(slots.begin(), slots.end(), [](const auto& r) { return r.rtc_active; }));
}

int RunSummary::nonconverged_slots() const {
    return static_cast<int>(
        std::count_if(slots.begin(), slots.end(), [](const auto& r) { return r.rtc_active && !r.converged; }));
}

int RunSummary::error_slots() const {
    return static_cast<int>(std::count_if(slots.begin(), slots.end(), [](const auto& r) { return !r.error.empty(); }));
}

int RunSummary::violation_slots() const {
    return static_cast<int>(std::count_if(slots.begin(), slots.end(), [](const auto& r) { return r.violation; }));
}

CoordinatorConfig run_coordinator_config(const Scenario& s, const RunOptions& opt) {
    const std::size_t n_pcc = s.pcc_count();
    CoordinatorConfig cfg = s.states.empty()
                                ? CoordinatorConfig{std::vector<double>(n_pcc, 0.01)}
                                : default_coordinator_config(s.states.front(), n_pcc, s.slots);
    if (opt.d_scale) cfg.d_scale.assign(n_pcc, *opt.d_scale);
    if (opt.step_beta) cfg.step_beta = *opt.step_beta;
    if (opt.avg_gamma) cfg.avg_gamma = *opt.avg_gamma;
    if (opt.tol_u) cfg.tol_u = *opt.tol_u;
    if (opt.tol_c) cfg.tol_c = *opt.tol_c;
    if (opt.max_iterations) cfg.max_iterations = *opt.max_iterations;
    return cfg;
}

RunSummary simulate_horizon(const Scenario& s, Mode mode, const RunOptions& opt) {
    const RadialFeeder feeder(s.feeder);
    const std::size_t n = s.households.size();
    const std::size_t n_pcc = s.pcc_count();
    const double slot_h = s.slots.slot_hours();
    const auto per_day = static_cast<std::size_t>(s.slots.slots_per_day);
    const std::size_t horizon = std::min(s.horizon, opt.slot_limit.value_or(s.horizon));

    RunSummary out;
    out.mode = mode;
    out.horizon = horizon;
    out.pcc_count = n_pcc;
    out.options = opt;
    out.base_config = run_coordinator_config(s, opt);
    out.slots.reserve(horizon);
    out.households.reserve(horizon * n);

    std::vector<double> energy(n);
    std::vector<std::size_t> phases(n);
    std::vector<bool> switchable(n);
    for (std::size_t i = 0; i < n; ++i) {
        energy[i] = s.households[i].storage.e0;
        phases[i] = s.households[i].phase;
        switchable[i] = s.households[i].switchable;
    }
    std::vector<double> prev_kw(n, 0.0);
    bool prev_trigger = false;

    for (std::size_t t = 0; t < horizon; ++t) {
        SlotRecord rec;
        rec.slot = t;
        rec.in_window = s.monitoring_window.contains(static_cast<int>(t % per_day));

        std::vector<HouseholdState> agents = s.states[t];
        for (std::size_t i = 0; i < n; ++i) agents[i].e0 = energy[i];

        if (mode != Mode::NoControl) {
            std::vector<double> net_kw(n);
            for (std::size_t i = 0; i < n; ++i) net_kw[i] = agents[i].r / slot_h;
            phases = rebalance_phases(feeder.phase_count(), phases, switchable, net_kw);
        }
        std::vector<Connection> conns(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& spec = s.households[i];
            conns[i] = {feeder.node_at(spec.bus, phases[i]), pcc_of(feeder, spec.bus, phases[i])};
            agents[i].pcc = conns[i].pcc;
        }

        // Unconstrained flows: every agent's best response to a zero signal.
        std::vector<Strategy> baseline(n);
        std::vector<double> baseline_kw(n);
        for (std::size_t i = 0; i < n; ++i) {
            baseline[i] = best_response(agents[i], 0.0);
            baseline_kw[i] = baseline[i].x / slot_h;
        }
        const auto base_lf = solve_load_flow(feeder, node_loads(feeder, conns, baseline_kw));
        const auto base_status = check_limits(base_lf, s.feeder);
        rec.baseline_v_dev = base_lf.max_v_dev_frac;
        rec.baseline_i_frac = base_lf.max_i_frac_of_ampacity;
        rec.baseline_violation = base_status.violation;
        rec.monitor_trigger = rec.in_window && base_status.monitor_trigger;

        std::vector<Strategy> applied = baseline;
        std::vector<double> u(n_pcc, 0.0);
        rec.signal = ControlSignal::zero(n_pcc);
        rec.constraints = ConstraintSet::wide_open(n_pcc);

        if (mode == Mode::RtcDps && t > 0 && prev_trigger) {
            rec.rtc_active = true;
            try {
                const double net = std::accumulate(prev_kw.begin(), prev_kw.end(), 0.0);
                rec.direction = net < 0.0 ? FlowDirection::Injection : FlowDirection::Demand;
                const AverageBox box = attainable_box(agents, n_pcc);
                ConstraintSet c;
                try {
                    const auto derived = derive_constraints(feeder, conns, prev_kw, rec.direction, opt.step_frac, box,
                                                            slot_h, opt.max_scale);
                    c = derived.set;
                    rec.derived_scale = derived.scale;
                    rec.derived_limited = derived.limited;
                } catch (const BaselineViolation&) {
                    c = tightened_constraints(feeder, conns, prev_kw, rec.direction, opt.step_frac, box, slot_h);
                    rec.tightened = true;
                    rec.derived_limited = true;
                }
                rec.constraints = clamp_to_box(c, box);

                const CoordinatorConfig cfg = out.base_config;
                SlotRun run = run_slot(agents, rec.constraints, cfg);
                const auto check = verify_equilibrium(run.strategies, run.signal, agents, cfg, rec.constraints);
                rec.converged = run.converged;
                rec.iterations = run.iterations;
                rec.max_regret = check.max_regret;
                rec.constraint_satisfied = check.constraint_satisfied;
                rec.signal = run.signal;
                rec.average = run.average;
                rec.trace = std::move(run.trace);
                applied = std::move(run.strategies);
                u = rec.signal.u;
                if (!rec.converged)
                    out.log.push_back(slot_message(t, "coordination did not converge in " +
                                                          std::to_string(rec.iterations) + " iterations"));
            } catch (const std::exception& e) {
                rec.error = e.what();
                out.log.push_back(slot_message(t, e.what()));
                applied = baseline;
                u.assign(n_pcc, 0.0);
            }
        }
        if (rec.average.empty()) rec.average = aggregate(applied, n, n_pcc);

        std::vector<double> applied_kw(n);
        for (std::size_t i = 0; i < n; ++i) applied_kw[i] = applied[i].x / slot_h;
        const auto lf = solve_load_flow(feeder, node_loads(feeder, conns, applied_kw));
        const auto status = check_limits(lf, s.feeder);
        rec.violation = status.violation;
        rec.v_dev = lf.max_v_dev_frac;
        rec.i_frac = lf.max_i_frac_of_ampacity;
        rec.lf_converged = lf.converged;
        rec.voltages = lf.voltage_magnitudes();
        rec.currents = lf.line_currents;
        if (!lf.converged) out.log.push_back(slot_message(t, "load flow did not converge"));

        for (std::size_t i = 0; i < n; ++i) {
            const auto& h = agents[i];
            HouseholdRecord hr;
            hr.slot = t;
            hr.household = h.id;
            hr.pcc = h.pcc.index;
            hr.phase = phases[i];
            hr.e0 = h.e0;
            hr.r = h.r;
            hr.x = applied[i].x;
            hr.s = applied[i].s;
            hr.e_end = h.e0 - applied[i].s;
            hr.u = u[h.pcc.index];
            hr.contract_clash = feasible_interval(h).contract_clash;
            hr.cost = coupled_cost(h, hr.x, hr.u);
            out.households.push_back(hr);
            // Round-off only; the feasible interval keeps e_end inside the band.
            const auto& st = s.households[i].storage;
            energy[i] = std::clamp(hr.e_end, st.e_min, st.e_max);
        }

        prev_kw = std::move(applied_kw);
        prev_trigger = rec.monitor_trigger;
        out.slots.push_back(std::move(rec));
    }
    return out;
}

} // namespace rtc
