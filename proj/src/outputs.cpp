#include "rtc/outputs.hpp"

#include "rtc/csv.hpp"
#include "rtc/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace rtc {

using nlohmann::json;

namespace {

constexpr double kTol = 1e-9;

std::string flag(bool b) { return b ? "1" : "0"; }

std::string csv_safe(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

std::string direction_name(FlowDirection d) { return d == FlowDirection::Injection ? "injection" : "demand"; }

std::vector<std::string> slot_header(std::size_t n_pcc) {
    std::vector<std::string> h = {"slot",          "in_window",  "rtc_active",       "monitor_trigger",
                                  "baseline_violation", "violation", "baseline_v_dev_frac", "baseline_i_frac",
                                  "v_dev_frac",    "i_frac",     "lf_converged",     "direction",
                                  "derived_scale", "derived_limited", "tightened",   "converged",
                                  "iterations",    "max_regret", "constraint_satisfied", "error"};
    for (std::size_t p = 0; p < n_pcc; ++p) {
        const auto i = std::to_string(p);
        for (const char* name : {"c_lo_", "c_hi_", "u_", "lambda_up_", "lambda_dn_", "avg_"}) h.push_back(name + i);
    }
    return h;
}

json manifest_json(const RunSummary& s, const Scenario& sc, const RunConfig& cfg) {
    std::error_code ec;
    auto scenario = std::filesystem::weakly_canonical(cfg.scenario_path, ec);
    if (ec) scenario = cfg.scenario_path;
    const auto& c = s.base_config;
    json overrides = json::object();
    for (const auto& [k, v] : cfg.overrides) overrides[k] = v;
    return {
        {"mode", to_string(s.mode)},
        {"scenario", scenario.string()},
        {"seed", cfg.seed},
        {"overrides", overrides},
        {"horizon", s.horizon},
        {"households", sc.households.size()},
        {"pcc_count", s.pcc_count},
        {"slots", {{"slot_duration_min", sc.slots.slot_duration_min},
                   {"iteration_period_s", sc.slots.iteration_period_s},
                   {"slots_per_day", sc.slots.slots_per_day}}},
        {"monitoring_window", {{"first_slot", sc.monitoring_window.first_slot},
                               {"end_slot", sc.monitoring_window.end_slot}}},
        {"feeder", {{"slack_voltage", sc.feeder.slack_voltage},
                    {"v_limit_frac", sc.feeder.v_limit_frac},
                    {"monitor_v_frac", sc.feeder.monitor_v_frac},
                    {"monitor_i_frac", sc.feeder.monitor_i_frac},
                    {"transformer_kva", sc.feeder.transformer_kva},
                    {"power_factor", sc.feeder.power_factor},
                    {"nodes", sc.feeder.nodes.size()},
                    {"lines", sc.feeder.lines.size()}}},
        {"constraints", {{"step_frac", s.options.step_frac}, {"max_scale", s.options.max_scale}}},
        {"coordinator", {{"d_scale", c.d_scale},
                         {"step_beta", c.step_beta},
                         {"avg_gamma", c.avg_gamma},
                         {"tol_u", c.tol_u},
                         {"tol_c", c.tol_c},
                         {"max_iterations", c.max_iterations},
                         {"iteration_period_s", c.iteration_period_s},
                         {"slot_duration_s", c.slot_duration_s}}},
        {"summary", {{"rtc_slots", s.rtc_slots()},
                     {"nonconverged_slots", s.nonconverged_slots()},
                     {"error_slots", s.error_slots()},
                     {"violation_slots", s.violation_slots()}}},
        {"files", {files::voltage, files::current, files::households, files::slots, files::signal_trace,
                   files::agent_trace}},
    };
}

bool as_flag(const std::string& v) { return v == "1"; }

} // namespace

void write_outputs(const RunSummary& summary, const Scenario& scenario, const RunConfig& cfg,
                   const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());

    const auto& nodes = scenario.feeder.nodes;

    CsvWriter volt(dir / files::voltage, {"slot", "node", "phase", "voltage_V"});
    CsvWriter curr(dir / files::current, {"slot", "line", "current_A"});
    for (const auto& r : summary.slots) {
        for (std::size_t n = 0; n < r.voltages.size(); ++n) {
            volt.cell(r.slot).cell(n).cell(nodes[n].phase).cell(r.voltages[n]).end_row();
        }
        for (std::size_t l = 0; l < r.currents.size(); ++l) curr.cell(r.slot).cell(l).cell(r.currents[l]).end_row();
    }
    volt.close();
    curr.close();

    CsvWriter hh(dir / files::households,
                 {"slot", "household", "pcc", "phase", "e0", "r", "x", "s", "e_end", "u", "contract_clash",
                  "degradation", "price", "reward", "local_total", "coupling", "total"});
    for (const auto& h : summary.households) {
        hh.cell(h.slot).cell(h.household).cell(h.pcc).cell(h.phase).cell(h.e0).cell(h.r).cell(h.x).cell(h.s);
        hh.cell(h.e_end).cell(h.u).cell(flag(h.contract_clash));
        hh.cell(h.cost.degradation).cell(h.cost.price).cell(h.cost.reward).cell(h.cost.local_total);
        hh.cell(h.cost.coupling).cell(h.cost.total).end_row();
    }
    hh.close();

    const std::size_t n_pcc = summary.pcc_count;
    CsvWriter sl(dir / files::slots, slot_header(n_pcc));
    for (const auto& r : summary.slots) {
        sl.cell(r.slot).cell(flag(r.in_window)).cell(flag(r.rtc_active)).cell(flag(r.monitor_trigger));
        sl.cell(flag(r.baseline_violation)).cell(flag(r.violation)).cell(r.baseline_v_dev).cell(r.baseline_i_frac);
        sl.cell(r.v_dev).cell(r.i_frac).cell(flag(r.lf_converged));
        sl.cell(r.rtc_active ? direction_name(r.direction) : std::string("none"));
        sl.cell(r.derived_scale).cell(flag(r.derived_limited)).cell(flag(r.tightened)).cell(flag(r.converged));
        sl.cell(r.iterations).cell(r.max_regret).cell(flag(r.constraint_satisfied)).cell(csv_safe(r.error));
        for (std::size_t p = 0; p < n_pcc; ++p) {
            sl.cell(r.constraints.c_lo[p]).cell(r.constraints.c_hi[p]).cell(r.signal.u[p]);
            sl.cell(r.signal.lambda_up[p]).cell(r.signal.lambda_dn[p]).cell(r.average[p]);
        }
        sl.end_row();
    }
    sl.close();

    CsvWriter sig(dir / files::signal_trace, {"slot", "iteration", "pcc", "u", "lambda_up", "lambda_dn", "avg_flow"});
    CsvWriter ag(dir / files::agent_trace, {"slot", "iteration", "household", "x_star", "s_setpoint", "x_0k", "s_0k"});
    for (const auto& r : summary.slots) {
        for (const auto& it : r.trace) {
            for (std::size_t p = 0; p < n_pcc; ++p) {
                sig.cell(r.slot).cell(it.iteration).cell(p).cell(it.signal.u[p]).cell(it.signal.lambda_up[p]);
                sig.cell(it.signal.lambda_dn[p]).cell(it.average[p]).end_row();
            }
            for (const auto& a : it.agents) {
                ag.cell(r.slot).cell(it.iteration).cell(a.household).cell(a.x_star).cell(a.s_setpoint);
                ag.cell(a.x_0k).cell(a.s_0k).end_row();
            }
        }
    }
    sig.close();
    ag.close();

    const auto path = dir / files::manifest;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << manifest_json(summary, scenario, cfg).dump(2) << '\n';
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());
}

VerifyReport verify_run(const std::filesystem::path& dir, double regret_tol) {
    VerifyReport rep;
    auto fail = [&](std::size_t slot, const std::string& what) {
        std::ostringstream os;
        os << "slot " << slot << ": " << what;
        rep.failures.push_back(os.str());
    };

    json manifest;
    {
        const auto path = dir / files::manifest;
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open for reading: " + path.string());
        try {
            manifest = json::parse(in);
        } catch (const json::exception& e) {
            throw ParseError(path.string() + ": " + e.what());
        }
    }

    Scenario sc;
    RunOptions opt;
    double iteration_period = 10.0, slot_duration = 600.0;
    try {
        sc = load_scenario(manifest.at("scenario").get<std::string>());
        apply_overrides(manifest.at("overrides").get<std::map<std::string, std::string>>(), sc, opt);
        iteration_period = manifest.at("coordinator").at("iteration_period_s").get<double>();
        slot_duration = manifest.at("coordinator").at("slot_duration_s").get<double>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("manifest: ") + e.what());
    }
    const CoordinatorConfig cfg = run_coordinator_config(sc, opt);
    const std::size_t n = sc.households.size();
    const std::size_t n_pcc = sc.pcc_count();

    // Household rows, indexed [slot][household position].
    const CsvTable hh = read_csv(dir / files::households);
    const std::size_t c_slot = hh.column("slot"), c_pcc = hh.column("pcc"), c_e0 = hh.column("e0"),
                      c_r = hh.column("r"), c_x = hh.column("x"), c_s = hh.column("s"), c_end = hh.column("e_end");
    if (n > 0 && hh.rows.size() % n != 0) throw ParseError("households.csv: row count is not a multiple of households");
    const std::size_t horizon = n == 0 ? 0 : hh.rows.size() / n;
    if (horizon > sc.horizon) throw ParseError("households.csv: more slots than the scenario horizon");

    std::vector<std::vector<HouseholdState>> agents(horizon);
    std::vector<std::vector<Strategy>> strat(horizon);
    for (std::size_t t = 0; t < horizon; ++t) {
        agents[t] = sc.states[t];
        strat[t].resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& row = hh.rows[t * n + i];
            if (static_cast<std::size_t>(parse_int(row[c_slot], "slot")) != t)
                throw ParseError("households.csv: rows out of order");
            auto& a = agents[t][i];
            a.e0 = parse_double(row[c_e0], "e0");
            a.pcc = PccId{static_cast<std::size_t>(parse_int(row[c_pcc], "pcc"))};
            const double r = parse_double(row[c_r], "r");
            const double x = parse_double(row[c_x], "x");
            const double s = parse_double(row[c_s], "s");
            const double e_end = parse_double(row[c_end], "e_end");
            strat[t][i] = {a.pcc, x, s};
            const auto& st = sc.households[i].storage;
            const std::string who = "household " + std::to_string(a.id);
            if (std::abs(r - a.r) > kTol) fail(t, who + ": r differs from the scenario");
            if (std::abs(x + s - r) > kTol) fail(t, who + ": x + s differs from r");
            if (a.e0 < st.e_min - kTol || a.e0 > st.e_max + kTol) fail(t, who + ": e0 outside [e_min, e_max]");
            if (e_end < st.e_min - kTol || e_end > st.e_max + kTol) fail(t, who + ": e_end outside [e_min, e_max]");
            if (std::abs(e_end - (a.e0 - s)) > kTol) fail(t, who + ": e_end differs from e0 - s");
            if (t > 0 && std::abs(a.e0 - (agents[t - 1][i].e0 - strat[t - 1][i].s)) > kTol)
                fail(t, who + ": e0 differs from the previous slot's e0 - s");
            if (t == 0 && std::abs(a.e0 - st.e0) > kTol) fail(t, who + ": e0 differs from the scenario start");
        }
        ++rep.checked_slots;
    }

    // Equilibrium certificate of every coordinated slot.
    const CsvTable sl = read_csv(dir / files::slots);
    for (const auto& row : sl.rows) {
        const auto t = static_cast<std::size_t>(parse_int(row[sl.column("slot")], "slot"));
        if (t >= horizon) throw ParseError("slots.csv: slot beyond households.csv");
        if (!as_flag(row[sl.column("rtc_active")]) || !row[sl.column("error")].empty()) continue;
        ConstraintSet c{std::vector<double>(n_pcc), std::vector<double>(n_pcc)};
        ControlSignal sig = ControlSignal::zero(n_pcc);
        for (std::size_t p = 0; p < n_pcc; ++p) {
            const auto i = std::to_string(p);
            c.c_lo[p] = parse_double(row[sl.column("c_lo_" + i)], "c_lo");
            c.c_hi[p] = parse_double(row[sl.column("c_hi_" + i)], "c_hi");
            sig.u[p] = parse_double(row[sl.column("u_" + i)], "u");
            sig.lambda_up[p] = parse_double(row[sl.column("lambda_up_" + i)], "lambda_up");
            sig.lambda_dn[p] = parse_double(row[sl.column("lambda_dn_" + i)], "lambda_dn");
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double u = parse_double(hh.rows[t * n + i][hh.column("u")], "u");
            if (std::abs(u - sig.u[agents[t][i].pcc.index]) > kTol)
                fail(t, "household " + std::to_string(agents[t][i].id) + ": u differs from the broadcast");
        }
        const auto check = verify_equilibrium(strat[t], sig, agents[t], cfg, c);
        ++rep.checked_rtc_slots;
        rep.max_regret = std::max(rep.max_regret, check.max_regret);
        if (!as_flag(row[sl.column("converged")])) {
            fail(t, "coordination did not converge");
            continue;
        }
        if (check.max_regret > regret_tol) fail(t, "max regret " + format_number(check.max_regret));
        if (!check.constraint_satisfied) fail(t, "average flow outside the coupling constraint");
    }

    // x_0k accumulation along the agent trace.
    const CsvTable ag = read_csv(dir / files::agent_trace);
    const std::size_t a_slot = ag.column("slot"), a_it = ag.column("iteration"), a_h = ag.column("household"),
                      a_x = ag.column("x_star"), a_x0 = ag.column("x_0k");
    std::map<std::pair<long long, long long>, std::pair<long long, double>> last; // (slot, hh) -> (iter, next x_0k)
    for (const auto& row : ag.rows) {
        const auto t = parse_int(row[a_slot], "slot");
        const auto k = parse_int(row[a_it], "iteration");
        const auto id = parse_int(row[a_h], "household");
        const double x_star = parse_double(row[a_x], "x_star");
        const double x0 = parse_double(row[a_x0], "x_0k");
        const auto key = std::make_pair(t, id);
        const auto it = last.find(key);
        if (k == 0 && std::abs(x0) > kTol) fail(static_cast<std::size_t>(t), "trace: x_0k not zero at iteration 0");
        if (it != last.end() && it->second.first == k - 1 && std::abs(x0 - it->second.second) > 1e-9)
            fail(static_cast<std::size_t>(t), "trace: x_0k of household " + std::to_string(id) +
                                                  " does not accumulate at iteration " + std::to_string(k));
        const double remaining = slot_duration - static_cast<double>(k) * iteration_period;
        const double frac = remaining > iteration_period ? iteration_period / remaining : 1.0;
        last[key] = {k, x0 + (x_star - x0) * frac};
    }
    return rep;
}

} // namespace rtc
