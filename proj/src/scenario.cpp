#include "rtc/scenario.hpp"

#include "rtc/csv.hpp"
#include "rtc/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace rtc {

using nlohmann::json;

namespace {

constexpr double kBalanceTol = 1e-9;

const char* kind_name(FlexKind k) { return k == FlexKind::Battery ? "battery" : "flexible_load"; }

FlexKind parse_kind(const std::string& s) {
    if (s == "battery") return FlexKind::Battery;
    if (s == "flexible_load") return FlexKind::FlexibleLoad;
    throw ParseError("unknown storage kind '" + s + "'");
}

[[noreturn]] void invalid(int id, std::size_t slot, const std::string& what) {
    std::ostringstream os;
    os << "household " << id << ", slot " << slot << ": " << what;
    throw ValidationError(os.str());
}

json feeder_to_json(const FeederModel& f) {
    json nodes = json::array();
    for (const auto& n : f.nodes) {
        json j{{"id", n.id}, {"phase", n.phase}, {"parent", n.parent}, {"bus", n.bus}};
        if (n.pcc) j["pcc"] = n.pcc->index;
        nodes.push_back(std::move(j));
    }
    json lines = json::array();
    for (const auto& l : f.lines) {
        lines.push_back({{"from", l.from}, {"to", l.to}, {"r_ohm", l.resistance}, {"x_ohm", l.reactance},
                         {"ampacity_a", l.ampacity}});
    }
    return {{"slack_voltage", f.slack_voltage}, {"v_limit_frac", f.v_limit_frac},
            {"monitor_v_frac", f.monitor_v_frac}, {"monitor_i_frac", f.monitor_i_frac},
            {"transformer_kva", f.transformer_kva}, {"power_factor", f.power_factor},
            {"nodes", std::move(nodes)}, {"lines", std::move(lines)}};
}

FeederModel feeder_from_json(const json& j) {
    FeederModel f;
    f.slack_voltage = j.value("slack_voltage", f.slack_voltage);
    f.v_limit_frac = j.value("v_limit_frac", f.v_limit_frac);
    f.monitor_v_frac = j.value("monitor_v_frac", f.monitor_v_frac);
    f.monitor_i_frac = j.value("monitor_i_frac", f.monitor_i_frac);
    f.transformer_kva = j.value("transformer_kva", f.transformer_kva);
    f.power_factor = j.value("power_factor", f.power_factor);
    for (const auto& n : j.at("nodes")) {
        FeederNode node;
        node.id = n.at("id").get<int>();
        node.phase = n.at("phase").get<std::size_t>();
        node.parent = n.at("parent").get<int>();
        node.bus = n.at("bus").get<std::size_t>();
        if (n.contains("pcc")) node.pcc = PccId{n.at("pcc").get<std::size_t>()};
        f.nodes.push_back(node);
    }
    for (const auto& l : j.at("lines")) {
        f.lines.push_back({l.at("from").get<int>(), l.at("to").get<int>(), l.at("r_ohm").get<double>(),
                           l.at("x_ohm").get<double>(), l.value("ampacity_a", 200.0)});
    }
    return f;
}

json household_to_json(const HouseholdSpec& h) {
    const auto& st = h.storage;
    const auto& c = h.commitments;
    return {{"id", h.id},
            {"bus", h.bus},
            {"phase", h.phase},
            {"switchable", h.switchable},
            {"x_bar", h.x_bar},
            {"battery",
             {{"kind", kind_name(st.kind)}, {"e_min", st.e_min}, {"e_max", st.e_max}, {"s_min", st.s_min},
              {"s_max", st.s_max}, {"a", st.a}, {"b", st.b}, {"e0", st.e0}, {"extra_cycle_kwh", st.extra_cycle_kwh}}},
            {"prices", {{"p_f", h.prices.p_f}, {"a_r", h.prices.a_r}, {"reward_frac", h.prices.reward_frac}}},
            {"commitments",
             {{"l_hat", c.l_hat}, {"g_hat", c.g_hat}, {"x_hat_m", c.x_hat_m}, {"x_hat_u", c.x_hat_u},
              {"x_hat", c.x_hat}, {"p_m", c.p_m}, {"s_hat", c.s_hat}}}};
}

HouseholdSpec household_from_json(const json& j) {
    HouseholdSpec h;
    h.id = j.at("id").get<int>();
    h.bus = j.at("bus").get<std::size_t>();
    h.phase = j.at("phase").get<std::size_t>();
    h.switchable = j.value("switchable", true);
    h.x_bar = j.at("x_bar").get<double>();
    const auto& b = j.at("battery");
    h.storage.kind = parse_kind(b.value("kind", std::string("battery")));
    h.storage.e_min = b.at("e_min").get<double>();
    h.storage.e_max = b.at("e_max").get<double>();
    h.storage.s_min = b.at("s_min").get<double>();
    h.storage.s_max = b.at("s_max").get<double>();
    h.storage.a = b.at("a").get<double>();
    h.storage.b = b.at("b").get<double>();
    h.storage.e0 = b.at("e0").get<double>();
    h.storage.extra_cycle_kwh = b.at("extra_cycle_kwh").get<double>();
    const auto& p = j.at("prices");
    h.prices.p_f = p.at("p_f").get<double>();
    h.prices.a_r = p.at("a_r").get<double>();
    h.prices.reward_frac = p.value("reward_frac", 0.05);
    const auto& c = j.at("commitments");
    h.commitments.l_hat = c.at("l_hat").get<std::vector<double>>();
    h.commitments.g_hat = c.at("g_hat").get<std::vector<double>>();
    h.commitments.x_hat_m = c.at("x_hat_m").get<std::vector<double>>();
    h.commitments.x_hat_u = c.at("x_hat_u").get<std::vector<double>>();
    h.commitments.x_hat = c.at("x_hat").get<std::vector<double>>();
    h.commitments.p_m = c.at("p_m").get<std::vector<double>>();
    h.commitments.s_hat = c.at("s_hat").get<std::vector<double>>();
    return h;
}

void read_profiles(Scenario& s, const std::filesystem::path& csv_path) {
    const CsvTable t = read_csv(csv_path);
    const std::size_t c_slot = t.column("slot");
    const std::size_t c_house = t.column("household");
    const std::size_t c_load = t.column("load_kwh");
    const std::size_t c_pv = t.column("pv_kwh");

    std::vector<std::vector<char>> seen(s.households.size(), std::vector<char>(s.horizon, 0));
    for (auto& h : s.households) {
        h.load_kwh.assign(s.horizon, 0.0);
        h.pv_kwh.assign(s.horizon, 0.0);
    }
    std::map<int, std::size_t> index;
    for (std::size_t i = 0; i < s.households.size(); ++i) index[s.households[i].id] = i;

    for (const auto& row : t.rows) {
        const auto slot = parse_int(row[c_slot], "profiles.slot");
        const auto id = parse_int(row[c_house], "profiles.household");
        const auto it = index.find(static_cast<int>(id));
        if (it == index.end()) throw ValidationError("profiles: unknown household " + std::to_string(id));
        if (slot < 0 || static_cast<std::size_t>(slot) >= s.horizon) continue;
        auto& h = s.households[it->second];
        h.load_kwh[static_cast<std::size_t>(slot)] = parse_double(row[c_load], "profiles.load_kwh");
        h.pv_kwh[static_cast<std::size_t>(slot)] = parse_double(row[c_pv], "profiles.pv_kwh");
        seen[it->second][static_cast<std::size_t>(slot)] = 1;
    }
    for (std::size_t i = 0; i < s.households.size(); ++i) {
        const auto gap = std::find(seen[i].begin(), seen[i].end(), 0);
        if (gap != seen[i].end()) {
            throw ValidationError("profiles: household " + std::to_string(s.households[i].id) + " has no row for slot " +
                                  std::to_string(gap - seen[i].begin()));
        }
    }
}

} // namespace

double Scenario::supplier_price(std::size_t slot) const {
    const auto per_day = static_cast<std::size_t>(slots.slots_per_day);
    const double hour = static_cast<double>(slot % per_day) * slots.slot_duration_min / 60.0;
    for (const auto& band : tou_schedule) {
        if (hour >= band.from_hour && hour < band.to_hour) return band.p_u;
    }
    throw ValidationError("tou_schedule: no price for hour " + format_number(hour));
}

std::size_t Scenario::pcc_count() const {
    std::size_t n = 0;
    for (const auto& node : feeder.nodes) {
        if (node.pcc) n = std::max(n, node.pcc->index + 1);
    }
    return n;
}

PccId pcc_of(const RadialFeeder& feeder, std::size_t bus, std::size_t phase) {
    const auto& nodes = feeder.model().nodes;
    int node = static_cast<int>(feeder.node_at(bus, phase));
    while (node != -1) {
        const auto& n = nodes[static_cast<std::size_t>(node)];
        if (n.pcc) return *n.pcc;
        node = n.parent;
    }
    throw ValidationError("feeder: bus " + std::to_string(bus) + " phase " + std::to_string(phase) +
                          " has no PCC upstream");
}

std::vector<double> cycling_shares(const Scenario& s) {
    std::vector<double> mean_g(s.horizon, 0.0);
    for (const auto& h : s.households) {
        for (std::size_t t = 0; t < s.horizon; ++t) mean_g[t] += h.commitments.g_hat[t];
    }
    if (!s.households.empty()) {
        for (double& g : mean_g) g /= static_cast<double>(s.households.size());
    }
    const auto per_day = static_cast<std::size_t>(s.slots.slots_per_day);
    std::vector<double> shares(s.horizon, 0.0);
    for (std::size_t start = 0; start < s.horizon; start += per_day) {
        const std::size_t end = std::min(s.horizon, start + per_day);
        double total = 0.0;
        for (std::size_t t = start; t < end; ++t) total += std::max(0.0, mean_g[t]);
        if (total <= 0.0) continue;
        for (std::size_t t = start; t < end; ++t) shares[t] = std::max(0.0, mean_g[t]) / total;
    }
    return shares;
}

void expand_states(Scenario& s) {
    s.slots.validate();
    if (s.horizon == 0) throw ValidationError("horizon must be positive");
    if (s.monitoring_window.first_slot < 0 || s.monitoring_window.end_slot < s.monitoring_window.first_slot ||
        s.monitoring_window.end_slot > s.slots.slots_per_day)
        throw ValidationError("monitoring_window outside the day");
    const RadialFeeder feeder(s.feeder);
    if (s.pcc_count() == 0) throw ValidationError("feeder: no node carries a PCC");

    std::vector<double> p_u(s.horizon);
    for (std::size_t t = 0; t < s.horizon; ++t) p_u[t] = s.supplier_price(t);

    std::set<int> ids;
    for (const auto& h : s.households) {
        if (!ids.insert(h.id).second) throw ValidationError("household " + std::to_string(h.id) + ": duplicate id");
        const auto& c = h.commitments;
        for (const auto* v : {&c.l_hat, &c.g_hat, &c.x_hat_m, &c.x_hat_u, &c.x_hat, &c.p_m, &c.s_hat, &h.load_kwh,
                              &h.pv_kwh}) {
            if (v->size() != s.horizon)
                throw ValidationError("household " + std::to_string(h.id) + ": series length differs from horizon");
        }
        if (h.storage.kind == FlexKind::FlexibleLoad && h.storage.b != 0.0)
            throw ValidationError("household " + std::to_string(h.id) + ": battery.b must be 0 for a flexible load");
        if (h.storage.extra_cycle_kwh < 0.0)
            throw ValidationError("household " + std::to_string(h.id) + ": battery.extra_cycle_kwh must be >= 0");
        if (!feeder.has_node(h.bus, h.phase))
            throw ValidationError("household " + std::to_string(h.id) + ": no feeder node at its bus and phase");
    }

    const std::vector<double> shares = cycling_shares(s);
    s.states.assign(s.horizon, {});
    for (std::size_t t = 0; t < s.horizon; ++t) {
        auto& row = s.states[t];
        row.reserve(s.households.size());
        for (const auto& spec : s.households) {
            const auto& c = spec.commitments;
            if (std::abs(c.x_hat[t] + c.s_hat[t] - (c.l_hat[t] - c.g_hat[t])) > kBalanceTol)
                invalid(spec.id, t, "x_hat + s_hat differs from l_hat - g_hat");

            const double extra = spec.storage.extra_cycle_kwh * shares[t];
            HouseholdState h;
            h.id = spec.id;
            h.pcc = pcc_of(feeder, spec.bus, spec.phase);
            h.r_hat = c.l_hat[t] - c.g_hat[t];
            h.e0 = spec.storage.e0;
            h.x_bar = spec.x_bar;
            h.commitment = {c.x_hat_m[t], c.x_hat_u[t], c.p_m[t], c.s_hat[t], c.x_hat[t]};
            h.battery = {spec.storage.e_max,
                         spec.storage.e_min,
                         spec.storage.s_max,
                         spec.storage.s_min,
                         std::max(c.s_hat[t], 0.0) + extra,
                         std::min(c.s_hat[t], 0.0) - extra,
                         spec.storage.a,
                         spec.storage.b};
            h.prices = {p_u[t], spec.prices.p_f, spec.prices.a_r,
                        spec.prices.reward_frac * std::abs(c.x_hat_m[t]) * c.p_m[t]};
            h = update_gap(h, spec.load_kwh[t] - c.l_hat[t], spec.pv_kwh[t] - c.g_hat[t]);
            try {
                validate_household(h);
            } catch (const ValidationError& e) {
                throw ValidationError(std::string(e.what()) + " (slot " + std::to_string(t) + ")");
            }
            row.push_back(h);
        }
    }
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());

    Scenario s;
    try {
        const json doc = json::parse(in);
        const auto& sl = doc.at("slots");
        s.slots.slot_duration_min = sl.value("slot_duration_min", s.slots.slot_duration_min);
        s.slots.iteration_period_s = sl.value("iteration_period_s", s.slots.iteration_period_s);
        s.slots.slots_per_day = sl.value("slots_per_day", s.slots.slots_per_day);
        s.slots.max_iterations = sl.value(
            "max_iterations", static_cast<int>(std::floor(s.slots.slot_seconds() / s.slots.iteration_period_s + 1e-9)));
        s.horizon = doc.at("horizon").get<std::size_t>();
        if (doc.contains("monitoring_window")) {
            s.monitoring_window.first_slot = doc["monitoring_window"].at("first_slot").get<int>();
            s.monitoring_window.end_slot = doc["monitoring_window"].at("end_slot").get<int>();
        }
        for (const auto& b : doc.at("tou_schedule")) {
            s.tou_schedule.push_back({b.at("from_hour").get<double>(), b.at("to_hour").get<double>(),
                                      b.at("p_u").get<double>()});
        }
        s.profiles_file = doc.at("profiles").get<std::string>();
        s.feeder = feeder_from_json(doc.at("feeder"));
        for (const auto& h : doc.at("households")) s.households.push_back(household_from_json(h));
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }

    read_profiles(s, path.parent_path() / s.profiles_file);
    try {
        expand_states(s);
    } catch (const TopologyError& e) {
        throw ValidationError(e.what());
    }
    return s;
}

void save_scenario(const Scenario& s, const std::filesystem::path& path) {
    json tou = json::array();
    for (const auto& b : s.tou_schedule) tou.push_back({{"from_hour", b.from_hour}, {"to_hour", b.to_hour}, {"p_u", b.p_u}});
    json households = json::array();
    for (const auto& h : s.households) households.push_back(household_to_json(h));

    const json doc{{"slots",
                    {{"slot_duration_min", s.slots.slot_duration_min},
                     {"iteration_period_s", s.slots.iteration_period_s},
                     {"max_iterations", s.slots.max_iterations},
                     {"slots_per_day", s.slots.slots_per_day}}},
                   {"horizon", s.horizon},
                   {"monitoring_window",
                    {{"first_slot", s.monitoring_window.first_slot}, {"end_slot", s.monitoring_window.end_slot}}},
                   {"tou_schedule", std::move(tou)},
                   {"profiles", s.profiles_file},
                   {"feeder", feeder_to_json(s.feeder)},
                   {"households", std::move(households)}};

    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << doc.dump(1) << '\n';
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());

    CsvWriter csv(path.parent_path() / s.profiles_file, {"slot", "household", "load_kwh", "pv_kwh"});
    for (const auto& h : s.households) {
        for (std::size_t t = 0; t < s.horizon; ++t) {
            csv.cell(t).cell(h.id).cell(h.load_kwh[t]).cell(h.pv_kwh[t]);
            csv.end_row();
        }
    }
    csv.close();
}

} // namespace rtc
