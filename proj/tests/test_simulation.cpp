#include "rtc/errors.hpp"
#include "rtc/outputs.hpp"
#include "rtc/simulation.hpp"
#include "rtc/synthetic.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

using namespace rtc;
namespace fs = std::filesystem;

namespace {

const Scenario& default_scenario() {
    static const Scenario s = generate_synthetic_scenario(SyntheticParams{});
    return s;
}

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("rtc_sim_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t line_count(const fs::path& p) {
    const auto text = slurp(p);
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

int window_violations(const RunSummary& r) {
    int n = 0;
    for (const auto& s : r.slots) n += (s.in_window && s.violation) ? 1 : 0;
    return n;
}

/// Saves the default scenario and writes one run of it.
fs::path write_run(const std::string& name, Mode mode, const std::map<std::string, std::string>& overrides = {}) {
    const auto base = fresh_dir(name);
    save_scenario(default_scenario(), base / "scenario.json");
    Scenario s = load_scenario(base / "scenario.json");
    RunOptions opt;
    apply_overrides(overrides, s, opt);
    RunConfig cfg{mode, base / "scenario.json", base / "run", 1, overrides};
    write_outputs(simulate_horizon(s, mode, opt), s, cfg, cfg.output_dir);
    return cfg.output_dir;
}

} // namespace

TEST_CASE("mode names") {
    for (Mode m : {Mode::NoControl, Mode::DpsOnly, Mode::RtcDps}) CHECK(parse_mode(to_string(m)) == m);
    CHECK_THROWS_AS(parse_mode("rtc"), ValidationError);
}

TEST_CASE("no-control applies the unconstrained flows") {
    const auto r = simulate_horizon(default_scenario(), Mode::NoControl);
    CHECK(r.rtc_slots() == 0);
    for (const auto& s : r.slots) {
        CHECK_FALSE(s.rtc_active);
        CHECK(s.v_dev == s.baseline_v_dev);
        CHECK(s.i_frac == s.baseline_i_frac);
        CHECK(s.violation == s.baseline_violation);
        for (double u : s.signal.u) CHECK(u == 0.0);
    }
    for (const auto& h : r.households) CHECK(h.u == 0.0);
}

TEST_CASE("RTC activates exactly after a monitored trigger") {
    const auto r = simulate_horizon(default_scenario(), Mode::RtcDps);
    REQUIRE(r.rtc_slots() > 0);
    for (std::size_t t = 0; t < r.slots.size(); ++t) {
        const bool expect = t > 0 && r.slots[t - 1].monitor_trigger;
        CHECK(r.slots[t].rtc_active == expect);
        if (r.slots[t].monitor_trigger) CHECK(r.slots[t].in_window);
    }
}

TEST_CASE("default scenario: coordination resolves the limit violations") {
    const auto& s = default_scenario();
    const auto none = simulate_horizon(s, Mode::NoControl);
    const auto dps = simulate_horizon(s, Mode::DpsOnly);
    const auto rtc = simulate_horizon(s, Mode::RtcDps);
    CHECK(window_violations(none) >= 1);
    CHECK(window_violations(dps) <= window_violations(none));
    CHECK(window_violations(rtc) == 0);
    CHECK(rtc.error_slots() == 0);
    CHECK(rtc.nonconverged_slots() == 0);
    for (const auto& slot : rtc.slots) {
        if (!slot.rtc_active) continue;
        CHECK(slot.iterations <= 60);
        CHECK(slot.max_regret <= 1e-4);
        CHECK(slot.constraint_satisfied);
    }
}

TEST_CASE("battery energy is continuous and stays in its band") {
    const auto& s = default_scenario();
    const auto r = simulate_horizon(s, Mode::RtcDps);
    const std::size_t n = s.households.size();
    REQUIRE(r.households.size() == s.horizon * n);
    for (std::size_t t = 0; t < s.horizon; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto& h = r.households[t * n + i];
            const auto& st = s.households[i].storage;
            CHECK(h.x + h.s == doctest::Approx(h.r).epsilon(1e-9));
            CHECK(h.e_end >= st.e_min - 1e-9);
            CHECK(h.e_end <= st.e_max + 1e-9);
            if (t == 0) CHECK(h.e0 == st.e0);
            else CHECK(std::abs(h.e0 - r.households[(t - 1) * n + i].e_end) <= 1e-9);
        }
    }
}

TEST_CASE("a feeder without PV never triggers on injection") {
    SyntheticParams p;
    p.pv_share = 0.0;
    const auto s = generate_synthetic_scenario(p);
    const auto r = simulate_horizon(s, Mode::RtcDps);
    for (const auto& slot : r.slots) {
        if (slot.rtc_active) CHECK(slot.direction == FlowDirection::Demand);
    }
    for (const auto& h : r.households) CHECK(h.r >= 0.0);
}

TEST_CASE("outputs, determinism and offline verification") {
    const auto a = write_run("det_a", Mode::RtcDps);
    const auto b = write_run("det_b", Mode::RtcDps);
    for (const char* f : {files::voltage, files::current, files::households, files::slots, files::signal_trace,
                          files::agent_trace}) {
        CHECK(slurp(a / f) == slurp(b / f));
    }
    CHECK(line_count(a / files::voltage) == 1 + 1008 * 33);
    CHECK(line_count(a / files::current) == 1 + 1008 * 30);
    CHECK(line_count(a / files::households) == 1 + 1008 * 50);
    CHECK(line_count(a / files::slots) == 1 + 1008);

    const auto report = verify_run(a);
    for (const auto& f : report.failures) MESSAGE(f);
    CHECK(report.ok());
    CHECK(report.checked_slots == 1008);
    CHECK(report.checked_rtc_slots > 0);
    CHECK(report.max_regret <= 1e-4);
}

TEST_CASE("verify detects a tampered battery trajectory") {
    const auto dir = write_run("tamper", Mode::NoControl, {{"horizon.slots", "3"}});
    auto text = slurp(dir / files::households);
    const auto row = text.find("\n1,1,");
    REQUIRE(row != std::string::npos);
    // Corrupt e0 of household 1 in slot 1 (fifth column).
    std::size_t pos = row + 1;
    for (int k = 0; k < 4; ++k) pos = text.find(',', pos) + 1;
    text.insert(pos, "9");
    {
        std::ofstream(dir / files::households, std::ios::binary) << text;
    }
    CHECK_FALSE(verify_run(dir).ok());
}

TEST_CASE("an empty horizon writes header-only tables") {
    const auto dir = write_run("empty", Mode::RtcDps, {{"horizon.slots", "0"}});
    for (const char* f : {files::voltage, files::current, files::households, files::slots, files::signal_trace,
                          files::agent_trace}) {
        CHECK(line_count(dir / f) == 1);
    }
    CHECK(fs::exists(dir / files::manifest));
    CHECK(verify_run(dir).ok());
}

TEST_CASE("overrides") {
    Scenario s = default_scenario();
    RunOptions opt;
    apply_overrides({{"feeder.v_limit_frac", "0.08"},
                     {"feeder.monitor_v_frac", "0.07"},
                     {"coordinator.step_beta", "0.3"},
                     {"constraints.step_frac", "0.05"}},
                    s, opt);
    CHECK(s.feeder.v_limit_frac == 0.08);
    CHECK(s.feeder.monitor_v_frac == 0.07);
    CHECK(opt.step_beta == 0.3);
    CHECK(opt.step_frac == 0.05);
    CHECK(run_coordinator_config(s, opt).step_beta == 0.3);

    CHECK_THROWS_AS(apply_overrides({{"feeder.colour", "red"}}, s, opt), ValidationError);
    CHECK_THROWS_AS(apply_overrides({{"feeder.v_limit_frac", "abc"}}, s, opt), ValidationError);
    CHECK_THROWS_AS(apply_overrides({{"horizon.slots", "-1"}}, s, opt), ValidationError);
    CHECK_THROWS_AS(apply_overrides({{"feeder.monitor_v_frac", "0.5"}}, s, opt), ValidationError);
}
