// rtcsim: generate scenarios, run the three control modes, re-check runs.
//
// Exit codes: 0 success, 1 validation error, 2 non-convergence flagged,
// 3 I/O error.

#include "rtc/errors.hpp"
#include "rtc/outputs.hpp"
#include "rtc/scenario.hpp"
#include "rtc/simulation.hpp"
#include "rtc/synthetic.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace {

enum Exit { kOk = 0, kValidation = 1, kNonConvergence = 2, kIo = 3 };

std::map<std::string, std::string> parse_sets(const std::vector<std::string>& sets) {
    std::map<std::string, std::string> out;
    for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw rtc::ValidationError("--set expects key=value, got '" + kv + "'");
        out[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    return out;
}

int cmd_run(const rtc::RunConfig& cfg) {
    rtc::Scenario scenario = rtc::load_scenario(cfg.scenario_path);
    rtc::RunOptions opt;
    rtc::apply_overrides(cfg.overrides, scenario, opt);
    const auto summary = rtc::simulate_horizon(scenario, cfg.mode, opt);
    for (const auto& line : summary.log) std::cerr << "rtcsim: " << line << '\n';
    rtc::write_outputs(summary, scenario, cfg, cfg.output_dir);
    std::cout << "mode " << rtc::to_string(cfg.mode) << ": " << summary.horizon << " slots, " << summary.rtc_slots()
              << " coordinated, " << summary.violation_slots() << " with limit violations, "
              << summary.nonconverged_slots() << " not converged, " << summary.error_slots() << " errors\n";
    if (summary.error_slots() > 0) return kValidation;
    if (summary.nonconverged_slots() > 0) return kNonConvergence;
    return kOk;
}

int cmd_verify(const std::string& dir) {
    const auto rep = rtc::verify_run(dir);
    for (const auto& f : rep.failures) std::cerr << "rtcsim: " << f << '\n';
    std::cout << "verified " << rep.checked_slots << " slots, " << rep.checked_rtc_slots
              << " coordinated, max regret " << rep.max_regret << ": " << (rep.ok() ? "ok" : "FAILED") << '\n';
    if (rep.ok()) return kOk;
    for (const auto& f : rep.failures) {
        if (f.find("did not converge") == std::string::npos) return kValidation;
    }
    return kNonConvergence;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Real-time control of residential energy flows"};
    app.require_subcommand(1);

    rtc::RunConfig run_cfg;
    std::string mode_text;
    std::vector<std::string> sets;
    auto* run = app.add_subcommand("run", "simulate a scenario in one control mode");
    run->add_option("--scenario", run_cfg.scenario_path, "scenario JSON")->required();
    run->add_option("--mode", mode_text, "no-control | dps-only | rtc+dps")->required();
    run->add_option("--out", run_cfg.output_dir, "output directory")->required();
    run->add_option("--seed", run_cfg.seed, "recorded in the manifest");
    run->add_option("--set", sets, "override, key=value (repeatable)");

    rtc::SyntheticParams gen_params;
    std::string gen_out;
    auto* gen = app.add_subcommand("gen", "write a synthetic scenario");
    gen->add_option("--households", gen_params.households, "household count")->check(CLI::PositiveNumber);
    gen->add_option("--pv", gen_params.pv_share, "share of households with PV")->check(CLI::Range(0.0, 1.0));
    gen->add_option("--battery", gen_params.battery_share, "share of households with a battery")
        ->check(CLI::Range(0.0, 1.0));
    gen->add_option("--seed", gen_params.seed, "random seed");
    gen->add_option("--days", gen_params.days, "horizon in days")->check(CLI::PositiveNumber);
    gen->add_option("--out", gen_out,
                    "scenario JSON path, or a directory to hold scenario.json (profiles CSV is written next to it)")
        ->required();

    std::string verify_dir;
    auto* verify = app.add_subcommand("verify", "re-check equilibrium and invariants of a run");
    verify->add_option("--run", verify_dir, "run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kValidation;
    }

    try {
        if (*run) {
            run_cfg.mode = rtc::parse_mode(mode_text);
            run_cfg.overrides = parse_sets(sets);
            return cmd_run(run_cfg);
        }
        if (*gen) {
            std::filesystem::path target = gen_out;
            if (target.extension() != ".json") target /= "scenario.json";
            const auto s = rtc::generate_synthetic_scenario(gen_params);
            rtc::save_scenario(s, target);
            std::cout << "wrote " << target.string() << " (" << s.households.size() << " households, " << s.horizon
                      << " slots)\n";
            return kOk;
        }
        if (*verify) return cmd_verify(verify_dir);
    } catch (const rtc::IoError& e) {
        std::cerr << "rtcsim: " << e.what() << '\n';
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "rtcsim: " << e.what() << '\n';
        return kValidation;
    }
    return kOk;
}
