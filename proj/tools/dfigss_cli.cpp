// Command-line front end: power flow, SMIB analysis, modal analysis,
// fault simulation, droop-gain sweeps and the scenario summary table.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include <dfigss/dfigss.hpp>

#ifndef DFIGSS_SCENARIO_DIR
#define DFIGSS_SCENARIO_DIR "scenarios"
#endif

namespace fs = std::filesystem;
using namespace dfigss;

namespace {

constexpr int exit_stage_error = 3;
constexpr int exit_input_error = 4;
constexpr int exit_other_error = 5;

std::string output_dir(const std::string& flag) {
    if (!flag.empty())
        return flag;
    if (const char* env = std::getenv("DFIGSS_OUTPUT_DIR"); env && *env)
        return env;
    return "out";
}

std::string scenario_dir(const std::string& flag) {
    if (!flag.empty())
        return flag;
    if (const char* env = std::getenv("DFIGSS_SCENARIO_DIR"); env && *env)
        return env;
    return DFIGSS_SCENARIO_DIR;
}

Scenario scenario_from(const std::string& file, const std::string& base_case) {
    if (!file.empty())
        return load_scenario(file);
    return parse_scenario(json{{"base_case", base_case.empty() ? "A" : base_case}});
}

std::string out_path(const std::string& dir, const std::string& name) {
    fs::create_directories(dir);
    return (fs::path(dir) / name).string();
}

void print_mode_row(const std::string& cls, const ModeSummary& m) {
    std::printf("  %-18s %9.4f %+9.4fi  f=%6.3f Hz  zeta=%7.4f  CCBG-PI=%5.3f%s\n", cls.c_str(),
                m.eigenvalue.real(), m.eigenvalue.imag(), m.frequency_hz, m.damping, m.ccbg_pi,
                m.critical ? "  critical" : "");
}

void print_report(const Report& r) {
    std::printf("%s (case %s%s%s)\n", r.scenario.c_str(), r.base_case.c_str(),
                r.control_mode.empty() ? "" : (", " + r.control_mode).c_str(),
                r.control_mode.empty() ? "" : (r.frequency_support ? ", support on" : ", support off"));
    for (const auto& [cls, m] : r.dominant)
        print_mode_row(cls, m);
    for (const auto& f : r.flags)
        std::printf("  ! %s\n", f.c_str());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"DFIG droop control and small-signal stability toolkit"};
    app.require_subcommand(1);
    std::string out_flag;
    app.add_option("--out", out_flag, "Output directory (default: $DFIGSS_OUTPUT_DIR or ./out)");

    // powerflow
    auto* pf_cmd = app.add_subcommand("powerflow", "Solve the power flow of a base case");
    std::string pf_scenario, pf_case;
    pf_cmd->add_option("--scenario", pf_scenario, "Scenario file");
    pf_cmd->add_option("--case", pf_case, "Base case A, B or C (without --scenario)")
        ->check(CLI::IsMember({"A", "B", "C"}));

    // smib
    auto* smib_cmd = app.add_subcommand("smib", "Single-machine eigenvalues and droop-gain grid");
    double smib_kp = 0.0, smib_kin = 0.0;
    std::string smib_kp_range = "0:50:10", smib_kin_range = "0:50:10";
    smib_cmd->add_option("--kp", smib_kp, "Droop gain K_p for the single point");
    smib_cmd->add_option("--kin", smib_kin, "Inertial gain K_in for the single point");
    smib_cmd->add_option("--kp-grid", smib_kp_range, "K_p grid (start:stop:step or list)");
    smib_cmd->add_option("--kin-grid", smib_kin_range, "K_in grid (start:stop:step or list)");

    // modal
    auto* modal_cmd = app.add_subcommand("modal", "Linearize a scenario and list its modes");
    std::string modal_scenario, modal_case;
    modal_cmd->add_option("--scenario", modal_scenario, "Scenario file");
    modal_cmd->add_option("--case", modal_case, "Base case A, B or C (without --scenario)")
        ->check(CLI::IsMember({"A", "B", "C"}));

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Time-domain simulation of the scenario events");
    std::string sim_scenario, sim_case;
    double sim_tend = 0.0, sim_dt = 0.0;
    sim_cmd->add_option("--scenario", sim_scenario, "Scenario file");
    sim_cmd->add_option("--case", sim_case, "Base case A, B or C (without --scenario)")
        ->check(CLI::IsMember({"A", "B", "C"}));
    sim_cmd->add_option("--tend", sim_tend, "End time in s (default from scenario)")->check(CLI::PositiveNumber);
    sim_cmd->add_option("--dt-max", sim_dt, "Largest step in s")->check(CLI::PositiveNumber);

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "Modal analysis over a (K_p, K_in) grid");
    std::string sweep_scenario;
    std::string sweep_kp = "0:50:10", sweep_kin = "0:50:10";
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    sweep_cmd->add_option("--scenario", sweep_scenario, "Scenario file (base case B or C)")->required();
    sweep_cmd->add_option("--kp", sweep_kp, "K_p values (start:stop:step or list)");
    sweep_cmd->add_option("--kin", sweep_kin, "K_in values (start:stop:step or list)");
    sweep_cmd->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

    // report
    auto* report_cmd = app.add_subcommand("report", "Dominant-mode table for several scenarios");
    bool all_cases = false;
    std::vector<std::string> report_files;
    std::string scen_dir_flag;
    report_cmd->add_flag("--all-cases,--all-paper-cases", all_cases, "Run every scenario in the scenario directory");
    report_cmd->add_option("--scenario", report_files, "Scenario file(s)");
    report_cmd->add_option("--scenario-dir", scen_dir_flag,
                           "Directory of canned scenarios (default: $DFIGSS_SCENARIO_DIR or the source tree)");

    CLI11_PARSE(app, argc, argv);
    const std::string out = output_dir(out_flag);

    try {
        if (*pf_cmd) {
            const Scenario s = scenario_from(pf_scenario, pf_case);
            const TwoAreaSystem sys = build_scenario_system(s);
            const PowerFlowSolution pf =
                detail::stage("powerflow", [&] { return solve_power_flow(sys.network); });
            std::printf("power flow converged in %d iterations, mismatch %.3e pu\n", pf.iterations,
                        pf.mismatch_norm);
            std::printf("%5s %8s %9s %10s %10s\n", "bus", "|V| pu", "angle deg", "P inj MW", "Q inj Mvar");
            const double base = sys.network.system_base_mva;
            for (const auto& b : sys.network.buses) {
                const cplx v = pf.voltage_at(b.id);
                std::printf("%5d %8.4f %9.3f %10.2f %10.2f\n", b.id, std::abs(v),
                            std::arg(v) * 180.0 / std::numbers::pi, pf.p_at(b.id) * base, pf.q_at(b.id) * base);
            }
            std::printf("generation %.2f MW, load %.2f MW, losses %.2f MW\n", pf.total_generation * base,
                        pf.total_load * base, pf.losses * base);
            const auto path = out_path(out, s.name + "_powerflow.json");
            detail::write_text(path, network_to_json(sys.network, sys.devices, &pf).dump(2) + "\n");
            std::printf("wrote %s\n", path.c_str());
        } else if (*smib_cmd) {
            using namespace dfigss::smib;
            const auto rec = smib_record(SmibParams::with_gains(smib_kp, smib_kin));
            std::printf("K_p=%g K_in=%g: lambda = %.4f %+.4fi, zeta = %.4f, f = %.4f Hz%s\n", rec.kp, rec.kin,
                        rec.lambda.real(), rec.lambda.imag(), rec.damping, rec.freq_hz,
                        rec.oscillatory ? "" : " (non-oscillatory)");
            const auto grid =
                smib_sensitivity_grid(SmibParams{}, parse_range(smib_kp_range), parse_range(smib_kin_range));
            std::ostringstream os;
            write_smib_csv(os, grid);
            const auto path = out_path(out, "smib_grid.csv");
            detail::write_text(path, os.str());
            std::printf("wrote %s (%zu points)\n", path.c_str(), grid.size());
        } else if (*modal_cmd) {
            const Scenario s = scenario_from(modal_scenario, modal_case);
            const ScenarioRun run = analyze_scenario(s);
            const Report r = make_report(run);
            print_report(r);
            const auto modes = out_path(out, s.name + "_modes.csv");
            detail::write_text(modes, modes_to_csv(run.modal));
            const auto rep = export_report({r}, out_path(out, s.name + "_report"), ExportFormat::structured_text);
            std::printf("wrote %s and %s\n", modes.c_str(), rep.c_str());
        } else if (*sim_cmd) {
            const Scenario s = scenario_from(sim_scenario, sim_case);
            const SimulationRun run =
                simulate_scenario(s, sim_tend > 0.0 ? std::optional(sim_tend) : std::nullopt,
                                  sim_dt > 0.0 ? std::optional(sim_dt) : std::nullopt);
            if (!run.error.empty()) {
                const auto path = out_path(out, s.name + "_trace_partial.csv");
                write_trace_csv(run.trace, path);
                std::fprintf(stderr, "error [simulate]: %s (partial trace in %s)\n", run.error.c_str(),
                             path.c_str());
                return exit_stage_error;
            }
            for (const auto& l : run.trace.log)
                std::printf("  %s\n", l.c_str());
            std::printf("%zu steps, %zu samples, max power imbalance %.2e pu\n", run.trace.steps,
                        run.trace.size(), run.trace.max_power_imbalance);
            if (run.ringdown)
                std::printf("ringdown G1-G3: sigma = %.4f 1/s, omega = %.4f rad/s (%.3f Hz), zeta = %.4f, "
                            "residual %.2e\n",
                            run.ringdown->sigma, run.ringdown->omega, run.ringdown->frequency_hz(),
                            run.ringdown->damping(), run.ringdown->residual);
            else
                std::printf("ringdown fit unavailable: %s\n", run.ringdown_error.c_str());
            const auto path = out_path(out, s.name + "_trace.csv");
            write_trace_csv(run.trace, path);
            std::printf("wrote %s\n", path.c_str());
        } else if (*sweep_cmd) {
            const Scenario s = load_scenario(sweep_scenario);
            const auto sweep = run_sensitivity_sweep(s, parse_range(sweep_kp), parse_range(sweep_kin), threads);
            std::size_t failed = 0;
            for (const auto& c : sweep.cells)
                failed += c.ok() ? 0 : 1;
            const auto csv = export_report(sweep, out_path(out, s.name + "_sweep"), ExportFormat::csv);
            const auto js = export_report(sweep, out_path(out, s.name + "_sweep"), ExportFormat::structured_text);
            std::printf("%zu cells (%zu failed); wrote %s and %s\n", sweep.cells.size(), failed, csv.c_str(),
                        js.c_str());
        } else if (*report_cmd) {
            std::vector<std::string> files = report_files;
            if (all_cases) {
                const auto canned = scenario_files(scenario_dir(scen_dir_flag));
                files.insert(files.end(), canned.begin(), canned.end());
            }
            if (files.empty())
                throw ValidationError("report: give --scenario files or --all-cases");
            std::vector<Report> reports;
            for (const auto& f : files) {
                reports.push_back(run_scenario(load_scenario(f)));
                print_report(reports.back());
            }
            for (std::size_t i = 0; i < reports.size(); ++i)
                for (std::size_t j = i + 1; j < reports.size(); ++j) {
                    const auto& a = reports[i];
                    const auto& b = reports[j];
                    if (a.base_case == b.base_case && a.frequency_support == b.frequency_support &&
                        a.control_mode == "voltage" && b.control_mode == "reactive_power")
                        for (const auto& f : compare_control_modes(a, b))
                            std::printf("  ! %s\n", f.c_str());
                }
            const auto csv = export_report(reports, out_path(out, "report"), ExportFormat::csv);
            const auto js = export_report(reports, out_path(out, "report"), ExportFormat::structured_text);
            std::printf("wrote %s and %s\n", csv.c_str(), js.c_str());
        }
    } catch (const StageError& e) {
        std::fprintf(stderr, "error [%s]: %s\n", e.stage().c_str(), e.what());
        return exit_stage_error;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error [input]: %s\n", e.what());
        return exit_input_error;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_other_error;
    }
    return 0;
}
