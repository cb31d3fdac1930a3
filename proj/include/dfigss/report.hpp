#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ringdown.hpp"
#include "scenario.hpp"

namespace dfigss {

/// Power-flow tolerance used when a solution seeds the dynamic model; the
/// equilibrium check of the linearization needs mismatches far below 1e-8.
inline constexpr double initialization_pf_tol = 1e-12;

struct Participant {
    std::string state;
    double factor = 0.0;
    bool operator==(const Participant&) const = default;
};

struct ModeSummary {
    cplx eigenvalue;
    double damping = std::numeric_limits<double>::quiet_NaN();
    double frequency_hz = 0.0;
    double ccbg_pi = 0.0;
    bool critical = false;
    std::vector<Participant> participants; // largest five

    bool operator==(const ModeSummary& o) const {
        auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
        return eigenvalue == o.eigenvalue && same(damping, o.damping) && frequency_hz == o.frequency_hz &&
               ccbg_pi == o.ccbg_pi && critical == o.critical && participants == o.participants;
    }
};

inline ModeSummary summarize_mode(const Mode& m, const std::vector<StateLabel>& labels, std::size_t top = 5) {
    ModeSummary s;
    s.eigenvalue = m.eigenvalue;
    s.damping = m.damping;
    s.frequency_hz = m.frequency_hz;
    s.ccbg_pi = m.ccbg_pi;
    s.critical = m.is_critical;
    for (auto i : top_participants(m, top))
        s.participants.push_back({labels[i].full_name(), m.participation[static_cast<Eigen::Index>(i)]});
    return s;
}

struct PowerFlowSummary {
    int iterations = 0;
    double mismatch = 0.0;
    double total_generation_mw = 0.0;
    double total_load_mw = 0.0;
    double losses_mw = 0.0;
    double slack_p_mw = 0.0;
    double slack_q_mvar = 0.0;
    double wind_p_mw = 0.0;
    bool operator==(const PowerFlowSummary&) const = default;
};

struct Report {
    std::string scenario;
    std::string base_case;
    std::string control_mode; // empty without wind
    bool frequency_support = false;
    double kp = 0.0, kin = 0.0;
    std::map<std::string, ModeSummary> dominant; // keyed by mode class name
    std::size_t mode_count = 0;
    std::size_t critical_count = 0;
    double max_ccbg_pi = 0.0;
    PowerFlowSummary power_flow;
    std::vector<std::string> flags;
    std::string scenario_hash;
    std::string version;

    bool operator==(const Report&) const = default;
};

/// Everything produced along the scenario pipeline.
struct ScenarioRun {
    Scenario scenario;
    TwoAreaSystem system;
    PowerFlowSolution power_flow;
    Equilibrium equilibrium;
    ModalAnalysis modal;
};

namespace detail {

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

} // namespace detail

inline TwoAreaSystem build_scenario_system(const Scenario& s) {
    return detail::stage("build", [&] { return build_kundur_two_area(s.base_case, scenario_options(s)); });
}

inline Equilibrium scenario_equilibrium(const Scenario& s, TwoAreaSystem* system_out = nullptr) {
    TwoAreaSystem sys = build_scenario_system(s);
    const PowerFlowSolution pf = detail::stage("powerflow", [&] {
        PowerFlowOptions opt;
        opt.tol = initialization_pf_tol;
        return solve_power_flow(sys.network, opt);
    });
    Equilibrium eq =
        detail::stage("initialize", [&] { return initialize_system(sys.network, sys.devices, pf); });
    if (system_out)
        *system_out = std::move(sys);
    return eq;
}

inline ScenarioRun analyze_scenario(const Scenario& s) {
    TwoAreaSystem sys;
    Equilibrium eq = scenario_equilibrium(s, &sys);
    PowerFlowSolution pf = eq.power_flow;
    StateMatrix sm = detail::stage("linearize", [&] {
        return linearize([&](const Eigen::VectorXd& x) { return eq.system.derivatives(x); }, eq.x0,
                         eq.system.labels(), LinearizeOptions{});
    });
    ModalAnalysis ma = detail::stage("modal", [&] { return analyze_modes(std::move(sm)); });
    return {s, std::move(sys), std::move(pf), std::move(eq), std::move(ma)};
}

inline Report make_report(const ScenarioRun& run) {
    const Scenario& s = run.scenario;
    Report r;
    r.scenario = s.name;
    r.base_case = to_string(s.base_case);
    if (s.has_wind()) {
        r.control_mode = to_string(s.control_mode);
        r.frequency_support = s.frequency_support;
        r.kp = s.frequency_support ? s.droop.kp : 0.0;
        r.kin = s.frequency_support ? s.droop.kin : 0.0;
    }
    const auto& labels = run.modal.state_matrix.labels;
    for (const auto& [cls, m] : dominant_modes(run.modal.modes))
        r.dominant[to_string(cls)] = summarize_mode(m, labels);
    r.mode_count = run.modal.modes.size();
    for (const auto& m : run.modal.modes) {
        r.critical_count += m.is_critical ? 1 : 0;
        r.max_ccbg_pi = std::max(r.max_ccbg_pi, m.ccbg_pi);
    }

    const auto& pf = run.power_flow;
    const double base = run.system.network.system_base_mva;
    const int slack = run.system.network.buses[run.system.network.slack_index()].id;
    r.power_flow = {pf.iterations,
                    pf.mismatch_norm,
                    pf.total_generation * base,
                    pf.total_load * base,
                    pf.losses * base,
                    pf.p_at(slack) * base,
                    pf.q_at(slack) * base,
                    run.system.wind_bus ? pf.p_at(run.system.wind_bus) * base : 0.0};

    for (const auto& [cls, m] : r.dominant)
        if (m.critical)
            r.flags.push_back("critical " + cls + " mode (damping " + std::to_string(m.damping) + ")");
    if (!s.has_wind() && r.max_ccbg_pi != 0.0)
        r.flags.push_back("nonzero CCBG-PI in an all-synchronous system");
    r.scenario_hash = scenario_hash(s);
    r.version = tool_version;
    return r;
}

/// Power flow, linearization and modal analysis of one scenario.
inline Report run_scenario(const Scenario& s) { return make_report(analyze_scenario(s)); }

/// Flags dominant classes whose damping moves by more than `threshold`
/// between the voltage- and reactive-power-mode variants of a case.
inline std::vector<std::string> compare_control_modes(const Report& v_mode, const Report& q_mode,
                                                      double threshold = 0.05) {
    std::vector<std::string> flags;
    for (const auto& [cls, a] : v_mode.dominant) {
        auto it = q_mode.dominant.find(cls);
        if (it == q_mode.dominant.end())
            continue;
        const double dz = it->second.damping - a.damping;
        if (std::abs(dz) > threshold)
            flags.push_back(v_mode.scenario + " vs " + q_mode.scenario + ": " + cls +
                            " damping changes by " + std::to_string(dz));
    }
    return flags;
}

// ---------------------------------------------------------------------------
// Time domain
// ---------------------------------------------------------------------------

struct SimulationRun {
    Trace trace;
    std::string error; // integration failure; `trace` then holds the partial result
    std::optional<RingdownResult> ringdown; // G1 - G3 speed difference
    std::string ringdown_error;
};

/// Simulates the scenario's events from its equilibrium and fits the
/// inter-area ringdown of the area 1 minus area 2 speed difference after the
/// last event.
inline SimulationRun simulate_scenario(const Scenario& s, std::optional<double> t_end = {},
                                       std::optional<double> dt_max = {}) {
    const Equilibrium eq = scenario_equilibrium(s);
    SimulationOptions opt;
    opt.dt_max = dt_max.value_or(s.simulation.dt_max);
    opt.dt_min = std::min(opt.dt_min, opt.dt_max);
    opt.record_interval = s.simulation.record_interval;
    SimulationRun run;
    try {
        run.trace = simulate(eq.system, eq.x0, s.events, t_end.value_or(s.simulation.t_end), opt);
    } catch (const IntegrationError& e) {
        run.trace = e.partial_trace();
        run.error = e.what();
        return run;
    } catch (const std::exception& e) {
        throw StageError("simulate", e.what());
    }
    double t_last = 0.0;
    for (const auto& e : s.events)
        t_last = std::max(t_last, e.t_start + e.duration);
    try {
        const auto w1 = run.trace.rotor_speed("G1");
        const auto w3 = run.trace.rotor_speed("G3");
        std::vector<double> d(w1.size());
        for (std::size_t i = 0; i < d.size(); ++i)
            d[i] = w1[i] - w3[i];
        run.ringdown = ringdown_fit(run.trace.time, d, {t_last + 1.0, run.trace.time.back()});
    } catch (const std::exception& e) {
        run.ringdown_error = e.what();
    }
    return run;
}

// ---------------------------------------------------------------------------
// Sensitivity sweep
// ---------------------------------------------------------------------------

struct SweepCell {
    double kp = 0.0, kin = 0.0;
    std::string error; // empty on success
    std::map<std::string, ModeSummary> dominant;

    bool ok() const { return error.empty(); }
    bool operator==(const SweepCell&) const = default;
};

struct SweepResult {
    std::string scenario;
    std::vector<double> kp_values, kin_values;
    std::vector<SweepCell> cells; // kp varies fastest

    const SweepCell& cell(std::size_t i_kp, std::size_t i_kin) const {
        return cells.at(i_kin * kp_values.size() + i_kp);
    }
    bool operator==(const SweepResult&) const = default;
};

/// "start:stop:step" (inclusive) or a comma-separated list.
inline std::vector<double> parse_range(const std::string& text) {
    std::vector<double> out;
    auto num = [&](const std::string& s) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != s.size() || s.empty())
            throw ValidationError("bad number '" + s + "' in range '" + text + "'");
        return v;
    };
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        for (std::string p; std::getline(ss, p, ':');)
            parts.push_back(p);
        if (parts.size() != 3)
            throw ValidationError("range must be start:stop:step, got '" + text + "'");
        const double a = num(parts[0]), b = num(parts[1]), h = num(parts[2]);
        if (!(h > 0.0) || b < a)
            throw ValidationError("range needs step > 0 and stop >= start: '" + text + "'");
        const auto n = static_cast<long>(std::floor((b - a) / h + 1e-9));
        for (long i = 0; i <= n; ++i)
            out.push_back(a + static_cast<double>(i) * h);
        return out;
    }
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ',');)
        out.push_back(num(p));
    if (out.empty())
        throw ValidationError("empty value list");
    return out;
}

/// One full modal analysis per (kp, kin) cell with support enabled. Cells
/// run on `threads` workers; failures are stored in the cell.
inline SweepResult run_sensitivity_sweep(const Scenario& base, const std::vector<double>& kp_values,
                                         const std::vector<double>& kin_values, unsigned threads = 1) {
    if (!base.has_wind())
        throw StageError("sweep", "sensitivity sweep needs a scenario with a wind farm");
    if (kp_values.empty() || kin_values.empty())
        throw StageError("sweep", "empty gain grid");
    SweepResult out;
    out.scenario = base.name;
    out.kp_values = kp_values;
    out.kin_values = kin_values;
    out.cells.resize(kp_values.size() * kin_values.size());
    for (std::size_t j = 0; j < kin_values.size(); ++j)
        for (std::size_t i = 0; i < kp_values.size(); ++i) {
            auto& c = out.cells[j * kp_values.size() + i];
            c.kp = kp_values[i];
            c.kin = kin_values[j];
        }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < out.cells.size(); k = next++) {
            auto& cell = out.cells[k];
            try {
                Scenario s = base;
                s.frequency_support = true;
                s.droop.enabled = true;
                s.droop.kp = cell.kp;
                s.droop.kin = cell.kin;
                s.droop.validate();
                cell.dominant = run_scenario(s).dominant;
            } catch (const std::exception& e) {
                cell.error = e.what();
                if (cell.error.empty())
                    cell.error = "unknown failure";
            }
        }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(out.cells.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();
    return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace detail {

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
inline double number_from(const json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline json mode_to_json(const ModeSummary& m) {
    json parts = json::array();
    for (const auto& p : m.participants)
        parts.push_back({{"state", p.state}, {"factor", p.factor}});
    return {{"real", m.eigenvalue.real()},
            {"imag", m.eigenvalue.imag()},
            {"damping", number_or_null(m.damping)},
            {"frequency_hz", m.frequency_hz},
            {"ccbg_pi", m.ccbg_pi},
            {"critical", m.critical},
            {"participants", parts}};
}

inline ModeSummary mode_from_json(const json& j) {
    ModeSummary m;
    m.eigenvalue = {j.at("real").get<double>(), j.at("imag").get<double>()};
    m.damping = number_from(j.at("damping"));
    m.frequency_hz = j.at("frequency_hz").get<double>();
    m.ccbg_pi = j.at("ccbg_pi").get<double>();
    m.critical = j.at("critical").get<bool>();
    for (const auto& p : j.at("participants"))
        m.participants.push_back({p.at("state").get<std::string>(), p.at("factor").get<double>()});
    return m;
}

inline std::string fmt(double v) {
    if (!std::isfinite(v))
        return "";
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(p.parent_path(), ec);
    }
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw Error("cannot open " + path + " for writing");
    os << text;
    if (!os)
        throw Error("failed writing " + path);
}

} // namespace detail

inline json report_to_json(const Report& r) {
    json dom = json::object();
    for (const auto& [cls, m] : r.dominant)
        dom[cls] = detail::mode_to_json(m);
    const auto& pf = r.power_flow;
    return {{"scenario", r.scenario},
            {"base_case", r.base_case},
            {"control_mode", r.control_mode},
            {"frequency_support", r.frequency_support},
            {"kp", r.kp},
            {"kin", r.kin},
            {"dominant_modes", dom},
            {"mode_count", r.mode_count},
            {"critical_count", r.critical_count},
            {"max_ccbg_pi", r.max_ccbg_pi},
            {"power_flow",
             {{"iterations", pf.iterations},
              {"mismatch", pf.mismatch},
              {"total_generation_mw", pf.total_generation_mw},
              {"total_load_mw", pf.total_load_mw},
              {"losses_mw", pf.losses_mw},
              {"slack_p_mw", pf.slack_p_mw},
              {"slack_q_mvar", pf.slack_q_mvar},
              {"wind_p_mw", pf.wind_p_mw}}},
            {"flags", r.flags},
            {"provenance", {{"scenario_hash", r.scenario_hash}, {"tool_version", r.version}}}};
}

inline Report report_from_json(const json& j) {
    try {
        Report r;
        r.scenario = j.at("scenario").get<std::string>();
        r.base_case = j.at("base_case").get<std::string>();
        r.control_mode = j.at("control_mode").get<std::string>();
        r.frequency_support = j.at("frequency_support").get<bool>();
        r.kp = j.at("kp").get<double>();
        r.kin = j.at("kin").get<double>();
        for (const auto& [cls, m] : j.at("dominant_modes").items())
            r.dominant[cls] = detail::mode_from_json(m);
        r.mode_count = j.at("mode_count").get<std::size_t>();
        r.critical_count = j.at("critical_count").get<std::size_t>();
        r.max_ccbg_pi = j.at("max_ccbg_pi").get<double>();
        const auto& pf = j.at("power_flow");
        r.power_flow = {pf.at("iterations").get<int>(),         pf.at("mismatch").get<double>(),
                        pf.at("total_generation_mw").get<double>(), pf.at("total_load_mw").get<double>(),
                        pf.at("losses_mw").get<double>(),       pf.at("slack_p_mw").get<double>(),
                        pf.at("slack_q_mvar").get<double>(),    pf.at("wind_p_mw").get<double>()};
        r.flags = j.at("flags").get<std::vector<std::string>>();
        r.scenario_hash = j.at("provenance").at("scenario_hash").get<std::string>();
        r.version = j.at("provenance").at("tool_version").get<std::string>();
        return r;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed report: ") + e.what());
    }
}

inline std::string reports_to_text(const std::vector<Report>& reports) {
    json arr = json::array();
    for (const auto& r : reports)
        arr.push_back(report_to_json(r));
    return arr.dump(2) + "\n";
}

inline std::vector<Report> reports_from_text(const std::string& text) {
    json arr;
    try {
        arr = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("malformed report file: ") + e.what());
    }
    if (!arr.is_array())
        throw ValidationError("malformed report file: expected a list");
    std::vector<Report> out;
    for (const auto& j : arr)
        out.push_back(report_from_json(j));
    return out;
}

/// Table of dominant modes: one row per (scenario, class).
/// Columns: scenario,base_case,control_mode,support,kp,kin,class,real,imag,
/// damping,frequency_hz,ccbg_pi,critical
inline std::string reports_to_csv(const std::vector<Report>& reports) {
    using detail::fmt;
    std::ostringstream os;
    os << "scenario,base_case,control_mode,support,kp,kin,class,real,imag,damping,frequency_hz,ccbg_pi,critical\n";
    for (const auto& r : reports)
        for (const auto& [cls, m] : r.dominant)
            os << r.scenario << ',' << r.base_case << ',' << r.control_mode << ',' << (r.frequency_support ? 1 : 0)
               << ',' << fmt(r.kp) << ',' << fmt(r.kin) << ',' << cls << ',' << fmt(m.eigenvalue.real()) << ','
               << fmt(m.eigenvalue.imag()) << ',' << fmt(m.damping) << ',' << fmt(m.frequency_hz) << ','
               << fmt(m.ccbg_pi) << ',' << (m.critical ? 1 : 0) << '\n';
    return os.str();
}

inline const std::vector<std::string>& sweep_classes() {
    static const std::vector<std::string> c{"inter_area", "local", "converter_control"};
    return c;
}

/// One row per cell. For each class in sweep_classes(): <class>_real,
/// <class>_imag, <class>_damping, <class>_frequency_hz, <class>_ccbg_pi
/// (empty when absent). Trailing `error` column is empty on success.
inline std::string sweep_to_csv(const SweepResult& s) {
    using detail::fmt;
    std::ostringstream os;
    os << "kp,kin,status";
    for (const auto& c : sweep_classes())
        os << ',' << c << "_real," << c << "_imag," << c << "_damping," << c << "_frequency_hz," << c << "_ccbg_pi";
    os << ",error\n";
    for (const auto& cell : s.cells) {
        os << fmt(cell.kp) << ',' << fmt(cell.kin) << ',' << (cell.ok() ? "ok" : "failed");
        for (const auto& c : sweep_classes()) {
            auto it = cell.dominant.find(c);
            if (it == cell.dominant.end()) {
                os << ",,,,,";
                continue;
            }
            const auto& m = it->second;
            os << ',' << fmt(m.eigenvalue.real()) << ',' << fmt(m.eigenvalue.imag()) << ',' << fmt(m.damping)
               << ',' << fmt(m.frequency_hz) << ',' << fmt(m.ccbg_pi);
        }
        std::string err = cell.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        os << ',' << err << '\n';
    }
    return os.str();
}

inline json sweep_to_json(const SweepResult& s) {
    json cells = json::array();
    for (const auto& c : s.cells) {
        json dom = json::object();
        for (const auto& [cls, m] : c.dominant)
            dom[cls] = detail::mode_to_json(m);
        cells.push_back({{"kp", c.kp}, {"kin", c.kin}, {"error", c.error}, {"dominant_modes", dom}});
    }
    return {{"scenario", s.scenario}, {"kp_values", s.kp_values}, {"kin_values", s.kin_values}, {"cells", cells}};
}

inline SweepResult sweep_from_json(const json& j) {
    try {
        SweepResult s;
        s.scenario = j.at("scenario").get<std::string>();
        s.kp_values = j.at("kp_values").get<std::vector<double>>();
        s.kin_values = j.at("kin_values").get<std::vector<double>>();
        for (const auto& c : j.at("cells")) {
            SweepCell cell;
            cell.kp = c.at("kp").get<double>();
            cell.kin = c.at("kin").get<double>();
            cell.error = c.at("error").get<std::string>();
            for (const auto& [cls, m] : c.at("dominant_modes").items())
                cell.dominant[cls] = detail::mode_from_json(m);
            s.cells.push_back(std::move(cell));
        }
        if (s.cells.size() != s.kp_values.size() * s.kin_values.size())
            throw ValidationError("malformed sweep: cell count does not match the grid");
        return s;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed sweep: ") + e.what());
    }
}

enum class ExportFormat { csv, structured_text };

/// Writes `<stem>.csv` or `<stem>.json`; returns the path written.
inline std::string export_report(const std::vector<Report>& reports, const std::string& stem, ExportFormat f) {
    const std::string path = stem + (f == ExportFormat::csv ? ".csv" : ".json");
    detail::write_text(path, f == ExportFormat::csv ? reports_to_csv(reports) : reports_to_text(reports));
    return path;
}

inline std::string export_report(const SweepResult& sweep, const std::string& stem, ExportFormat f) {
    const std::string path = stem + (f == ExportFormat::csv ? ".csv" : ".json");
    detail::write_text(path, f == ExportFormat::csv ? sweep_to_csv(sweep) : sweep_to_json(sweep).dump(2) + "\n");
    return path;
}

/// All modes of one run, one row per eigenvalue, with the five largest
/// participating states.
inline std::string modes_to_csv(const ModalAnalysis& ma) {
    using detail::fmt;
    std::ostringstream os;
    os << "index,real,imag,damping,frequency_hz,class,ccbg_pi,critical,top_states\n";
    for (const auto& m : ma.modes) {
        os << m.index << ',' << fmt(m.eigenvalue.real()) << ',' << fmt(m.eigenvalue.imag()) << ','
           << fmt(m.damping) << ',' << fmt(m.frequency_hz) << ',' << to_string(m.classification) << ','
           << fmt(m.ccbg_pi) << ',' << (m.is_critical ? 1 : 0) << ',';
        const auto top = top_participants(m, 5);
        for (std::size_t k = 0; k < top.size(); ++k)
            os << (k ? ";" : "") << ma.state_matrix.labels[top[k]].full_name() << ':'
               << fmt(m.participation[static_cast<Eigen::Index>(top[k])]);
        os << '\n';
    }
    return os.str();
}

/// Network data and solved operating point.
inline json network_to_json(const Network& net, const std::vector<DeviceSpec>& devices,
                            const PowerFlowSolution* pf = nullptr) {
    json buses = json::array();
    for (const auto& b : net.buses) {
        json jb{{"id", b.id},
                {"name", b.name},
                {"kind", b.kind == BusKind::slack ? "slack" : b.kind == BusKind::pv ? "pv" : "pq"},
                {"base_kv", b.base_kv},
                {"p_load", b.p_load},
                {"q_load", b.q_load},
                {"p_gen", b.p_gen},
                {"g_shunt", b.g_shunt},
                {"b_shunt", b.b_shunt},
                {"voltage_setpoint", b.voltage_mag}};
        if (pf) {
            const cplx v = pf->voltage_at(b.id);
            jb["vm"] = std::abs(v);
            jb["va_deg"] = std::arg(v) * 180.0 / std::numbers::pi;
            jb["p_injected"] = pf->p_at(b.id);
            jb["q_injected"] = pf->q_at(b.id);
        }
        buses.push_back(jb);
    }
    json branches = json::array();
    for (const auto& br : net.branches)
        branches.push_back({{"from", br.from}, {"to", br.to}, {"r", br.r}, {"x", br.x}, {"b", br.b_shunt},
                            {"tap", br.tap}, {"in_service", br.in_service}, {"name", br.name}});
    json devs = json::array();
    for (const auto& d : devices)
        std::visit(
            [&](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                devs.push_back({{"id", s.id},
                                {"bus", s.bus},
                                {"type", std::is_same_v<T, SyncGenSpec> ? "synchronous" : "dfig"},
                                {"base_mva", s.params.base_mva}});
            },
            d);
    json out{{"base_mva", net.system_base_mva},
             {"frequency_hz", net.nominal_frequency_hz},
             {"buses", buses},
             {"branches", branches},
             {"devices", devs}};
    if (pf)
        out["power_flow"] = {{"iterations", pf->iterations},
                             {"mismatch", pf->mismatch_norm},
                             {"total_generation", pf->total_generation},
                             {"total_load", pf->total_load},
                             {"losses", pf->losses}};
    return out;
}

/// Scenario files (*.json) in a directory, sorted by file name.
inline std::vector<std::string> scenario_files(const std::string& dir) {
    std::vector<std::string> out;
    std::error_code ec;
    for (const auto& e : std::filesystem::directory_iterator(dir, ec))
        if (e.is_regular_file() && e.path().extension() == ".json")
            out.push_back(e.path().string());
    if (ec)
        throw ValidationError("cannot read scenario directory " + dir + ": " + ec.message());
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace dfigss
