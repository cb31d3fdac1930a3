#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kundur.hpp"
#include "simulation.hpp"

namespace dfigss {

inline constexpr const char* tool_version = "0.3.0";

using json = nlohmann::json;

/// Schema violation in a scenario document; `path()` names the field.
class SchemaError : public ValidationError {
public:
    SchemaError(std::string path, const std::string& what)
        : ValidationError(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

struct ParameterOverride {
    std::string path; // e.g. "machine.ka", "dfig.tc", "system.load9_mw"
    double value = 0.0;
    bool operator==(const ParameterOverride&) const = default;
};

struct SimulationSettings {
    double t_end = 25.0;
    double dt_max = 1e-3;
    double record_interval = 0.01;
};

struct Scenario {
    std::string name = "scenario";
    std::string description;
    ScenarioKind base_case = ScenarioKind::A;
    ControlMode control_mode = ControlMode::voltage;
    bool frequency_support = false;
    DroopParams droop{20.0, 0.0};
    std::vector<ParameterOverride> overrides;
    std::vector<Event> events;
    SimulationSettings simulation{};

    bool has_wind() const { return base_case != ScenarioKind::A; }
};

/// Standard disturbance: ten-cycle bolted fault at the tie-line midpoint.
inline Event default_tie_line_fault(int fault_bus = 8) {
    Event e;
    e.kind = EventKind::three_phase_fault;
    e.bus = fault_bus;
    e.t_start = 1.0;
    e.duration = cycles(10.0);
    e.severity = 1e4;
    return e;
}

namespace detail {

using OptionSetter = std::function<void(TwoAreaOptions&, double)>;

inline const std::map<std::string, OptionSetter>& override_table() {
    static const std::map<std::string, OptionSetter> table = [] {
        std::map<std::string, OptionSetter> t;
        auto sys = [&](const char* name, double TwoAreaOptions::*m) {
            t[std::string("system.") + name] = [m](TwoAreaOptions& o, double v) { o.*m = v; };
        };
        sys("load7_mw", &TwoAreaOptions::load7_mw);
        sys("load7_mvar", &TwoAreaOptions::load7_mvar);
        sys("cap7_mvar", &TwoAreaOptions::cap7_mvar);
        sys("load9_mw", &TwoAreaOptions::load9_mw);
        sys("load9_mvar", &TwoAreaOptions::load9_mvar);
        sys("cap9_mvar", &TwoAreaOptions::cap9_mvar);
        sys("dispatch_mw", &TwoAreaOptions::dispatch_mw);
        sys("kpss", &TwoAreaOptions::kpss);
        sys("wind_loading", &TwoAreaOptions::wind_loading);
        sys("farm_mva_b", &TwoAreaOptions::farm_mva_b);
        sys("farm_mva_c", &TwoAreaOptions::farm_mva_c);
        sys("farm_transformer_x", &TwoAreaOptions::farm_transformer_x);

        auto mach = [&](const char* name, double SyncGenParams::*m) {
            t[std::string("machine.") + name] = [m](TwoAreaOptions& o, double v) { o.machine.*m = v; };
        };
        mach("d", &SyncGenParams::d);
        mach("xd", &SyncGenParams::xd);
        mach("xq", &SyncGenParams::xq);
        mach("xd1", &SyncGenParams::xd1);
        mach("xq1", &SyncGenParams::xq1);
        mach("xd2", &SyncGenParams::xd2);
        mach("xq2", &SyncGenParams::xq2);
        mach("ra", &SyncGenParams::ra);
        mach("td01", &SyncGenParams::td01);
        mach("tq01", &SyncGenParams::tq01);
        mach("td02", &SyncGenParams::td02);
        mach("tq02", &SyncGenParams::tq02);
        mach("ka", &SyncGenParams::ka);
        mach("ta", &SyncGenParams::ta);
        mach("efd_min", &SyncGenParams::efd_min);
        mach("efd_max", &SyncGenParams::efd_max);
        mach("tw", &SyncGenParams::tw);
        mach("t1", &SyncGenParams::t1);
        mach("t2", &SyncGenParams::t2);
        mach("t3", &SyncGenParams::t3);
        mach("t4", &SyncGenParams::t4);
        mach("vpss_max", &SyncGenParams::vpss_max);
        mach("r_droop", &SyncGenParams::r_droop);
        mach("tg", &SyncGenParams::tg);

        auto wind = [&](const char* name, double DfigParams::*m) {
            t[std::string("dfig.") + name] = [m](TwoAreaOptions& o, double v) { o.dfig.*m = v; };
        };
        wind("h_turbine", &DfigParams::h_turbine);
        wind("rs", &DfigParams::rs);
        wind("rr", &DfigParams::rr);
        wind("xls", &DfigParams::xls);
        wind("xlr", &DfigParams::xlr);
        wind("xm", &DfigParams::xm);
        wind("tc", &DfigParams::tc);
        wind("kv", &DfigParams::kv);
        wind("kq", &DfigParams::kq);
        wind("i_max", &DfigParams::i_max);
        wind("p_max", &DfigParams::p_max);
        wind("pll_kp", &DfigParams::pll_kp);
        wind("pll_ki", &DfigParams::pll_ki);
        wind("freq_filter_time", &DfigParams::freq_filter_time);
        wind("pitch_angle", &DfigParams::pitch_angle);
        wind("speed_min", &DfigParams::speed_min);
        wind("speed_max", &DfigParams::speed_max);
        return t;
    }();
    return table;
}

inline bool is_wind_override(const std::string& path) {
    return path.rfind("dfig.", 0) == 0 || path == "system.wind_loading" ||
           path.rfind("system.farm_", 0) == 0;
}

inline void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object())
        throw SchemaError(path.empty() ? "<root>" : path, "expected an object");
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed)
            ok |= key == a;
        if (!ok)
            throw SchemaError(path.empty() ? key : path + "." + key, "unknown field");
    }
}

inline std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

inline double get_number(const json& obj, const std::string& key, const std::string& path, double fallback) {
    if (!obj.contains(key))
        return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number())
        throw SchemaError(join(path, key), "expected a number");
    return v.get<double>();
}

inline std::string get_string(const json& obj, const std::string& key, const std::string& path,
                              const std::string& fallback) {
    if (!obj.contains(key))
        return fallback;
    const auto& v = obj.at(key);
    if (!v.is_string())
        throw SchemaError(join(path, key), "expected a string");
    return v.get<std::string>();
}

inline bool get_bool(const json& obj, const std::string& key, const std::string& path, bool fallback) {
    if (!obj.contains(key))
        return fallback;
    const auto& v = obj.at(key);
    if (!v.is_boolean())
        throw SchemaError(join(path, key), "expected true or false");
    return v.get<bool>();
}

inline Event parse_event(const json& e, const std::string& path) {
    check_keys(e, path, {"kind", "bus", "branch", "t_start", "duration", "duration_cycles", "severity"});
    Event ev;
    const auto kind = get_string(e, "kind", path, "three_phase_fault");
    try {
        ev.kind = event_kind_from_string(kind);
    } catch (const ValidationError& err) {
        throw SchemaError(join(path, "kind"), err.what());
    }
    if (e.contains("bus")) {
        if (!e.at("bus").is_number_integer())
            throw SchemaError(join(path, "bus"), "expected an integer bus id");
        ev.bus = e.at("bus").get<int>();
    }
    if (e.contains("branch")) {
        if (!e.at("branch").is_number_unsigned())
            throw SchemaError(join(path, "branch"), "expected a non-negative branch index");
        ev.branch = e.at("branch").get<std::size_t>();
    }
    ev.t_start = get_number(e, "t_start", path, 1.0);
    if (e.contains("duration") && e.contains("duration_cycles"))
        throw SchemaError(join(path, "duration_cycles"), "give duration or duration_cycles, not both");
    ev.duration = get_number(e, "duration", path, 0.0);
    if (e.contains("duration_cycles"))
        ev.duration = cycles(get_number(e, "duration_cycles", path, 0.0));
    ev.severity = get_number(e, "severity", path, ev.kind == EventKind::load_step ? 0.0 : 1e4);
    try {
        ev.validate();
    } catch (const ValidationError& err) {
        throw SchemaError(path, err.what());
    }
    return ev;
}

} // namespace detail

/// Parses and resolves a scenario document. Unknown keys, type errors and
/// fields that do not apply to the chosen base case are rejected with the
/// offending field path.
inline Scenario parse_scenario(const json& doc) {
    using namespace detail;
    check_keys(doc, "", {"name", "description", "base_case", "control_mode", "frequency_support", "droop",
                         "overrides", "events", "simulation"});
    Scenario s;
    const auto base = get_string(doc, "base_case", "", "");
    if (base.empty())
        throw SchemaError("base_case", "required field missing");
    if (base == "A")
        s.base_case = ScenarioKind::A;
    else if (base == "B")
        s.base_case = ScenarioKind::B;
    else if (base == "C")
        s.base_case = ScenarioKind::C;
    else
        throw SchemaError("base_case", "expected \"A\", \"B\" or \"C\"");
    s.name = get_string(doc, "name", "", std::string("case_") + base);
    s.description = get_string(doc, "description", "", "");

    if (!s.has_wind())
        for (const char* key : {"control_mode", "frequency_support", "droop"})
            if (doc.contains(key))
                throw SchemaError(key, "base case A has no wind farm");

    const auto mode = get_string(doc, "control_mode", "", "voltage");
    if (mode == "voltage")
        s.control_mode = ControlMode::voltage;
    else if (mode == "reactive_power")
        s.control_mode = ControlMode::reactive_power;
    else
        throw SchemaError("control_mode", "expected \"voltage\" or \"reactive_power\"");
    s.frequency_support = get_bool(doc, "frequency_support", "", false);

    if (doc.contains("droop")) {
        const auto& d = doc.at("droop");
        check_keys(d, "droop", {"kp", "kin", "rocof_filter_time"});
        s.droop.kp = get_number(d, "kp", "droop", s.droop.kp);
        s.droop.kin = get_number(d, "kin", "droop", s.droop.kin);
        s.droop.rocof_filter_time = get_number(d, "rocof_filter_time", "droop", s.droop.rocof_filter_time);
    }
    s.droop.enabled = s.frequency_support;
    try {
        s.droop.validate();
    } catch (const ValidationError& e) {
        throw SchemaError("droop", e.what());
    }

    if (doc.contains("overrides")) {
        const auto& list = doc.at("overrides");
        if (!list.is_array())
            throw SchemaError("overrides", "expected a list of {path, value}");
        for (std::size_t i = 0; i < list.size(); ++i) {
            const std::string p = "overrides[" + std::to_string(i) + "]";
            check_keys(list[i], p, {"path", "value"});
            ParameterOverride o;
            o.path = get_string(list[i], "path", p, "");
            if (!list[i].contains("value"))
                throw SchemaError(join(p, "value"), "required field missing");
            o.value = get_number(list[i], "value", p, 0.0);
            if (!override_table().contains(o.path))
                throw SchemaError(join(p, "path"), "unknown parameter '" + o.path + "'");
            if (!s.has_wind() && is_wind_override(o.path))
                throw SchemaError(join(p, "path"), "base case A has no wind farm");
            s.overrides.push_back(o);
        }
    }

    if (doc.contains("events")) {
        const auto& list = doc.at("events");
        if (!list.is_array())
            throw SchemaError("events", "expected a list");
        for (std::size_t i = 0; i < list.size(); ++i)
            s.events.push_back(parse_event(list[i], "events[" + std::to_string(i) + "]"));
        for (std::size_t i = 1; i < s.events.size(); ++i)
            if (s.events[i].t_start < s.events[i - 1].t_start)
                throw SchemaError("events[" + std::to_string(i) + "].t_start", "events must be sorted");
    } else {
        s.events.push_back(default_tie_line_fault());
    }

    if (doc.contains("simulation")) {
        const auto& sim = doc.at("simulation");
        check_keys(sim, "simulation", {"t_end", "dt_max", "record_interval"});
        s.simulation.t_end = get_number(sim, "t_end", "simulation", s.simulation.t_end);
        s.simulation.dt_max = get_number(sim, "dt_max", "simulation", s.simulation.dt_max);
        s.simulation.record_interval =
            get_number(sim, "record_interval", "simulation", s.simulation.record_interval);
        if (!(s.simulation.t_end > 0.0))
            throw SchemaError("simulation.t_end", "must be positive");
        if (!(s.simulation.dt_max > 0.0))
            throw SchemaError("simulation.dt_max", "must be positive");
        if (!(s.simulation.record_interval >= 0.0))
            throw SchemaError("simulation.record_interval", "must be non-negative");
    }
    return s;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw ValidationError("cannot open scenario file " + path);
    json doc;
    try {
        doc = json::parse(is);
    } catch (const json::parse_error& e) {
        throw SchemaError("<root>", std::string("invalid JSON: ") + e.what());
    }
    return parse_scenario(doc);
}

/// Canonical, fully resolved form (defaults made explicit). parse_scenario
/// of this document reproduces the scenario.
inline json scenario_to_json(const Scenario& s) {
    json doc;
    doc["name"] = s.name;
    doc["description"] = s.description;
    doc["base_case"] = to_string(s.base_case);
    if (s.has_wind()) {
        doc["control_mode"] = to_string(s.control_mode);
        doc["frequency_support"] = s.frequency_support;
        doc["droop"] = {{"kp", s.droop.kp}, {"kin", s.droop.kin}, {"rocof_filter_time", s.droop.rocof_filter_time}};
    }
    doc["overrides"] = json::array();
    for (const auto& o : s.overrides)
        doc["overrides"].push_back({{"path", o.path}, {"value", o.value}});
    doc["events"] = json::array();
    for (const auto& e : s.events) {
        json j{{"kind", to_string(e.kind)}, {"t_start", e.t_start}, {"duration", e.duration}, {"severity", e.severity}};
        if (e.bus)
            j["bus"] = *e.bus;
        if (e.branch)
            j["branch"] = *e.branch;
        doc["events"].push_back(j);
    }
    doc["simulation"] = {{"t_end", s.simulation.t_end},
                         {"dt_max", s.simulation.dt_max},
                         {"record_interval", s.simulation.record_interval}};
    return doc;
}

/// 64-bit FNV-1a hash of the canonical scenario document, as 16 hex digits.
inline std::string scenario_hash(const Scenario& s) {
    const std::string text = scenario_to_json(s).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

/// Benchmark options with the scenario's control settings and patches applied.
inline TwoAreaOptions scenario_options(const Scenario& s) {
    TwoAreaOptions o;
    o.dfig.control_mode = s.control_mode;
    o.dfig.droop = s.droop;
    o.dfig.droop.enabled = s.frequency_support;
    for (const auto& p : s.overrides)
        detail::override_table().at(p.path)(o, p.value);
    return o;
}

} // namespace dfigss
