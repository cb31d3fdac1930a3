#pragma once

#include <string>
#include <vector>

#include "power_system.hpp"

namespace dfigss {

enum class ScenarioKind { A, B, C };

inline const char* to_string(ScenarioKind k) {
    switch (k) {
    case ScenarioKind::A: return "A";
    case ScenarioKind::B: return "B";
    case ScenarioKind::C: return "C";
    }
    return "A";
}

/// Operating-point and equipment data of the two-area benchmark. Powers are
/// in MW/Mvar; the builder converts to per-unit on the 100 MVA system base.
struct TwoAreaOptions {
    double system_base_mva = 100.0;
    double load7_mw = 1000.0, load7_mvar = 100.0, cap7_mvar = 200.0;
    double load9_mw = 1300.0, load9_mvar = 100.0, cap9_mvar = 350.0;
    double dispatch_mw = 580.0;   // G2, G3, G4; G1 is the slack
    double kpss = 10.0;           // lightly damped starting system
    double wind_loading = 0.8;    // farm output / farm rating
    double farm_mva_b = 300.0;
    double farm_mva_c = 600.0;
    double farm_transformer_x = 0.15; // on farm base
    SyncGenParams machine{};
    DfigParams dfig{};
};

/// Network plus device placement for one base case.
struct TwoAreaSystem {
    Network network;
    std::vector<DeviceSpec> devices;
    int wind_bus = 0;            // converter-interfaced farm terminal
    std::string wind_bus_label;  // name of that bus on the one-line diagram
    int fault_bus = 8;           // midpoint of tie-line circuit 1
};

/// Per-kilometre 230 kV line constants on 100 MVA.
struct LineConstants {
    double r = 1e-4, x = 1e-3, b = 1.75e-3;
};

inline TwoAreaSystem build_kundur_two_area(ScenarioKind kind, const TwoAreaOptions& o = {}) {
    TwoAreaSystem sys;
    auto& net = sys.network;
    net.system_base_mva = o.system_base_mva;
    net.nominal_frequency_hz = 60.0;
    const double base = o.system_base_mva;

    auto bus = [&](int id, BusKind k, double kv, double vm, std::string name) {
        Bus b;
        b.id = id;
        b.kind = k;
        b.base_kv = kv;
        b.voltage_mag = vm;
        b.name = std::move(name);
        net.buses.push_back(b);
        return net.buses.size() - 1;
    };
    const bool has_g4 = kind != ScenarioKind::C;

    bus(1, BusKind::slack, 20.0, 1.03, "G1");
    net.buses.back().voltage_angle = 0.0;
    bus(2, BusKind::pv, 20.0, 1.01, "G2");
    bus(3, BusKind::pv, 20.0, 1.03, "G3");
    if (has_g4)
        bus(4, BusKind::pv, 20.0, 1.01, "G4");
    for (int id : {5, 6, 7, 8, 9, 10, 11})
        bus(id, BusKind::pq, 230.0, 1.0, "B" + std::to_string(id));

    for (auto& b : net.buses) {
        if (b.kind == BusKind::pv)
            b.p_gen = o.dispatch_mw / base;
        if (b.id == 7) {
            b.p_load = o.load7_mw / base;
            b.q_load = o.load7_mvar / base;
            b.b_shunt = o.cap7_mvar / base;
        }
        if (b.id == 9) {
            b.p_load = o.load9_mw / base;
            b.q_load = o.load9_mvar / base;
            b.b_shunt = o.cap9_mvar / base;
        }
    }

    const double xt = 0.15 * base / o.machine.base_mva;
    auto transformer = [&](int from, int to, double x, std::string name) {
        Branch br;
        br.from = from;
        br.to = to;
        br.x = x;
        br.name = std::move(name);
        net.branches.push_back(br);
    };
    transformer(1, 5, xt, "T1");
    transformer(2, 6, xt, "T2");
    transformer(3, 11, xt, "T3");
    if (has_g4)
        transformer(4, 10, xt, "T4");

    const LineConstants lc;
    auto line = [&](int from, int to, double km, std::string name) {
        Branch br;
        br.from = from;
        br.to = to;
        br.r = lc.r * km;
        br.x = lc.x * km;
        br.b_shunt = lc.b * km;
        br.name = std::move(name);
        net.branches.push_back(br);
    };
    line(5, 6, 25.0, "L5-6");
    line(6, 7, 10.0, "L6-7");
    line(7, 8, 110.0, "L7-8a");   // tie-line circuit 1, first half
    line(8, 9, 110.0, "L8-9a");   // tie-line circuit 1, second half
    line(7, 9, 220.0, "L7-9b");   // tie-line circuit 2
    line(9, 10, 10.0, "L9-10");
    line(10, 11, 25.0, "L10-11");

    auto add_machine = [&](const std::string& id, int at, double h) {
        SyncGenParams p = o.machine;
        p.h = h;
        p.kpss = o.kpss;
        sys.devices.emplace_back(SyncGenSpec{id, at, p});
    };
    add_machine("G1", 1, 6.5);
    add_machine("G2", 2, 6.5);
    add_machine("G3", 3, 6.175);
    if (has_g4)
        add_machine("G4", 4, 6.175);

    if (kind != ScenarioKind::A) {
        const double farm_mva = kind == ScenarioKind::B ? o.farm_mva_b : o.farm_mva_c;
        sys.wind_bus = 12;
        sys.wind_bus_label = "B5";
        bus(12, BusKind::pq, 20.0, 1.0, "WF");
        net.buses.back().p_gen = o.wind_loading * farm_mva / base;
        transformer(12, 10, o.farm_transformer_x * base / farm_mva, "TWF");
        DfigParams p = o.dfig;
        p.base_mva = farm_mva;
        sys.devices.emplace_back(DfigSpec{"WF", 12, p});
    }
    validate(net);
    return sys;
}

} // namespace dfigss
