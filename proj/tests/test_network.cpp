#include <gtest/gtest.h>

#include <dfigss/dfigss.hpp>

using namespace dfigss;

namespace {

Network two_bus(double b_shunt = 0.0) {
    Network net;
    net.buses.push_back({.id = 1, .kind = BusKind::slack, .voltage_mag = 1.0});
    net.buses.push_back({.id = 2, .kind = BusKind::pq});
    net.branches.push_back({.from = 1, .to = 2, .r = 0.0, .x = 0.1, .b_shunt = b_shunt});
    return net;
}

// Complex injections recomputed from the solved voltages.
Eigen::VectorXcd injections(const Network& net, const Eigen::VectorXcd& v) {
    return v.cwiseProduct((build_ybus(net) * v).conjugate());
}

} // namespace

TEST(Ybus, SingleBranch) {
    const auto y = build_ybus(two_bus());
    EXPECT_NEAR(std::abs(y(0, 0) - cplx(0, -10)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(y(1, 1) - cplx(0, -10)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(y(0, 1) - cplx(0, 10)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(y(1, 0) - cplx(0, 10)), 0.0, 1e-12);
}

TEST(Ybus, HalfLineChargingOnEachEnd) {
    const auto y0 = build_ybus(two_bus());
    const auto y = build_ybus(two_bus(0.2));
    EXPECT_NEAR(std::abs(y(0, 0) - y0(0, 0) - cplx(0, 0.1)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(y(1, 1) - y0(1, 1) - cplx(0, 0.1)), 0.0, 1e-12);
    EXPECT_EQ(y(0, 1), y0(0, 1));
}

TEST(Ybus, HandAssembledThreeBus) {
    Network net;
    net.buses.push_back({.id = 1, .kind = BusKind::slack});
    net.buses.push_back({.id = 2, .kind = BusKind::pq, .b_shunt = 0.3});
    net.buses.push_back({.id = 3, .kind = BusKind::pq});
    net.branches.push_back({.from = 1, .to = 2, .r = 0.01, .x = 0.1, .b_shunt = 0.02});
    net.branches.push_back({.from = 2, .to = 3, .r = 0.02, .x = 0.2});
    net.branches.push_back({.from = 1, .to = 3, .r = 0.0, .x = 0.25, .b_shunt = 0.04});
    const cplx y12 = 1.0 / cplx(0.01, 0.1), y23 = 1.0 / cplx(0.02, 0.2), y13 = 1.0 / cplx(0.0, 0.25);
    Eigen::Matrix3cd ref;
    ref << y12 + y13 + cplx(0, 0.01 + 0.02), -y12, -y13,
           -y12, y12 + y23 + cplx(0, 0.01 + 0.3), -y23,
           -y13, -y23, y23 + y13 + cplx(0, 0.02);
    EXPECT_LT((build_ybus(net) - ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Ybus, RowSumsEqualShuntAdmittance) {
    for (auto kind : {ScenarioKind::A, ScenarioKind::B, ScenarioKind::C}) {
        const auto sys = build_kundur_two_area(kind);
        const auto y = build_ybus(sys.network);
        for (std::size_t i = 0; i < sys.network.bus_count(); ++i) {
            cplx shunt(sys.network.buses[i].g_shunt, sys.network.buses[i].b_shunt);
            for (const auto& br : sys.network.branches)
                if (br.from == sys.network.buses[i].id || br.to == sys.network.buses[i].id)
                    shunt += cplx(0.0, br.b_shunt / 2.0);
            const auto ii = static_cast<Eigen::Index>(i);
            EXPECT_LT(std::abs(y.row(ii).sum() - shunt), 1e-9) << "bus " << sys.network.buses[i].id;
        }
    }
}

TEST(Ybus, KundurDimensionAndSymmetry) {
    for (auto kind : {ScenarioKind::A, ScenarioKind::B, ScenarioKind::C}) {
        const auto sys = build_kundur_two_area(kind);
        const auto y = build_ybus(sys.network);
        EXPECT_EQ(y.rows(), static_cast<Eigen::Index>(sys.network.bus_count()));
        EXPECT_EQ(y.cols(), y.rows());
        EXPECT_LT((y - y.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Ybus, RejectsZeroReactanceAndDisconnection) {
    auto net = two_bus();
    net.branches[0].x = 0.0;
    EXPECT_THROW(build_ybus(net), ValidationError);

    auto island = two_bus();
    island.buses.push_back({.id = 3, .kind = BusKind::pq});
    EXPECT_THROW(build_ybus(island), StructuralError);

    auto tripped = two_bus();
    tripped.branches[0].in_service = false;
    EXPECT_THROW(build_ybus(tripped), StructuralError);
}

TEST(Ybus, NetworkValidation) {
    auto net = two_bus();
    net.buses[1].kind = BusKind::slack;
    EXPECT_THROW(validate(net), StructuralError);
    auto dup = two_bus();
    dup.buses[1].id = 1;
    EXPECT_THROW(validate(dup), ValidationError);
}

TEST(Fault, ApplyThenClearIsBitIdentical) {
    const auto sys = build_kundur_two_area(ScenarioKind::B);
    const auto y0 = build_ybus(sys.network);
    for (const ShuntFault f : {ShuntFault{8, std::nullopt, {1e4, 0.0}},
                               ShuntFault{std::nullopt, std::size_t{2}, {1e4, 0.0}}}) {
        const auto faulted = apply_three_phase_fault(sys.network, f);
        const auto yf = build_ybus(faulted);
        EXPECT_GT((yf - y0).cwiseAbs().maxCoeff(), 1.0);
        const auto y1 = build_ybus(clear_fault(faulted, f));
        EXPECT_TRUE((y1.array() == y0.array()).all());
    }
}

TEST(Fault, UnknownTargetsRejected) {
    const auto sys = build_kundur_two_area(ScenarioKind::A);
    EXPECT_THROW(apply_three_phase_fault(sys.network, {99, std::nullopt, {1e4, 0}}), StructuralError);
    EXPECT_THROW(apply_three_phase_fault(sys.network, {std::nullopt, std::size_t{999}, {1e4, 0}}),
                 StructuralError);
    EXPECT_THROW(apply_three_phase_fault(sys.network, {8, std::size_t{1}, {1e4, 0}}), ValidationError);
    EXPECT_THROW(clear_fault(sys.network, {8, std::nullopt, {1e4, 0}}), StructuralError);
}

TEST(PowerFlow, FlatNoLoadCase) {
    const auto sol = solve_power_flow(two_bus());
    EXPECT_EQ(sol.iterations, 0);
    for (Eigen::Index i = 0; i < sol.voltage.size(); ++i)
        EXPECT_LT(std::abs(sol.voltage[i] - cplx(1.0, 0.0)), 1e-12);
}

TEST(PowerFlow, TwoBusReinsertion) {
    auto net = two_bus();
    net.buses[1].p_load = 0.5;
    net.buses[1].q_load = 0.2;
    const auto sol = solve_power_flow(net);
    EXPECT_LE(sol.mismatch_norm, 1e-8);
    const auto s = injections(net, sol.voltage);
    EXPECT_NEAR(s[1].real(), -0.5, 1e-8);
    EXPECT_NEAR(s[1].imag(), -0.2, 1e-8);
    EXPECT_NEAR(sol.total_generation, sol.total_load + sol.losses, 1e-12);
}

TEST(PowerFlow, KundurReinsertionAndBalance) {
    for (auto kind : {ScenarioKind::A, ScenarioKind::B, ScenarioKind::C}) {
        const auto sys = build_kundur_two_area(kind);
        const auto sol = solve_power_flow(sys.network);
        const auto s = injections(sys.network, sol.voltage);
        for (std::size_t i = 0; i < sys.network.bus_count(); ++i) {
            const auto& b = sys.network.buses[i];
            const auto ii = static_cast<Eigen::Index>(i);
            if (b.kind != BusKind::slack)
                EXPECT_NEAR(s[ii].real(), b.p_gen - b.p_load, 1e-8);
            if (b.kind == BusKind::pq)
                EXPECT_NEAR(s[ii].imag(), b.q_gen - b.q_load, 1e-8);
            else
                EXPECT_NEAR(std::abs(sol.voltage[ii]), b.voltage_mag, 1e-12);
        }
        EXPECT_NEAR(sol.total_generation, sol.total_load + sol.losses, 1e-9);
        EXPECT_GT(sol.losses, 0.0);
    }
}

TEST(PowerFlow, KundurScenarioALoadingBands) {
    const auto sys = build_kundur_two_area(ScenarioKind::A);
    const auto sol = solve_power_flow(sys.network);
    const double base = sys.network.system_base_mva;
    EXPECT_NEAR(sol.total_load * base, 2300.0, 230.0);
    for (int bus : {1, 2, 3, 4})
        EXPECT_NEAR(sol.p_at(bus) * base, 600.0, 60.0) << "generator bus " << bus;
}

TEST(PowerFlow, InvariantUnderBusReordering) {
    const auto sys = build_kundur_two_area(ScenarioKind::B);
    const auto sol = solve_power_flow(sys.network);
    Network shuffled = sys.network;
    std::reverse(shuffled.buses.begin(), shuffled.buses.end());
    std::swap(shuffled.buses[1], shuffled.buses[5]);
    const auto sol2 = solve_power_flow(shuffled);
    for (const auto& b : sys.network.buses)
        EXPECT_LT(std::abs(sol.voltage_at(b.id) - sol2.voltage_at(b.id)), 1e-7) << "bus " << b.id;
}

TEST(PowerFlow, ResolveFromSolutionTakesAtMostOneIteration) {
    const auto sys = build_kundur_two_area(ScenarioKind::C);
    const auto sol = solve_power_flow(sys.network);
    PowerFlowOptions opt;
    opt.initial = sol.voltage;
    EXPECT_LE(solve_power_flow(sys.network, opt).iterations, 1);
    opt.tol = 1e-12;
    EXPECT_LE(solve_power_flow(sys.network, opt).iterations, 1);
}

TEST(PowerFlow, NonConvergenceCarriesMismatch) {
    auto net = two_bus();
    net.buses[1].p_load = 50.0; // far beyond the transfer limit of x = 0.1
    try {
        PowerFlowOptions opt;
        opt.max_iter = 10;
        solve_power_flow(net, opt);
        FAIL() << "expected a failure";
    } catch (const ConvergenceError& e) {
        EXPECT_GT(e.residual(), 1e-8);
    } catch (const SingularError&) {
    }
}

TEST(Kundur, DevicePlacement) {
    auto count = [](const TwoAreaSystem& s, bool wind) {
        int n = 0;
        for (const auto& d : s.devices)
            n += std::holds_alternative<DfigSpec>(d) == wind;
        return n;
    };
    const auto a = build_kundur_two_area(ScenarioKind::A);
    EXPECT_EQ(count(a, false), 4);
    EXPECT_EQ(count(a, true), 0);

    const auto b = build_kundur_two_area(ScenarioKind::B);
    EXPECT_EQ(count(b, false), 4);
    ASSERT_EQ(count(b, true), 1);
    for (const auto& d : b.devices)
        if (const auto* w = std::get_if<DfigSpec>(&d)) {
            EXPECT_DOUBLE_EQ(w->params.base_mva, 300.0);
            EXPECT_EQ(w->bus, b.wind_bus);
        }
    EXPECT_EQ(b.wind_bus_label, "B5");

    const auto c = build_kundur_two_area(ScenarioKind::C);
    EXPECT_EQ(count(c, false), 3);
    ASSERT_EQ(count(c, true), 1);
    for (const auto& d : c.devices) {
        if (const auto* g = std::get_if<SyncGenSpec>(&d))
            EXPECT_NE(g->id, "G4");
        if (const auto* w = std::get_if<DfigSpec>(&d))
            EXPECT_NEAR(w->params.base_mva, 600.0, 60.0);
    }
    for (const auto& d : a.devices)
        EXPECT_DOUBLE_EQ(std::get<SyncGenSpec>(d).params.base_mva, 900.0);
}
