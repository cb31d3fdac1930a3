#include <gtest/gtest.h>

#include <dfigss/dfigss.hpp>

#include <sstream>

using namespace dfigss;
using namespace dfigss::smib;

namespace {

const std::vector<double> grid_axis{0, 10, 20, 30, 40, 50};

// Roots of the 2x2 matrix by Eigen, positive-imaginary root first.
cplx numeric_root(const SmibParams& p) {
    Eigen::EigenSolver<Eigen::Matrix2d> es(smib_system_matrix(p));
    const auto ev = es.eigenvalues();
    return ev[0].imag() >= ev[1].imag() ? ev[0] : ev[1];
}

} // namespace

TEST(SmibMatrix, BaselineEntries) {
    const auto a = smib_system_matrix(SmibParams::with_gains(0, 0));
    EXPECT_NEAR(a(0, 0), -1.42857, 1e-5);
    EXPECT_NEAR(a(0, 1), -0.107143, 1e-6);
    EXPECT_NEAR(a(1, 0), 376.991, 1e-3);
    EXPECT_EQ(a(1, 1), 0.0);
}

TEST(SmibMatrix, ProportionalGainEntry) {
    const auto p = SmibParams::with_gains(40, 0);
    EXPECT_NEAR(smib_system_matrix(p)(0, 0), -50.0 / 7.0, 1e-12);
    // the real part of the eigenvalue is half the trace
    EXPECT_NEAR(smib_eigenvalues(p).lambda.real(), -50.0 / 14.0, 1e-12);
}

TEST(SmibMatrix, SingularDenominatorRejected) {
    SmibParams p = SmibParams::with_gains(0, 0);
    p.droop.kin = -2.0 * p.h;
    EXPECT_THROW(smib_system_matrix(p), ValidationError);
    EXPECT_THROW(smib_eigenvalues(p), ValidationError);
    EXPECT_THROW(p.validate(), ValidationError);
}

TEST(SmibMatrix, TraceAndDeterminant) {
    for (double kp : grid_axis)
        for (double kin : grid_axis) {
            const auto p = SmibParams::with_gains(kp, kin);
            const auto a = smib_system_matrix(p);
            const double m = 2 * p.h + kin;
            EXPECT_NEAR(a.trace(), -(kp + p.kd) / m, 1e-12);
            EXPECT_NEAR(a.determinant(), p.ks * p.omega0 / m, 1e-10);
        }
}

TEST(SmibEigen, OracleValues) {
    // independent high-precision evaluation of the quadratic roots, w0 = 120 pi
    struct Case {
        double kp, kin, re, im, zeta;
    };
    for (const auto& c : {Case{0, 0, -0.71428571428571429, 6.3151960749070833, 0.11238925522412257},
                          Case{40, 0, -3.5714285714285714, 5.2570717614788328, 0.56194627612061287},
                          Case{0, 50, -0.087719298245614035, 2.2254695634296625, 0.039385502014406965}}) {
        const auto r = smib_record(SmibParams::with_gains(c.kp, c.kin));
        EXPECT_NEAR(r.lambda.real(), c.re, 1e-12);
        EXPECT_NEAR(r.lambda.imag(), c.im, 1e-12);
        EXPECT_NEAR(r.damping, c.zeta, 1e-12);
        EXPECT_TRUE(r.oscillatory);
    }
}

TEST(SmibEigen, FourDigitValues) {
    struct Case {
        double kp, kin, re, im, zeta;
    };
    for (const auto& c : {Case{0, 0, -0.7143, 6.3153, 0.1124}, Case{40, 0, -3.5714, 5.257, 0.562},
                          Case{0, 50, -0.0877, 2.2256, 0.0394}}) {
        const auto r = smib_record(SmibParams::with_gains(c.kp, c.kin));
        EXPECT_NEAR(r.lambda.real(), c.re, 1e-4);
        EXPECT_NEAR(r.lambda.imag(), c.im, 2e-4);
        EXPECT_NEAR(r.damping, c.zeta, 1e-3);
    }
    EXPECT_NEAR(smib_record(SmibParams::with_gains(0, 0)).freq_hz, 1.005, 1e-3);
}

TEST(SmibEigen, ClosedFormMatchesNumericOnGrid) {
    for (double kp : grid_axis)
        for (double kin : grid_axis) {
            const auto p = SmibParams::with_gains(kp, kin);
            const auto e = smib_eigenvalues(p);
            const cplx n = numeric_root(p);
            EXPECT_LE(std::abs(e.lambda - n), 1e-9 * std::abs(n));
            EXPECT_EQ(e.other, std::conj(e.lambda));
        }
}

TEST(SmibEigen, DampingClosedFormIsConsistent) {
    for (double kp : grid_axis)
        for (double kin : grid_axis) {
            const auto p = SmibParams::with_gains(kp, kin);
            const auto r = smib_record(p);
            EXPECT_NEAR(r.damping, smib_damping_closed_form(p), 1e-12);
            EXPECT_NEAR(r.damping, damping_ratio(r.lambda), 1e-12);
        }
}

TEST(SmibEigen, RealRootsFlaggedWithUnitDamping) {
    auto p = SmibParams::with_gains(500, 0);
    const auto r = smib_record(p);
    EXPECT_FALSE(r.oscillatory);
    EXPECT_EQ(r.damping, 1.0);
    EXPECT_EQ(r.lambda.imag(), 0.0);
    const auto e = smib_eigenvalues(p);
    EXPECT_GT(e.lambda.real(), e.other.real());
    Eigen::EigenSolver<Eigen::Matrix2d> es(smib_system_matrix(p));
    const double lo = std::min(es.eigenvalues()[0].real(), es.eigenvalues()[1].real());
    EXPECT_NEAR(e.other.real(), lo, 1e-9 * std::abs(lo));
}

TEST(SmibGrid, ThirtySixRecordsKpFastest) {
    const auto g = smib_sensitivity_grid({}, grid_axis, grid_axis);
    ASSERT_EQ(g.size(), 36u);
    EXPECT_EQ(g[1].kp, 10.0);
    EXPECT_EQ(g[1].kin, 0.0);
    EXPECT_EQ(g[6].kin, 10.0);
    std::ostringstream os;
    write_smib_csv(os, g);
    const std::string text = os.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 37);
    EXPECT_EQ(text.substr(0, text.find('\n')), "kp,kin,re,im,damping,freq_hz,oscillatory_flag");
}

TEST(SmibGrid, DampingIncreasesAlongKp) {
    const auto g = smib_sensitivity_grid({}, grid_axis, grid_axis);
    for (std::size_t j = 0; j < grid_axis.size(); ++j)
        for (std::size_t i = 1; i < grid_axis.size(); ++i)
            EXPECT_GT(g[j * 6 + i].damping, g[j * 6 + i - 1].damping);
}

TEST(SmibGrid, InertiaGainDegradesDamping) {
    const auto g = smib_sensitivity_grid({}, grid_axis, grid_axis);
    for (std::size_t j = 1; j < grid_axis.size(); ++j)
        EXPECT_LT(g[j * 6].damping, g[(j - 1) * 6].damping);
}

TEST(SmibGrid, SinglePointMatchesDirectEvaluation) {
    const auto g = smib_sensitivity_grid({}, {30}, {20});
    ASSERT_EQ(g.size(), 1u);
    EXPECT_EQ(g[0].lambda, smib_eigenvalues(SmibParams::with_gains(30, 20)).lambda);
    EXPECT_THROW(smib_sensitivity_grid({}, {}, {1.0}), ValidationError);
}

TEST(SmibPipeline, LinearizeReproducesAnalyticMatrix) {
    // Nonlinear SMIB whose linearization is the analytic 2x2 matrix.
    const auto p = SmibParams::with_gains(0, 0);
    const double m = 2 * p.h;
    auto f = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd d(2);
        d[0] = (-p.kd * x[0] - p.ks * std::sin(x[1])) / m;
        d[1] = p.omega0 * x[0];
        return d;
    };
    const auto sm = linearize(f, Eigen::VectorXd::Zero(2), {{"smib", "delta_f"}, {"smib", "delta_delta"}});
    EXPECT_LE((sm.a - smib_system_matrix(p)).cwiseAbs().maxCoeff(), 1e-8);
    const auto ma = analyze_modes(sm);
    const auto dom = dominant_modes(ma.modes);
    ASSERT_EQ(dom.size(), 1u);
    const auto& mode = dom.begin()->second;
    const cplx ref = smib_eigenvalues(p).lambda;
    EXPECT_LE(std::abs(mode.eigenvalue - ref), 1e-6 * std::abs(ref));
    EXPECT_LE(std::abs(mode.damping - 0.1124), 1e-4);
}

TEST(Aggregate, InitialRocofAndFlatEquilibrium) {
    AggregateModel m;
    const auto tr = aggregate_frequency_response(m, 0.1, 1.0);
    EXPECT_NEAR(tr.rocof.front(), -0.01, 1e-15);
    EXPECT_NEAR(tr.delta_f.back(), -0.01, 1e-12);
    const auto flat = aggregate_frequency_response(m, 0.0, 5.0);
    for (double f : flat.delta_f)
        EXPECT_EQ(f, 0.0);
}

TEST(Aggregate, StaticDroopBalance) {
    AggregateModel m;
    m.p_reg = [](double f) { return -20.0 * f; };
    const auto tr = aggregate_frequency_response(m, 0.1, 20.0);
    EXPECT_NEAR(tr.delta_f.back(), -0.005, 1e-9);
}

TEST(Aggregate, RejectsNonPositiveInertia) {
    AggregateModel m;
    m.h_sys = 0.0;
    EXPECT_THROW(aggregate_frequency_response(m, 0.1, 1.0), ValidationError);
}
