// Acceptance run: one PASS/FAIL line per criterion, informational lines
// prefixed with "info". Exit status is nonzero when any criterion fails.

#include <dfigss/dfigss.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>

using namespace dfigss;

namespace {

// tolerances and limits
constexpr double smib_equivalence_rel = 1e-9;
constexpr double smib_baseline_tol = 1e-6;
constexpr double pipeline_rel = 1e-6;
constexpr double smib_runtime_s = 1.0;
constexpr double case_a_runtime_s = 30.0;
constexpr double ringdown_runtime_s = 120.0;
constexpr double inter_area_min_hz = 0.35, inter_area_max_hz = 0.70, inter_area_max_zeta = 0.05;
constexpr double local_min_hz = 0.9, local_max_hz = 1.6;
constexpr double converter_min_ccbg = 0.9;
constexpr double ringdown_sigma_rel = 0.20, ringdown_omega_rel = 0.10;
constexpr double droop_ratio_min = 10.0;
constexpr double participation_sum_tol = 1e-10;
constexpr double conjugate_tol = 1e-10;
constexpr double reinsertion_tol = 1e-8;
constexpr double linearization_ratio_min = 3.5;
constexpr double dt_halving_rel = 1e-3;

// independent high-precision roots of the SMIB characteristic polynomial
// (H = 3.5 s, KD = 10, KS = 0.75, w0 = 120 pi)
struct Oracle {
    double kp, kin, re, im, zeta;
};
constexpr Oracle baseline{0, 0, -0.71428571428571429, 6.3151960749070833, 0.11238925522412257};
constexpr Oracle inertia50{0, 50, -0.087719298245614035, 2.2254695634296625, 0.039385502014406965};

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

int failures = 0;

void report(int n, bool pass, const std::string& detail) {
    std::printf("criterion %d: %s  %s\n", n, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    failures += pass ? 0 : 1;
}

void info(const std::string& text) {
    std::printf("info: %s\n", text.c_str());
    std::fflush(stdout);
}

template <class... Args>
std::string fmt(const char* f, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

void guarded(int n, const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        report(n, false, std::string("exception: ") + e.what());
    }
}

Scenario scenario(const std::string& name) {
    return load_scenario(std::string(DFIGSS_SCENARIO_DIR) + "/" + name + ".json");
}

std::map<std::string, ScenarioRun>& runs() {
    static std::map<std::string, ScenarioRun> cache;
    return cache;
}

const ScenarioRun& run(const std::string& name) {
    auto& c = runs();
    auto it = c.find(name);
    if (it == c.end())
        it = c.emplace(name, analyze_scenario(scenario(name))).first;
    return it->second;
}

Report rep(const std::string& name) { return make_report(run(name)); }

const ModeSummary& dom(const Report& r, const std::string& cls) {
    auto it = r.dominant.find(cls);
    if (it == r.dominant.end())
        throw std::runtime_error(r.scenario + " has no dominant " + cls + " mode");
    return it->second;
}

double rel(cplx a, cplx b) { return std::abs(a - b) / std::abs(b); }

const std::vector<double> axis{0, 10, 20, 30, 40, 50};

// Nonlinear SMIB (sin of the angle) whose Jacobian at the origin is the 2x2 model.
Eigen::VectorXd smib_field(const smib::SmibParams& p, const Eigen::VectorXd& x) {
    const double m = 2.0 * p.h + p.active_kin();
    Eigen::VectorXd d(2);
    d[0] = (-(p.active_kp() + p.kd) * x[0] - p.ks * std::sin(x[1])) / m;
    d[1] = p.omega0 * x[0];
    return d;
}

void criterion1() {
    const auto t0 = clock_type::now();
    double worst = 0.0;
    int points = 0;
    for (double kin : axis)
        for (double kp : axis) {
            const auto p = smib::SmibParams::with_gains(kp, kin);
            const auto closed = smib::smib_eigenvalues(p);
            Eigen::EigenSolver<Eigen::Matrix2d> es(smib::smib_system_matrix(p));
            for (int k = 0; k < 2; ++k) {
                const cplx n = es.eigenvalues()[k];
                const cplx c = n.imag() >= 0.0 ? closed.lambda : closed.other;
                worst = std::max(worst, rel(c, n));
            }
            ++points;
        }
    const double dt = seconds_since(t0);
    report(1, points == 36 && worst <= smib_equivalence_rel && dt < smib_runtime_s,
           fmt("%d grid points, worst relative difference %.2e (tol %.0e), %.3f s (limit %.0f s)", points, worst,
               smib_equivalence_rel, dt, smib_runtime_s));
}

void criterion2() {
    const auto r = smib::smib_record(smib::SmibParams::with_gains(0, 0));
    const double e = std::max({std::abs(r.lambda.real() - baseline.re), std::abs(r.lambda.imag() - baseline.im),
                               std::abs(r.damping - baseline.zeta)});
    report(2, e <= smib_baseline_tol,
           fmt("lambda = %.4f %+.4fi, zeta = %.4f; max deviation from oracle %.2e (tol %.0e)", r.lambda.real(),
               r.lambda.imag(), r.damping, e, smib_baseline_tol));
}

void criterion3() {
    // dzeta/dKp from the numeric eigenvalues by central differences
    int checked = 0, positive = 0;
    for (double kin : axis)
        for (double kp : axis) {
            const double h = 1e-3;
            auto zeta = [&](double k) {
                Eigen::EigenSolver<Eigen::Matrix2d> es(smib::smib_system_matrix(smib::SmibParams::with_gains(k, kin)));
                return damping_ratio(es.eigenvalues()[0]);
            };
            const double d = (zeta(kp + h) - zeta(std::max(0.0, kp - h))) / (kp + h - std::max(0.0, kp - h));
            ++checked;
            positive += d > 0.0;
        }
    int drops = 0;
    for (double kp : axis)
        for (std::size_t j = 1; j < axis.size(); ++j)
            drops += smib::smib_record(smib::SmibParams::with_gains(kp, axis[j])).damping <
                     smib::smib_record(smib::SmibParams::with_gains(kp, axis[j - 1])).damping;
    const double z0 = smib::smib_record(smib::SmibParams::with_gains(0, 0)).damping;
    const double z50 = smib::smib_record(smib::SmibParams::with_gains(0, 50)).damping;
    const bool example = std::abs(z50 - inertia50.zeta) <= smib_baseline_tol && z50 < z0;
    report(3, positive == checked && drops > 0 && example,
           fmt("dzeta/dKp > 0 at %d/%d points; K_in increase lowers zeta at %d steps; K_p=0: %.3f -> %.3f", positive,
               checked, drops, z0, z50));
}

void criterion4() {
    const auto p = smib::SmibParams::with_gains(0, 0);
    const auto sm = linearize([&](const Eigen::VectorXd& x) { return smib_field(p, x); }, Eigen::VectorXd::Zero(2),
                              {{"smib", "delta_f"}, {"smib", "delta_delta"}});
    const auto ma = analyze_modes(sm);
    const auto d = dominant_modes(ma.modes);
    if (d.size() != 1)
        throw std::runtime_error("expected a single oscillatory SMIB mode");
    const auto& m = d.begin()->second;
    const cplx ref(baseline.re, baseline.im);
    const double e = rel(m.eigenvalue, ref);
    const double ez = std::abs(m.damping - baseline.zeta) / baseline.zeta;
    report(4, e <= pipeline_rel && ez <= pipeline_rel,
           fmt("pipeline lambda = %.6f %+.6fi, zeta = %.6f; relative error %.2e / %.2e (tol %.0e)",
               m.eigenvalue.real(), m.eigenvalue.imag(), m.damping, e, ez, pipeline_rel));
}

void criterion5() {
    const auto t0 = clock_type::now();
    const auto r = run_scenario(scenario("case_A"));
    const double dt = seconds_since(t0);
    const auto& ia = dom(r, "inter_area");
    const auto& lo = dom(r, "local");
    const bool ok = ia.frequency_hz >= inter_area_min_hz && ia.frequency_hz <= inter_area_max_hz &&
                    ia.damping <= inter_area_max_zeta && lo.frequency_hz >= local_min_hz &&
                    lo.frequency_hz <= local_max_hz && dt < case_a_runtime_s;
    report(5, ok,
           fmt("inter-area %.3f Hz zeta %.4f (band %.2f-%.2f Hz, zeta <= %.2f); local %.3f Hz (band %.1f-%.1f Hz); "
               "%.2f s",
               ia.frequency_hz, ia.damping, inter_area_min_hz, inter_area_max_hz, inter_area_max_zeta,
               lo.frequency_hz, local_min_hz, local_max_hz, dt));
}

void criterion6() {
    const auto b_off = rep("case_B_V_nosupport"), b_on = rep("case_B_V_support");
    const bool a = dom(b_on, "inter_area").damping > dom(b_off, "inter_area").damping;
    const bool b = dom(b_on, "converter_control").damping < dom(b_off, "converter_control").damping;
    const bool c = dom(b_on, "converter_control").ccbg_pi < dom(b_off, "converter_control").ccbg_pi;

    const std::vector<std::string> wind{"case_B_V_nosupport", "case_B_V_support", "case_B_Q_nosupport",
                                        "case_B_Q_support",   "case_C_V_nosupport", "case_C_V_support",
                                        "case_C_Q_nosupport", "case_C_Q_support"};
    std::string best;
    double best_zeta = -1.0;
    int ties = 0;
    double min_ccbg = 2.0;
    for (const auto& n : wind) {
        const auto r = rep(n);
        const double z = dom(r, "inter_area").damping;
        if (z > best_zeta) {
            best_zeta = z;
            best = n;
            ties = 0;
        } else if (z == best_zeta) {
            ++ties;
        }
        if (!r.frequency_support && r.dominant.count("converter_control"))
            min_ccbg = std::min(min_ccbg, dom(r, "converter_control").ccbg_pi);
    }
    const bool d = best.rfind("case_C_", 0) == 0 && best.find("_support") != std::string::npos &&
                   best.find("nosupport") == std::string::npos && ties == 0;
    const bool e = dom(b_off, "converter_control").ccbg_pi > converter_min_ccbg && min_ccbg > converter_min_ccbg;
    report(6, a && b && c && d && e,
           fmt("(a) %s zeta_ia %.4f -> %.4f; (b) %s zeta_cc %.4f -> %.4f; (c) %s ccbg %.3f -> %.3f; "
               "(d) %s highest zeta_ia %s %.4f; (e) %s min ccbg without support %.3f",
               a ? "ok" : "no", dom(b_off, "inter_area").damping, dom(b_on, "inter_area").damping, b ? "ok" : "no",
               dom(b_off, "converter_control").damping, dom(b_on, "converter_control").damping, c ? "ok" : "no",
               dom(b_off, "converter_control").ccbg_pi, dom(b_on, "converter_control").ccbg_pi, d ? "ok" : "no",
               best.c_str(), best_zeta, e ? "ok" : "no", min_ccbg));
}

std::vector<double> speed_difference(const Trace& tr, const std::string& a, const std::string& b) {
    const auto wa = tr.rotor_speed(a), wb = tr.rotor_speed(b);
    std::vector<double> d(wa.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        d[i] = wa[i] - wb[i];
    return d;
}

void criterion7() {
    auto s = scenario("case_A");
    s.simulation.t_end = 25.0;
    s.simulation.dt_max = 1e-3;
    const auto t0 = clock_type::now();
    const auto sim = simulate_scenario(s);
    const double dt = seconds_since(t0);
    if (!sim.error.empty())
        throw std::runtime_error(sim.error);
    if (!sim.ringdown)
        throw std::runtime_error(sim.ringdown_error);
    const auto& fit = *sim.ringdown;
    const cplx eig = dom(rep("case_A"), "inter_area").eigenvalue;
    const double es = std::abs(fit.sigma - eig.real()) / std::abs(eig.real());
    const double ew = std::abs(fit.omega - eig.imag()) / std::abs(eig.imag());
    report(7, es <= ringdown_sigma_rel && ew <= ringdown_omega_rel && dt < ringdown_runtime_s,
           fmt("ringdown %.4f %+.4fi vs eigenvalue %.4f %+.4fi; sigma error %.1f%% (tol %.0f%%), omega error %.1f%% "
               "(tol %.0f%%); %.2f s for %zu steps",
               fit.sigma, fit.omega, eig.real(), eig.imag(), 100 * es, 100 * ringdown_sigma_rel, 100 * ew,
               100 * ringdown_omega_rel, dt, sim.trace.steps));
}

// Peak |P - P0| of the wind farm during the first second after fault clearing.
// The sample at t_clear itself belongs to the faulted network.
double droop_deviation(const std::string& name) {
    auto s = scenario(name);
    const double t_clear = s.events.front().t_start + s.events.front().duration;
    const auto sim = simulate_scenario(s, t_clear + 1.5);
    if (!sim.error.empty())
        throw std::runtime_error(sim.error);
    const auto p = sim.trace.active_power("WF");
    double peak = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double t = sim.trace.time[i];
        if (t > t_clear && t <= t_clear + 1.0)
            peak = std::max(peak, std::abs(p[i] - p.front()));
    }
    return peak;
}

void criterion8() {
    const double on = droop_deviation("case_B_V_support"), off = droop_deviation("case_B_V_nosupport");
    const double ratio = on / off;
    report(8, ratio > droop_ratio_min,
           fmt("case B: peak |dP| in first second after clearing %.4f pu with support vs %.5f pu without, ratio %.1f "
               "(limit > %.0f)",
               on, off, ratio, droop_ratio_min));
    const double c_on = droop_deviation("case_C_V_support"), c_off = droop_deviation("case_C_V_nosupport");
    info(fmt("case C droop response ratio %.1f (%.4f vs %.5f pu)", c_on / c_off, c_on, c_off));
}

void criterion9() {
    std::vector<std::string> notes;
    bool ok = true;

    double worst_sum = 0.0, worst_conj = 0.0, ccbg_lo = 1.0, ccbg_hi = 0.0, case_a_ccbg = 0.0, worst_mismatch = 0.0;
    bool conj_missing = false;
    for (const auto& file : scenario_files(DFIGSS_SCENARIO_DIR)) {
        const auto name = std::filesystem::path(file).stem().string();
        const auto& r = run(name);
        const auto p = participation_factors(r.modal.decomposition);
        for (Eigen::Index i = 0; i < p.cols(); ++i)
            worst_sum = std::max(worst_sum, std::abs(p.col(i).sum() - 1.0));
        for (const auto& m : r.modal.modes) {
            ccbg_lo = std::min(ccbg_lo, m.ccbg_pi);
            ccbg_hi = std::max(ccbg_hi, m.ccbg_pi);
            if (name == "case_A")
                case_a_ccbg = std::max(case_a_ccbg, m.ccbg_pi);
            if (m.eigenvalue.imag() == 0.0)
                continue;
            bool found = false;
            for (const auto& o : r.modal.modes)
                if (o.index != m.index && std::abs(o.eigenvalue - std::conj(m.eigenvalue)) <= 1e-9 * std::abs(m.eigenvalue)) {
                    found = true;
                    worst_conj = std::max(worst_conj, (o.participation - m.participation).cwiseAbs().maxCoeff());
                }
            conj_missing |= !found;
        }
        // reinsertion of the solved voltages into the injection equations
        const auto& net = r.system.network;
        const Eigen::VectorXcd v = r.power_flow.voltage;
        const Eigen::VectorXcd s = v.cwiseProduct((build_ybus(net) * v).conjugate());
        for (std::size_t i = 0; i < net.bus_count(); ++i) {
            const auto& b = net.buses[i];
            const auto ii = static_cast<Eigen::Index>(i);
            if (b.kind != BusKind::slack)
                worst_mismatch = std::max(worst_mismatch, std::abs(s[ii].real() - (b.p_gen - b.p_load)));
            if (b.kind == BusKind::pq)
                worst_mismatch = std::max(worst_mismatch, std::abs(s[ii].imag() - (b.q_gen - b.q_load)));
        }
    }
    // default-tolerance power flow as well
    for (auto kind : {ScenarioKind::A, ScenarioKind::B, ScenarioKind::C}) {
        const auto sys = build_kundur_two_area(kind);
        const auto sol = solve_power_flow(sys.network);
        const Eigen::VectorXcd s = sol.voltage.cwiseProduct((build_ybus(sys.network) * sol.voltage).conjugate());
        for (std::size_t i = 0; i < sys.network.bus_count(); ++i) {
            const auto& b = sys.network.buses[i];
            const auto ii = static_cast<Eigen::Index>(i);
            if (b.kind != BusKind::slack)
                worst_mismatch = std::max(worst_mismatch, std::abs(s[ii].real() - (b.p_gen - b.p_load)));
            if (b.kind == BusKind::pq)
                worst_mismatch = std::max(worst_mismatch, std::abs(s[ii].imag() - (b.q_gen - b.q_load)));
        }
    }
    const bool p1 = worst_sum <= participation_sum_tol;
    const bool p2 = !conj_missing && worst_conj <= conjugate_tol;
    const bool p3 = ccbg_lo >= 0.0 && ccbg_hi <= 1.0 && case_a_ccbg == 0.0;
    const bool p4 = worst_mismatch <= reinsertion_tol;
    notes.push_back(fmt("participation sums |1-sum| <= %.1e", worst_sum));
    notes.push_back(fmt("conjugate pairs %s, participation gap %.1e", conj_missing ? "MISSING" : "complete", worst_conj));
    notes.push_back(fmt("CCBG-PI in [%.3f, %.3f], case A max %.1f", ccbg_lo, ccbg_hi, case_a_ccbg));
    notes.push_back(fmt("reinsertion mismatch %.1e pu", worst_mismatch));

    // linearization residual ratio on eps halving
    const auto& rb = run("case_B_V_support");
    const auto& sys = rb.equilibrium.system;
    const Eigen::VectorXd& x0 = rb.equilibrium.x0;
    std::mt19937 rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::VectorXd d(x0.size());
    for (Eigen::Index i = 0; i < d.size(); ++i)
        d[i] = g(rng);
    d.normalize();
    auto residual = [&](double eps) { return (sys(x0 + eps * d) - rb.modal.state_matrix.a * (eps * d)).norm(); };
    double worst_ratio = std::numeric_limits<double>::infinity();
    for (double eps : {1e-2, 5e-3, 2.5e-3})
        worst_ratio = std::min(worst_ratio, residual(eps) / residual(eps / 2));
    const bool p5 = worst_ratio >= linearization_ratio_min;
    notes.push_back(fmt("linearization residual ratio >= %.2f", worst_ratio));

    // integrator dt halving
    const auto eq = scenario_equilibrium(scenario("case_A"));
    SimulationOptions coarse, fine;
    coarse.record_interval = fine.record_interval = 1.0;
    fine.dt_max = coarse.dt_max / 2;
    const auto ta = simulate(eq.system, eq.x0, {default_tie_line_fault()}, 10.0, coarse);
    const auto tb = simulate(eq.system, eq.x0, {default_tie_line_fault()}, 10.0, fine);
    const double change = (ta.states.back() - tb.states.back()).norm() / tb.states.back().norm();
    const bool p6 = change <= dt_halving_rel;
    notes.push_back(fmt("dt halving final-state change %.1e", change));

    ok = p1 && p2 && p3 && p4 && p5 && p6;
    std::string detail;
    for (const auto& n : notes)
        detail += (detail.empty() ? "" : "; ") + n;
    report(9, ok, detail);
}

void informational() {
    // damping time of the inter-area ringdown in case C with and without support
    auto fit = [](const std::string& name) {
        const auto sim = simulate_scenario(scenario(name));
        if (!sim.ringdown)
            throw std::runtime_error(name + ": " + sim.ringdown_error);
        return *sim.ringdown;
    };
    const auto on = fit("case_C_V_support"), off = fit("case_C_V_nosupport");
    info(fmt("case C ringdown sigma %.4f with support vs %.4f without, ratio %.2f (example target >= 2)", on.sigma,
             off.sigma, on.sigma / off.sigma));
    const auto b = rep("case_B_V_nosupport");
    info(fmt("case B converter-control mode %.3f %+.3fi, ccbg %.3f", dom(b, "converter_control").eigenvalue.real(),
             dom(b, "converter_control").eigenvalue.imag(), dom(b, "converter_control").ccbg_pi));
}

} // namespace

int main() {
    guarded(1, criterion1);
    guarded(2, criterion2);
    guarded(3, criterion3);
    guarded(4, criterion4);
    guarded(5, criterion5);
    guarded(6, criterion6);
    guarded(7, criterion7);
    guarded(8, criterion8);
    guarded(9, criterion9);
    try {
        informational();
    } catch (const std::exception& e) {
        info(std::string("informational checks failed: ") + e.what());
    }
    std::printf("%s: %d of 9 criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
