#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "common.hpp"

namespace dfigss {

/// Sixth-order synchronous machine with a first-order static exciter, a
/// washout + two lead-lag PSS and a first-order governor. Reactances and
/// gains are per-unit on the machine base.
struct SyncGenParams {
    double base_mva = 900.0;
    double h = 6.5;   // s
    double d = 0.0;   // pu torque / pu speed
    double xd = 1.8, xq = 1.7;
    double xd1 = 0.3, xq1 = 0.55;  // transient
    double xd2 = 0.25, xq2 = 0.25; // subtransient
    double ra = 0.0025;
    double td01 = 8.0, tq01 = 0.4;
    double td02 = 0.03, tq02 = 0.05;
    // static exciter
    double ka = 30.0;
    double ta = 0.01;
    double efd_min = -5.0, efd_max = 5.0;
    // PSS: K * sTw/(1+sTw) * (1+sT1)/(1+sT2) * (1+sT3)/(1+sT4)
    double kpss = 20.0;
    double tw = 10.0;
    double t1 = 0.05, t2 = 0.02, t3 = 3.0, t4 = 5.4;
    double vpss_max = 0.2;
    // governor
    double r_droop = 0.05;
    double tg = 5.0; // lumped governor + turbine

    void validate() const {
        if (!(h > 0.0))
            throw ValidationError("synchronous machine: H must be positive");
        for (double t : {td01, tq01, td02, tq02, ta, tw, t1, t2, t3, t4, tg})
            if (!(t > 0.0))
                throw ValidationError("synchronous machine: time constants must be positive");
        if (!(kpss >= 0.0))
            throw ValidationError("synchronous machine: K_pss must be non-negative");
        if (!(r_droop > 0.0))
            throw ValidationError("synchronous machine: governor droop must be positive");
        if (xd2 != xq2)
            throw ValidationError("synchronous machine: X''d must equal X''q (Norton interface)");
        if (!(base_mva > 0.0))
            throw ValidationError("synchronous machine: base must be positive");
    }
};

namespace sg {
enum Index : int { delta, domega, eq1, ed1, eq2, ed2, efd, xw, xl1, xl2, pm, count };
inline constexpr std::array<const char*, count> names{
    "delta", "omega", "eq1", "ed1", "eq2", "ed2", "efd", "pss_wash", "pss_ll1", "pss_ll2", "pm"};
} // namespace sg

using SyncGenState = Eigen::Matrix<double, sg::count, 1>;

/// References fixed at initialization.
struct SyncGenSetpoints {
    double v_ref = 1.0;
    double p_ref = 0.0; // governor load reference, machine base
};

struct SyncGenOutput {
    SyncGenState dx;
    cplx current;   // injected terminal current, machine base, network frame
    double te = 0.0;
    double pe = 0.0;
    double vpss = 0.0;
};

inline cplx subtransient_emf(const SyncGenState& x) {
    // (ed'' + j eq'') rotated from the machine frame: V_net = V_dq * e^{j(delta - pi/2)}
    return cplx(x[sg::ed2], x[sg::eq2]) * std::polar(1.0, x[sg::delta] - std::numbers::pi / 2.0);
}

inline cplx subtransient_impedance(const SyncGenParams& p) { return {p.ra, p.xd2}; }

/// Norton source current of the subtransient EMF, machine base.
inline cplx norton_current(const SyncGenState& x, const SyncGenParams& p) {
    return subtransient_emf(x) / subtransient_impedance(p);
}

struct PssOutput {
    double dxw, dxl1, dxl2, vpss;
};

inline PssOutput pss_block(double domega, double xw, double xl1, double xl2, const SyncGenParams& p) {
    const double u = p.kpss * domega;
    const double yw = u - xw;
    const double y1 = xl1 + p.t1 / p.t2 * (yw - xl1);
    const double y2 = xl2 + p.t3 / p.t4 * (y1 - xl2);
    return {(u - xw) / p.tw, (yw - xl1) / p.t2, (y1 - xl2) / p.t4,
            std::clamp(y2, -p.vpss_max, p.vpss_max)};
}

/// Swing pair: d(delta)/dt = w0 * dw, 2H d(dw)/dt = Pm - Te - D dw.
inline std::array<double, 2> swing_derivatives(double domega, double pm, double te, double h,
                                               double d, double omega0) {
    return {omega0 * domega, (pm - te - d * domega) / (2.0 * h)};
}

/// Steady governor mechanical-power command for a speed deviation.
inline double governor_command(double p_ref, double domega, double r_droop) {
    return p_ref - domega / r_droop;
}

inline SyncGenOutput sync_gen_derivatives(const SyncGenState& x, cplx v_terminal,
                                          const SyncGenParams& p, const SyncGenSetpoints& sp,
                                          double omega0) {
    if (!x.allFinite() || !std::isfinite(v_terminal.real()) || !std::isfinite(v_terminal.imag()))
        throw ValidationError("sync_gen_derivatives: non-finite input");
    SyncGenOutput out;
    const cplx rot = std::polar(1.0, -(x[sg::delta] - std::numbers::pi / 2.0));
    const cplx i_net = (subtransient_emf(x) - v_terminal) / subtransient_impedance(p);
    const cplx i_dq = i_net * rot;
    const double id = i_dq.real(), iq = i_dq.imag();

    out.current = i_net;
    out.te = x[sg::ed2] * id + x[sg::eq2] * iq;
    out.pe = (v_terminal * std::conj(i_net)).real();

    const auto swing = swing_derivatives(x[sg::domega], x[sg::pm], out.te, p.h, p.d, omega0);
    out.dx[sg::delta] = swing[0];
    out.dx[sg::domega] = swing[1];
    out.dx[sg::eq1] = (x[sg::efd] - x[sg::eq1] - (p.xd - p.xd1) * id) / p.td01;
    out.dx[sg::ed1] = (-x[sg::ed1] + (p.xq - p.xq1) * iq) / p.tq01;
    out.dx[sg::eq2] = (x[sg::eq1] - x[sg::eq2] - (p.xd1 - p.xd2) * id) / p.td02;
    out.dx[sg::ed2] = (x[sg::ed1] - x[sg::ed2] + (p.xq1 - p.xq2) * iq) / p.tq02;

    const auto pss = pss_block(x[sg::domega], x[sg::xw], x[sg::xl1], x[sg::xl2], p);
    out.vpss = pss.vpss;
    out.dx[sg::xw] = pss.dxw;
    out.dx[sg::xl1] = pss.dxl1;
    out.dx[sg::xl2] = pss.dxl2;

    // non-windup limits on the exciter output
    double defd = (p.ka * (sp.v_ref - std::abs(v_terminal) + pss.vpss) - x[sg::efd]) / p.ta;
    if ((x[sg::efd] >= p.efd_max && defd > 0.0) || (x[sg::efd] <= p.efd_min && defd < 0.0))
        defd = 0.0;
    out.dx[sg::efd] = defd;

    out.dx[sg::pm] = (governor_command(sp.p_ref, x[sg::domega], p.r_droop) - x[sg::pm]) / p.tg;
    return out;
}

struct SyncGenInit {
    SyncGenState x;
    SyncGenSetpoints setpoints;
};

/// Equilibrium state from the terminal voltage and the generated power
/// (both per-unit on the machine base).
inline SyncGenInit initialize_sync_gen(cplx v_terminal, cplx s_gen, const SyncGenParams& p) {
    p.validate();
    const cplx i_net = std::conj(s_gen / v_terminal);
    const cplx e_q = v_terminal + cplx(p.ra, p.xq) * i_net;
    const double delta = std::arg(e_q);
    const cplx rot = std::polar(1.0, -(delta - std::numbers::pi / 2.0));
    const cplx v_dq = v_terminal * rot;
    const cplx i_dq = i_net * rot;
    const double vd = v_dq.real(), vq = v_dq.imag(), id = i_dq.real(), iq = i_dq.imag();

    SyncGenInit init;
    auto& x = init.x;
    x.setZero();
    x[sg::delta] = delta;
    x[sg::domega] = 0.0;
    x[sg::ed1] = (p.xq - p.xq1) * iq;
    x[sg::ed2] = vd + p.ra * id - p.xq2 * iq;
    x[sg::eq2] = vq + p.ra * iq + p.xd2 * id;
    x[sg::eq1] = x[sg::eq2] + (p.xd1 - p.xd2) * id;
    x[sg::efd] = x[sg::eq1] + (p.xd - p.xd1) * id;
    x[sg::pm] = x[sg::ed2] * id + x[sg::eq2] * iq;
    if (x[sg::efd] > p.efd_max || x[sg::efd] < p.efd_min)
        throw ValidationError("synchronous machine: field voltage at equilibrium exceeds limits");

    init.setpoints.v_ref = std::abs(v_terminal) + x[sg::efd] / p.ka;
    init.setpoints.p_ref = x[sg::pm];
    return init;
}

} // namespace dfigss
