#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "common.hpp"
#include "droop.hpp"

namespace dfigss {

enum class ControlMode { voltage, reactive_power };

inline const char* to_string(ControlMode m) {
    return m == ControlMode::voltage ? "voltage" : "reactive_power";
}

/// Aggregated DFIG wind farm. Per-unit on the farm base.
///
/// Stator transients are neglected and the rotor-side converter is a
/// first-order lag on active and reactive power. A PLL tracks the terminal
/// voltage angle and provides the frequency signal of the droop loops.
struct DfigParams {
    double base_mva = 300.0;
    double h_turbine = 4.0; // s, single-mass drive train

    // asynchronous machine
    double rs = 0.023, rr = 0.016;
    double xls = 0.18, xlr = 0.16;
    double xm = 2.9;

    // converter and outer loops
    double tc = 0.05;       // s, power/current loop lag
    double kv = 20.0;       // pu Q / (pu V s), voltage mode integral gain
    double kq = 5.0;        // 1/s, reactive-power mode integral gain
    double i_max = 1.2;     // converter current limit
    double p_max = 1.2;     // upper limit on the active power reference
    ControlMode control_mode = ControlMode::voltage;

    // PLL frequency measurement: dtheta/dt = w0 (kp e + x), dx/dt = ki e
    double pll_kp = 0.0106;
    double pll_ki = 0.68;
    double freq_filter_time = 0.1; // s, lag on the PLL frequency
    DroopParams droop{};

    // aerodynamics: Cp(lambda, beta) characteristic
    double pitch_angle = 0.0; // deg
    MpptCurve mppt{};
    double speed_min = 0.7, speed_max = 1.3; // protection bounds

    void validate() const {
        if (!(h_turbine > 0.0))
            throw ValidationError("DFIG: turbine inertia must be positive");
        if (!(base_mva > 0.0))
            throw ValidationError("DFIG: base must be positive");
        if (!(tc > 0.0) || !(freq_filter_time > 0.0))
            throw ValidationError("DFIG: time constants must be positive");
        if (!(pitch_angle >= 0.0))
            throw ValidationError("DFIG: pitch angle must be non-negative");
        if (!(xm > 0.0))
            throw ValidationError("DFIG: magnetizing reactance must be positive");
        droop.validate();
        mppt.validate();
    }

    /// Stator self reactance seen from the network.
    double xs() const { return xls + xm; }
};

namespace df {
enum Index : int { omega_r, p_c, q_c, x_vq, theta_pll, x_pll, f_meas, x_rocof, count };
inline constexpr std::array<const char*, count> names{
    "omega_r", "p_conv", "q_conv", "vq_int", "pll_angle", "pll_int", "freq_meas", "rocof_wash"};
} // namespace df

using DfigState = Eigen::Matrix<double, df::count, 1>;

/// Power coefficient of the rotor (standard exponential characteristic).
inline double power_coefficient(double lambda, double beta_deg) {
    const double inv_li = 1.0 / (lambda + 0.08 * beta_deg) - 0.035 / (beta_deg * beta_deg * beta_deg + 1.0);
    return 0.5176 * (116.0 * inv_li - 0.4 * beta_deg - 5.0) * std::exp(-21.0 * inv_li) +
           0.0068 * lambda;
}

/// Tip-speed ratio maximizing Cp at zero pitch (golden-section search).
inline double optimal_tip_speed_ratio() {
    static const double opt = [] {
        double a = 4.0, b = 14.0;
        const double g = (std::sqrt(5.0) - 1.0) / 2.0;
        for (int i = 0; i < 200; ++i) {
            const double c = b - g * (b - a), d = a + g * (b - a);
            if (power_coefficient(c, 0.0) > power_coefficient(d, 0.0))
                b = d;
            else
                a = c;
        }
        return 0.5 * (a + b);
    }();
    return opt;
}

/// Constant, spatially uniform wind: the available power at optimal Cp and
/// the rotor speed at which the tip-speed ratio is optimal.
struct WindOperatingPoint {
    double p_available = 0.8;
    double omega_opt = 0.93;
};

inline double aero_power(double omega_r, const WindOperatingPoint& w, double pitch_deg) {
    const double lopt = optimal_tip_speed_ratio();
    const double lambda = lopt * omega_r / w.omega_opt;
    const double cp = power_coefficient(lambda, pitch_deg);
    return w.p_available * std::max(cp, 0.0) / power_coefficient(lopt, 0.0);
}

struct DfigSetpoints {
    double v_ref = 1.0;
    double q_set = 0.0; // net reactive injection target in reactive_power mode
};

struct DfigOutput {
    DfigState dx;
    cplx current;          // injected by the converter, farm base, network frame (excl. magnetizing)
    double p_e = 0.0;      // active power injected
    double q_e = 0.0;      // net reactive power injected, including magnetizing draw
    double p_opt = 0.0;
    double p_ref = 0.0;
    double delta_f = 0.0;  // measured frequency deviation used by the droop
    double rocof = 0.0;
    bool current_limited = false;
    bool speed_out_of_bounds = false;
};

/// Converter current for the commanded powers at the terminal voltage,
/// magnitude-limited to i_max.
inline cplx converter_current(const DfigState& x, cplx v, const DfigParams& p, bool* limited = nullptr) {
    cplx i = std::conj(cplx(x[df::p_c], x[df::q_c]) / v);
    const double mag = std::abs(i);
    const bool lim = mag > p.i_max;
    if (lim)
        i *= p.i_max / mag;
    if (limited)
        *limited = lim;
    return i;
}

/// Shunt admittance of the stator magnetizing branch, farm base.
inline cplx magnetizing_admittance(const DfigParams& p) { return 1.0 / cplx(0.0, p.xs()); }

inline DfigOutput dfig_derivatives(const DfigState& x, cplx v, const DfigParams& p,
                                   const DfigSetpoints& sp, const WindOperatingPoint& wind,
                                   double omega0) {
    if (!x.allFinite() || !std::isfinite(v.real()) || !std::isfinite(v.imag()))
        throw ValidationError("dfig_derivatives: non-finite input");
    DfigOutput out;
    const double vm = std::abs(v);
    const double vm_safe = std::max(vm, 1e-6);

    out.current = converter_current(x, v, p, &out.current_limited);
    const cplx s_conv = v * std::conj(out.current);
    out.p_e = s_conv.real();
    out.q_e = s_conv.imag() - vm * vm / p.xs();

    // PLL and frequency measurement
    const double err = (v * std::polar(1.0, -x[df::theta_pll])).imag() / vm_safe;
    const double dw_pll = p.pll_kp * err + x[df::x_pll];
    out.dx[df::theta_pll] = omega0 * dw_pll;
    out.dx[df::x_pll] = p.pll_ki * err;
    out.dx[df::f_meas] = (dw_pll - x[df::f_meas]) / p.freq_filter_time;
    out.delta_f = x[df::f_meas];
    out.rocof = (x[df::f_meas] - x[df::x_rocof]) / p.droop.rocof_filter_time;
    out.dx[df::x_rocof] = out.rocof;

    // MPPT set point plus droop
    const double w = x[df::omega_r];
    out.speed_out_of_bounds = w < p.speed_min || w > p.speed_max;
    out.p_opt = mppt_reference(w, p.mppt).power;
    out.p_ref = std::clamp(frequency_support_reference(out.p_opt, out.delta_f, out.rocof, p.droop),
                           0.0, p.p_max);
    out.dx[df::p_c] = (out.p_ref - x[df::p_c]) / p.tc;

    // reactive channel
    if (p.control_mode == ControlMode::voltage)
        out.dx[df::x_vq] = p.kv * (sp.v_ref - vm);
    else
        out.dx[df::x_vq] = p.kq * (sp.q_set - out.q_e);
    out.dx[df::q_c] = (x[df::x_vq] - x[df::q_c]) / p.tc;

    // drive train
    const double p_loss = (p.rs + p.rr) * std::norm(out.current);
    const double p_mech = aero_power(w, wind, p.pitch_angle);
    out.dx[df::omega_r] = (p_mech - out.p_e - p_loss) / (2.0 * p.h_turbine * std::max(w, 0.1));
    return out;
}

struct DfigInit {
    DfigState x;
    DfigSetpoints setpoints;
    WindOperatingPoint wind;
};

/// Equilibrium on the MPPT curve for the given terminal voltage and net
/// injected power (farm base).
inline DfigInit initialize_dfig(cplx v, cplx s_net, const DfigParams& p) {
    p.validate();
    DfigInit init;
    auto& x = init.x;
    x.setZero();
    const double vm = std::abs(v);
    const double q_conv = s_net.imag() + vm * vm / p.xs();
    x[df::p_c] = s_net.real();
    x[df::q_c] = q_conv;
    x[df::x_vq] = q_conv;
    x[df::theta_pll] = std::arg(v);

    const double omega = mppt_speed_for_power(s_net.real(), p.mppt);
    x[df::omega_r] = omega;
    if (omega < p.speed_min || omega > p.speed_max)
        throw ValidationError("DFIG: equilibrium rotor speed outside protection bounds");

    bool limited = false;
    const cplx i = converter_current(x, v, p, &limited);
    if (limited)
        throw ValidationError("DFIG: equilibrium current exceeds the converter limit");
    const double p_loss = (p.rs + p.rr) * std::norm(i);
    init.wind.omega_opt = omega;
    // aero_power at omega_opt equals p_available * Cp(beta)/Cp_max
    const double cp_ratio = power_coefficient(optimal_tip_speed_ratio(), p.pitch_angle) /
                            power_coefficient(optimal_tip_speed_ratio(), 0.0);
    init.wind.p_available = (s_net.real() + p_loss) / cp_ratio;
    init.setpoints.v_ref = vm;
    init.setpoints.q_set = s_net.imag();
    return init;
}

} // namespace dfigss
