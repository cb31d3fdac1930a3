#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "droop.hpp"
#include "errors.hpp"

namespace dfigss::smib {

/// Linearized single-machine infinite-bus system with a droop-controlled
/// wind farm on the generator bus. State order is (delta_f, delta_delta).
struct SmibParams {
    double h = 3.5;      // s
    double kd = 10.0;    // pu damping coefficient
    double ks = 0.75;    // pu synchronizing coefficient
    double omega0 = 2.0 * std::numbers::pi * 60.0;
    DroopParams droop{};

    /// Effective inertia term 2H + K_in.
    double effective_inertia() const { return 2.0 * h + active_kin(); }
    double active_kp() const { return droop.enabled ? droop.kp : 0.0; }
    double active_kin() const { return droop.enabled ? droop.kin : 0.0; }

    void validate() const {
        if (!(h > 0.0))
            throw ValidationError("SMIB: H must be positive");
        if (!(omega0 > 0.0))
            throw ValidationError("SMIB: omega0 must be positive");
        if (!(effective_inertia() > 0.0))
            throw ValidationError("SMIB: 2H + K_in must be positive");
    }

    static SmibParams with_gains(double kp, double kin) {
        SmibParams p;
        p.droop.enabled = true;
        p.droop.kp = kp;
        p.droop.kin = kin;
        return p;
    }
};

struct SmibState {
    double delta_f = 0.0;
    double delta_delta = 0.0;
};

/// [[-(Kp+KD)/(2H+Kin), -KS/(2H+Kin)], [omega0, 0]]
inline Eigen::Matrix2d smib_system_matrix(const SmibParams& p) {
    // validate() rejects negative gains, but the singular-denominator guard
    // must also catch explicitly constructed K_in = -2H.
    const double m = 2.0 * p.h + p.active_kin();
    if (!(m > 0.0))
        throw ValidationError("SMIB: 2H + K_in must be positive");
    if (!(p.h > 0.0) || !(p.omega0 > 0.0))
        throw ValidationError("SMIB: H and omega0 must be positive");
    Eigen::Matrix2d a;
    a << -(p.active_kp() + p.kd) / m, -p.ks / m,
         p.omega0, 0.0;
    return a;
}

struct SmibEigen {
    std::complex<double> lambda;  // root with non-negative imaginary part
    std::complex<double> other;   // its conjugate, or the second real root
    bool oscillatory = true;
};

/// Closed-form roots of the 2x2 characteristic polynomial.
inline SmibEigen smib_eigenvalues(const SmibParams& p) {
    const double m = 2.0 * p.h + p.active_kin();
    if (!(m > 0.0))
        throw ValidationError("SMIB: 2H + K_in must be positive");
    const double b = p.active_kp() + p.kd;
    const double disc = b * b - 4.0 * p.ks * p.omega0 * m;
    const double re = -b / (2.0 * m);
    SmibEigen out;
    if (disc < 0.0) {
        const double im = std::sqrt(-disc) / (2.0 * m);
        out.lambda = {re, im};
        out.other = {re, -im};
        out.oscillatory = true;
    } else {
        const double r = std::sqrt(disc) / (2.0 * m);
        out.lambda = {re + r, 0.0}; // slower (less damped) root first
        out.other = {re - r, 0.0};
        out.oscillatory = false;
    }
    return out;
}

/// Damping ratio from the consistent closed form (Kp+KD)/sqrt(4 KS w0 (2H+Kin)),
/// valid in the oscillatory regime only.
inline double smib_damping_closed_form(const SmibParams& p) {
    const double m = 2.0 * p.h + p.active_kin();
    return (p.active_kp() + p.kd) / std::sqrt(4.0 * p.ks * p.omega0 * m);
}

struct SmibRecord {
    double kp;
    double kin;
    std::complex<double> lambda;
    double damping;
    double freq_hz;
    bool oscillatory;
};

inline SmibRecord smib_record(const SmibParams& p) {
    const auto e = smib_eigenvalues(p);
    SmibRecord r{p.active_kp(), p.active_kin(), e.lambda, 1.0, 0.0, e.oscillatory};
    if (e.oscillatory) {
        r.damping = -e.lambda.real() / std::abs(e.lambda);
        r.freq_hz = e.lambda.imag() / (2.0 * std::numbers::pi);
    }
    return r;
}

/// One eigenvalue record per (kp, kin) pair, kp varying fastest.
inline std::vector<SmibRecord> smib_sensitivity_grid(SmibParams base,
                                                     const std::vector<double>& kp_values,
                                                     const std::vector<double>& kin_values) {
    if (kp_values.empty() || kin_values.empty())
        throw ValidationError("SMIB grid axes must be non-empty");
    std::vector<SmibRecord> out;
    out.reserve(kp_values.size() * kin_values.size());
    base.droop.enabled = true;
    for (double kin : kin_values) {
        for (double kp : kp_values) {
            SmibParams p = base;
            p.droop.kp = kp;
            p.droop.kin = kin;
            p.validate();
            out.push_back(smib_record(p));
        }
    }
    return out;
}

/// CSV with columns kp,kin,re,im,damping,freq_hz,oscillatory_flag.
inline void write_smib_csv(std::ostream& os, const std::vector<SmibRecord>& grid) {
    os << "kp,kin,re,im,damping,freq_hz,oscillatory_flag\n";
    os.precision(12);
    for (const auto& r : grid) {
        os << r.kp << ',' << r.kin << ',' << r.lambda.real() << ',' << r.lambda.imag() << ','
           << r.damping << ',' << r.freq_hz << ',' << (r.oscillatory ? 1 : 0) << '\n';
    }
}

/// Aggregate centre-of-inertia frequency model 2H df/dt = Pg + Preg(f) - Pl,
/// with frequency expressed as the per-unit deviation from nominal.
struct AggregateModel {
    double h_sys = 5.0;
    double p_gen = 1.0;
    double p_load = 1.0;
    std::function<double(double)> p_reg = [](double) { return 0.0; };
    double f_initial = 0.0;
};

struct FrequencyTrace {
    std::vector<double> time;
    std::vector<double> delta_f;
    std::vector<double> rocof;
};

/// Integrates the aggregate model after a load increase of power_step pu
/// applied at t = 0 (classical RK4, fixed step).
inline FrequencyTrace aggregate_frequency_response(const AggregateModel& m, double power_step,
                                                   double t_end, double dt = 1e-3) {
    if (!(m.h_sys > 0.0))
        throw ValidationError("aggregate model: H_sys must be positive");
    if (!(dt > 0.0) || !(t_end >= 0.0))
        throw ValidationError("aggregate model: bad time span");
    auto rhs = [&](double f) {
        return (m.p_gen + m.p_reg(f) - (m.p_load + power_step)) / (2.0 * m.h_sys);
    };
    FrequencyTrace tr;
    double f = m.f_initial;
    const auto n = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
    tr.time.reserve(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        tr.time.push_back(static_cast<double>(i) * dt);
        tr.delta_f.push_back(f);
        tr.rocof.push_back(rhs(f));
        if (i == n)
            break;
        const double k1 = rhs(f);
        const double k2 = rhs(f + 0.5 * dt * k1);
        const double k3 = rhs(f + 0.5 * dt * k2);
        const double k4 = rhs(f + dt * k3);
        f += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return tr;
}

} // namespace dfigss::smib
