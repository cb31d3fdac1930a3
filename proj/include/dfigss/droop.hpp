#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "errors.hpp"

namespace dfigss {

/// Gains of the inertial (ROCOF) and primary (frequency deviation) droop
/// loops added on top of the MPPT power set point.
struct DroopParams {
    double kp = 0.0;                 // pu power / pu frequency deviation
    double kin = 0.0;                // pu power / (pu frequency / s)
    double rocof_filter_time = 0.05; // s, washout time constant of the df/dt block
    bool enabled = false;

    void validate() const {
        if (!(kp >= 0.0) || !(kin >= 0.0))
            throw ValidationError("droop gains must be non-negative");
        if (!(rocof_filter_time > 0.0))
            throw ValidationError("rocof_filter_time must be positive");
    }

    bool operator==(const DroopParams&) const = default;
};

/// P_ref = P_opt - Kp * df - Kin * df/dt, or P_opt when the droop is off.
inline double frequency_support_reference(double p_opt, double delta_f, double rocof,
                                          const DroopParams& droop) {
    if (!droop.enabled)
        return p_opt;
    return p_opt - droop.kp * delta_f - droop.kin * rocof;
}

/// First-order washout s/(1+sT) used as a realizable differentiator.
///
/// State form: dx/dt = (u - x)/T, y = (u - x)/T. The steady-state output
/// for a constant input is zero and for a ramp of slope a it tends to a.
class Washout {
public:
    explicit Washout(double time_constant, double initial_input = 0.0)
        : t_(time_constant), x_(initial_input) {
        if (!(t_ > 0.0))
            throw ValidationError("washout time constant must be positive");
    }

    double output(double u) const { return (u - x_) / t_; }
    double state() const { return x_; }
    double time_constant() const { return t_; }

    /// Advances the filter by dt holding the input linear between samples
    /// (exact discretization for piecewise-linear input).
    double step(double u_prev, double u_next, double dt) {
        const double a = std::exp(-dt / t_);
        const double slope = (u_next - u_prev) / dt;
        // x' = (u - x)/T with u(t) = u_prev + slope * t
        const double xf = u_next - slope * t_;
        const double x0f = u_prev - slope * t_;
        x_ = xf + (x_ - x0f) * a;
        return output(u_next);
    }

private:
    double t_;
    double x_;
};

/// ROCOF estimate of a uniformly sampled frequency history through the
/// washout filter. Returns the filter output at every sample; the filter
/// starts in steady state on the first sample.
inline std::vector<double> rocof_estimate(std::span<const double> frequency, double dt,
                                          double filter_time) {
    if (!(dt > 0.0))
        throw ValidationError("rocof_estimate: dt must be positive");
    std::vector<double> out;
    if (frequency.empty())
        return out;
    Washout w(filter_time, frequency.front());
    out.reserve(frequency.size());
    out.push_back(w.output(frequency.front()));
    for (std::size_t i = 1; i < frequency.size(); ++i)
        out.push_back(w.step(frequency[i - 1], frequency[i], dt));
    return out;
}

/// Piecewise MPPT tracking characteristic (pu speed -> pu power on device base).
///
/// Zero below cut-in, a linear ramp to the start of the cubic section,
/// P = k w^3 up to rated speed, and flat at 1 pu beyond. Monotone
/// nondecreasing on the whole domain.
struct MpptCurve {
    double cut_in_speed = 0.6;
    double cubic_start_speed = 0.7;
    double rated_speed = 1.0;
    double min_speed = 0.5;
    double max_speed = 1.3;

    double k() const { return 1.0 / (rated_speed * rated_speed * rated_speed); }

    void validate() const {
        if (!(min_speed <= cut_in_speed && cut_in_speed < cubic_start_speed &&
              cubic_start_speed < rated_speed && rated_speed <= max_speed))
            throw ValidationError("MPPT curve breakpoints must be increasing");
    }
};

struct MpptResult {
    double power;
    bool clamped; // input speed was outside the curve domain
};

inline MpptResult mppt_reference(double rotor_speed, const MpptCurve& curve = {}) {
    bool clamped = false;
    double w = rotor_speed;
    if (w < curve.min_speed) {
        w = curve.min_speed;
        clamped = true;
    } else if (w > curve.max_speed) {
        w = curve.max_speed;
        clamped = true;
    }
    const double k = curve.k();
    double p;
    if (w <= curve.cut_in_speed) {
        p = 0.0;
    } else if (w < curve.cubic_start_speed) {
        const double p_start = k * std::pow(curve.cubic_start_speed, 3);
        p = p_start * (w - curve.cut_in_speed) / (curve.cubic_start_speed - curve.cut_in_speed);
    } else if (w < curve.rated_speed) {
        p = k * w * w * w;
    } else {
        p = 1.0;
    }
    return {std::clamp(p, 0.0, 1.0), clamped};
}

/// Speed on the cubic section that produces the requested power.
inline double mppt_speed_for_power(double power, const MpptCurve& curve = {}) {
    const double p_lo = curve.k() * std::pow(curve.cubic_start_speed, 3);
    if (power < p_lo || power > 1.0)
        throw ValidationError("requested power is outside the cubic MPPT section");
    return std::cbrt(power / curve.k());
}

} // namespace dfigss
