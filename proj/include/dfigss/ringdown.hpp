#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "common.hpp"

namespace dfigss {

struct RingdownWindow {
    double t_start = 0.0;
    double t_end = 0.0; // <= t_start means "to the end of the signal"
};

struct RingdownOptions {
    int target_samples = 400;   // resampled points in the window
    int max_order = 12;         // matrix pencil model order limit
    double sv_threshold = 1e-3; // singular values below this fraction are noise
    double min_frequency_hz = 0.0;
    double max_frequency_hz = 1e9;
};

struct RingdownResult {
    double sigma = 0.0; // real part, 1/s
    double omega = 0.0; // rad/s
    double amplitude = 0.0;
    double residual = 0.0; // rms fit error / rms signal
    int peaks = 0;
    int order = 0;

    cplx eigenvalue() const { return {sigma, omega}; }
    double frequency_hz() const { return omega / (2.0 * std::numbers::pi); }
    double damping() const { return -sigma / std::hypot(sigma, omega); }
};

inline int count_peaks(std::span<const double> y) {
    int peaks = 0;
    for (std::size_t i = 1; i + 1 < y.size(); ++i)
        if (y[i] > y[i - 1] && y[i] >= y[i + 1])
            ++peaks;
    return peaks;
}

/// Dominant damped sinusoid of a sampled signal by the matrix pencil method:
/// the window is resampled uniformly, the mean removed, the signal poles taken
/// from a truncated-SVD pencil, and amplitudes fitted by least squares. The
/// oscillatory pole carrying the most energy over the window is returned.
inline RingdownResult ringdown_fit(std::span<const double> time, std::span<const double> values,
                                   RingdownWindow window = {}, const RingdownOptions& opt = {}) {
    if (time.size() != values.size() || time.size() < 4)
        throw ValidationError("ringdown_fit: time and value series must match and hold >= 4 samples");
    for (std::size_t i = 1; i < time.size(); ++i)
        if (!(time[i] > time[i - 1]))
            throw ValidationError("ringdown_fit: time must be strictly increasing");
    const double t0 = std::max(window.t_start, time.front());
    const double t1 = window.t_end > window.t_start ? std::min(window.t_end, time.back()) : time.back();
    if (!(t1 > t0))
        throw ValidationError("ringdown_fit: empty window");

    // uniform resampling by linear interpolation
    std::size_t n_in = 0;
    for (double t : time)
        n_in += (t >= t0 && t <= t1) ? 1 : 0;
    const int n = static_cast<int>(std::clamp<std::size_t>(n_in, 4, static_cast<std::size_t>(opt.target_samples)));
    const double dt = (t1 - t0) / (n - 1);
    Eigen::VectorXd y(n);
    std::size_t k = 0;
    for (int i = 0; i < n; ++i) {
        const double t = t0 + i * dt;
        while (k + 2 < time.size() && time[k + 1] < t)
            ++k;
        const double a = (t - time[k]) / (time[k + 1] - time[k]);
        y[i] = values[k] + std::clamp(a, 0.0, 1.0) * (values[k + 1] - values[k]);
    }
    if (!y.allFinite())
        throw ValidationError("ringdown_fit: non-finite samples");
    y.array() -= y.mean();

    RingdownResult res;
    res.peaks = count_peaks(std::span<const double>(y.data(), static_cast<std::size_t>(n)));
    if (res.peaks < 3)
        throw ValidationError("ringdown_fit: fewer than 3 peaks in the window");
    const double rms = std::sqrt(y.squaredNorm() / n);
    if (!(rms > 0.0))
        throw ValidationError("ringdown_fit: signal is constant");

    // pencil parameter L ~ N/3
    const int l = std::max(2, n / 3);
    const int rows = n - l;
    Eigen::MatrixXd hk(rows, l + 1);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c <= l; ++c)
            hk(r, c) = y[r + c];
    Eigen::BDCSVD<Eigen::MatrixXd> svd(hk, Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    int m = 0;
    while (m < sv.size() && m < opt.max_order && sv[m] > opt.sv_threshold * sv[0])
        ++m;
    m = std::max(m, 2);
    const Eigen::MatrixXd v = svd.matrixV().leftCols(m);
    const Eigen::MatrixXd v1 = v.topRows(l);
    const Eigen::MatrixXd v2 = v.bottomRows(l);
    const Eigen::MatrixXd pencil = v1.completeOrthogonalDecomposition().pseudoInverse() * v2;
    Eigen::EigenSolver<Eigen::MatrixXd> es(pencil);
    const Eigen::VectorXcd z = es.eigenvalues();

    // least-squares amplitudes of the discrete modes
    Eigen::MatrixXcd basis(n, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            basis(i, j) = std::pow(z[j], i);
    const Eigen::VectorXcd amp = basis.colPivHouseholderQr().solve(y.cast<cplx>());
    const Eigen::VectorXcd fit = basis * amp;
    res.residual = std::sqrt((fit.real() - y).squaredNorm() / n) / rms;
    res.order = m;

    double best = -1.0;
    for (int j = 0; j < m; ++j) {
        if (std::abs(z[j]) < 1e-12)
            continue;
        const cplx s = std::log(z[j]) / dt;
        const double f_hz = s.imag() / (2.0 * std::numbers::pi);
        if (!(s.imag() > 0.0) || f_hz < opt.min_frequency_hz || f_hz > opt.max_frequency_hz)
            continue;
        // energy of this component over the window
        const double r2 = std::norm(z[j]);
        const double geo = std::abs(r2 - 1.0) < 1e-12 ? n : (1.0 - std::pow(r2, n)) / (1.0 - r2);
        const double energy = std::norm(amp[j]) * geo;
        if (energy > best) {
            best = energy;
            res.sigma = s.real();
            res.omega = s.imag();
            res.amplitude = 2.0 * std::abs(amp[j]);
        }
    }
    if (best < 0.0)
        throw ValidationError("ringdown_fit: no oscillatory component found");
    return res;
}

inline RingdownResult ringdown_fit(const std::vector<double>& time, const std::vector<double>& values,
                                   RingdownWindow window = {}, const RingdownOptions& opt = {}) {
    return ringdown_fit(std::span<const double>(time), std::span<const double>(values), window, opt);
}

} // namespace dfigss
