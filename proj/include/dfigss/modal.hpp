#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace dfigss {

enum class DeviceClass { synchronous, converter_based };

inline const char* to_string(DeviceClass c) {
    return c == DeviceClass::synchronous ? "synchronous" : "converter";
}

struct StateLabel {
    std::string device_id;
    std::string name;
    DeviceClass device_class = DeviceClass::synchronous;

    std::string full_name() const { return device_id + "." + name; }
    bool operator==(const StateLabel&) const = default;
};

struct StateMatrix {
    Eigen::MatrixXd a;
    std::vector<StateLabel> labels;

    Eigen::Index size() const { return a.rows(); }
};

struct LinearizeOptions {
    double relative_step = 1e-6;   // h_k = relative_step * max(1, |x_k|)
    double equilibrium_tol = 1e-8; // max |f(x0)| accepted as an equilibrium
};

/// Central finite-difference Jacobian of an autonomous vector field at an
/// equilibrium. `f` maps Eigen::VectorXd -> Eigen::VectorXd.
template <class Field>
StateMatrix linearize(const Field& f, const Eigen::VectorXd& x0, std::vector<StateLabel> labels,
                      const LinearizeOptions& opt = {}) {
    const Eigen::Index n = x0.size();
    if (static_cast<Eigen::Index>(labels.size()) != n)
        throw ValidationError("linearize: label count does not match state dimension");

    const Eigen::VectorXd f0 = f(x0);
    Eigen::Index worst = 0;
    const double residual = n > 0 ? f0.cwiseAbs().maxCoeff(&worst) : 0.0;
    if (!(residual <= opt.equilibrium_tol)) {
        std::ostringstream msg;
        msg << "linearize: not an equilibrium, |dx/dt| = " << residual << " at state "
            << labels[static_cast<std::size_t>(worst)].full_name();
        throw ValidationError(msg.str());
    }

    StateMatrix out{Eigen::MatrixXd(n, n), std::move(labels)};
    Eigen::VectorXd x = x0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double h = opt.relative_step * std::max(1.0, std::abs(x0[j]));
        x[j] = x0[j] + h;
        const Eigen::VectorXd fp = f(x);
        x[j] = x0[j] - h;
        const Eigen::VectorXd fm = f(x);
        x[j] = x0[j];
        out.a.col(j) = (fp - fm) / (2.0 * h);
    }
    return out;
}

/// Eigenvalues with right eigenvectors (columns of `right`, unit 2-norm) and
/// left eigenvectors (columns of `left`) scaled so that left_i^H right_i = 1.
struct ModalDecomposition {
    Eigen::VectorXcd eigenvalues;
    Eigen::MatrixXcd right;
    Eigen::MatrixXcd left;
    double condition = 1.0; // 2-norm condition number of `right`
};

inline ModalDecomposition decompose(const Eigen::MatrixXd& a, double max_condition = 1e12) {
    if (a.rows() != a.cols())
        throw ValidationError("decompose: matrix must be square");
    Eigen::EigenSolver<Eigen::MatrixXd> es(a, true);
    if (es.info() != Eigen::Success)
        throw SingularError("decompose: eigenvalue iteration did not converge");

    ModalDecomposition d;
    d.eigenvalues = es.eigenvalues();
    d.right = es.eigenvectors();
    for (Eigen::Index i = 0; i < d.right.cols(); ++i)
        d.right.col(i).normalize();

    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(d.right);
    const auto& s = svd.singularValues();
    d.condition = s.size() ? s(0) / s(s.size() - 1) : 1.0;
    if (!(d.condition < max_condition)) {
        std::ostringstream msg;
        msg << "decompose: eigenvector matrix is numerically defective (condition " << d.condition
            << ")";
        throw SingularError(msg.str());
    }
    // Rows of U^{-1} are w_i^T with w_i^T u_j = delta_ij; left vectors are conj(w_i).
    const Eigen::MatrixXcd w = d.right.inverse();
    d.left = w.adjoint();
    return d;
}

/// zeta = -alpha / sqrt(alpha^2 + beta^2).
inline double damping_ratio(std::complex<double> lambda) {
    const double mag = std::abs(lambda);
    if (mag == 0.0)
        throw ValidationError("damping_ratio: undefined for a zero eigenvalue");
    return -lambda.real() / mag;
}

/// Complex participation p_ki = u_ki * w_ik (column i belongs to mode i).
inline Eigen::MatrixXcd participation_matrix(const ModalDecomposition& d) {
    return d.right.cwiseProduct(d.left.conjugate());
}

/// Per-mode participation magnitudes normalized to sum to one.
inline Eigen::MatrixXd participation_factors(const ModalDecomposition& d) {
    Eigen::MatrixXd mag = participation_matrix(d).cwiseAbs();
    for (Eigen::Index i = 0; i < mag.cols(); ++i) {
        const double s = mag.col(i).sum();
        if (!(s > 0.0))
            throw SingularError("participation_factors: mode with zero participation");
        mag.col(i) /= s;
    }
    return mag;
}

/// Share of a mode's participation magnitude carried by converter-based states.
template <class Vec>
double ccbg_pi(const Vec& participation, const std::vector<StateLabel>& labels) {
    if (static_cast<std::size_t>(participation.size()) != labels.size())
        throw ValidationError("ccbg_pi: participation/label size mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < labels.size(); ++k) {
        const double p = std::abs(participation[static_cast<Eigen::Index>(k)]);
        if (!std::isfinite(p))
            throw ValidationError("ccbg_pi: non-finite participation");
        den += p;
        if (labels[k].device_class == DeviceClass::converter_based)
            num += p;
    }
    if (!(den > 0.0))
        throw ValidationError("ccbg_pi: zero total participation");
    return num / den;
}

enum class ModeClass { inter_area, local, converter_control, non_oscillatory, other };

inline const char* to_string(ModeClass c) {
    switch (c) {
    case ModeClass::inter_area: return "inter_area";
    case ModeClass::local: return "local";
    case ModeClass::converter_control: return "converter_control";
    case ModeClass::non_oscillatory: return "non_oscillatory";
    case ModeClass::other: return "other";
    }
    return "other";
}

inline std::optional<ModeClass> mode_class_from_string(const std::string& s) {
    for (auto c : {ModeClass::inter_area, ModeClass::local, ModeClass::converter_control,
                   ModeClass::non_oscillatory, ModeClass::other})
        if (s == to_string(c))
            return c;
    return std::nullopt;
}

struct ClassifierConfig {
    double ccbg_threshold = 0.5;
    double inter_area_min_hz = 0.1;
    double inter_area_max_hz = 1.0;
    double local_max_hz = 3.1;
    double critical_damping = 0.05;
    double zero_tolerance = 1e-7; // |lambda| below this is a structural zero mode
};

struct Mode {
    std::size_t index = 0;
    std::complex<double> eigenvalue;
    double damping = std::numeric_limits<double>::quiet_NaN(); // NaN for a zero eigenvalue
    double frequency_hz = 0.0;
    ModeClass classification = ModeClass::other;
    Eigen::VectorXd participation; // normalized magnitudes, one per state
    double ccbg_pi = 0.0;
    bool is_critical = false;

    bool oscillatory() const { return eigenvalue.imag() != 0.0; }
};

inline ModeClass classify_mode(const Mode& m, const ClassifierConfig& cfg = {}) {
    if (m.eigenvalue.imag() == 0.0)
        return ModeClass::non_oscillatory;
    if (m.ccbg_pi >= cfg.ccbg_threshold)
        return ModeClass::converter_control;
    const double f = m.frequency_hz;
    if (f >= cfg.inter_area_min_hz && f < cfg.inter_area_max_hz)
        return ModeClass::inter_area;
    if (f >= cfg.inter_area_max_hz && f <= cfg.local_max_hz)
        return ModeClass::local;
    return ModeClass::other;
}

struct ModalAnalysis {
    StateMatrix state_matrix;
    ModalDecomposition decomposition;
    std::vector<Mode> modes; // one entry per eigenvalue, same order as decomposition
};

inline Mode make_mode(std::size_t i, std::complex<double> lambda, Eigen::VectorXd participation,
                      const std::vector<StateLabel>& labels, const ClassifierConfig& cfg) {
    Mode m;
    m.index = i;
    m.eigenvalue = lambda;
    m.frequency_hz = std::abs(lambda.imag()) / (2.0 * std::numbers::pi);
    if (std::abs(lambda) > cfg.zero_tolerance)
        m.damping = damping_ratio(lambda);
    m.is_critical = m.damping <= cfg.critical_damping;
    m.participation = std::move(participation);
    m.ccbg_pi = ccbg_pi(m.participation, labels);
    m.classification = classify_mode(m, cfg);
    return m;
}

inline ModalAnalysis analyze_modes(StateMatrix sm, const ClassifierConfig& cfg = {}) {
    ModalAnalysis out;
    out.decomposition = decompose(sm.a);
    const Eigen::MatrixXd part = participation_factors(out.decomposition);
    const auto n = static_cast<std::size_t>(out.decomposition.eigenvalues.size());
    out.modes.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        out.modes.push_back(
            make_mode(i, out.decomposition.eigenvalues[ii], part.col(ii), sm.labels, cfg));
    }
    out.state_matrix = std::move(sm);
    return out;
}

/// Least-damped oscillatory mode of every class present. Ties on damping are
/// broken by the larger real part, then by the lower frequency.
inline std::map<ModeClass, Mode> dominant_modes(const std::vector<Mode>& modes) {
    std::map<ModeClass, Mode> best;
    auto better = [](const Mode& a, const Mode& b) {
        constexpr double tol = 1e-12;
        if (std::abs(a.damping - b.damping) > tol)
            return a.damping < b.damping;
        if (std::abs(a.eigenvalue.real() - b.eigenvalue.real()) > tol)
            return a.eigenvalue.real() > b.eigenvalue.real();
        return a.frequency_hz < b.frequency_hz;
    };
    for (const auto& m : modes) {
        if (m.eigenvalue.imag() <= 0.0 || std::isnan(m.damping))
            continue;
        if (m.classification == ModeClass::non_oscillatory)
            continue;
        auto it = best.find(m.classification);
        if (it == best.end() || better(m, it->second))
            best[m.classification] = m;
    }
    return best;
}

/// Indices of the `count` states with the largest participation in a mode.
inline std::vector<std::size_t> top_participants(const Mode& m, std::size_t count) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(m.participation.size()));
    for (std::size_t i = 0; i < idx.size(); ++i)
        idx[i] = i;
    count = std::min(count, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          const double pa = m.participation[static_cast<Eigen::Index>(a)];
                          const double pb = m.participation[static_cast<Eigen::Index>(b)];
                          return pa != pb ? pa > pb : a < b;
                      });
    idx.resize(count);
    return idx;
}

} // namespace dfigss
