#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "power_system.hpp"

namespace dfigss {

enum class EventKind { three_phase_fault, clear_fault, load_step, line_trip };

inline const char* to_string(EventKind k) {
    switch (k) {
    case EventKind::three_phase_fault: return "three_phase_fault";
    case EventKind::clear_fault: return "clear_fault";
    case EventKind::load_step: return "load_step";
    case EventKind::line_trip: return "line_trip";
    }
    return "?";
}

inline EventKind event_kind_from_string(const std::string& s) {
    for (auto k : {EventKind::three_phase_fault, EventKind::clear_fault, EventKind::load_step,
                   EventKind::line_trip})
        if (s == to_string(k))
            return k;
    throw ValidationError("unknown event kind '" + s + "'");
}

/// Fault duration in seconds for a number of cycles at the given frequency.
inline double cycles(double n, double frequency_hz = 60.0) { return n / frequency_hz; }

/// Disturbance applied at t_start. A fault with a duration is cleared
/// automatically at t_start + duration. Load steps add `severity` pu of
/// constant-conductance load (system base, at 1 pu voltage).
struct Event {
    EventKind kind = EventKind::three_phase_fault;
    std::optional<int> bus;              // bus id
    std::optional<std::size_t> branch;   // branch index (faults at its midpoint, trips)
    double t_start = 0.0;
    double duration = 0.0;               // s; 0 = permanent
    double severity = 1e4;               // fault admittance or load step size, pu

    void validate() const {
        if (!(t_start >= 0.0))
            throw ValidationError("event: t_start must be non-negative");
        if (kind == EventKind::three_phase_fault && !(duration > 0.0))
            throw ValidationError("event: fault duration must be positive");
        if (!(duration >= 0.0))
            throw ValidationError("event: duration must be non-negative");
        if (bus.has_value() == branch.has_value())
            throw ValidationError("event: exactly one of bus or branch must be given");
        if (kind == EventKind::load_step && !bus)
            throw ValidationError("event: load step must target a bus");
        if (kind == EventKind::line_trip && !branch)
            throw ValidationError("event: line trip must target a branch");
    }

    ShuntFault fault() const { return {bus, branch, cplx(severity, 0.0)}; }
};

struct SimulationOptions {
    double dt_max = 1e-3;
    double dt_min = 1e-5;
    double newton_tol = 1e-8;
    int newton_max_iter = 8;
    /// Recorded samples are at least this far apart (0 = every accepted step).
    double record_interval = 0.0;
};

struct Trace {
    std::vector<StateLabel> labels;
    std::vector<std::string> device_ids;
    std::vector<double> time;
    std::vector<Eigen::VectorXd> states;
    std::vector<std::vector<DeviceOutputs>> outputs;
    std::vector<std::string> log;   // events and protection flags
    double max_power_imbalance = 0.0;
    std::size_t steps = 0;

    std::size_t size() const { return time.size(); }

    std::size_t device(const std::string& id) const {
        for (std::size_t i = 0; i < device_ids.size(); ++i)
            if (device_ids[i] == id)
                return i;
        throw StructuralError("trace has no device " + id);
    }

    std::vector<double> rotor_speed(const std::string& id) const {
        const auto k = device(id);
        std::vector<double> out;
        out.reserve(outputs.size());
        for (const auto& o : outputs)
            out.push_back(o[k].rotor_speed);
        return out;
    }

    std::vector<double> active_power(const std::string& id) const {
        const auto k = device(id);
        std::vector<double> out;
        out.reserve(outputs.size());
        for (const auto& o : outputs)
            out.push_back(o[k].active_power);
        return out;
    }

    std::vector<double> state(const std::string& full_name) const {
        for (std::size_t j = 0; j < labels.size(); ++j) {
            if (labels[j].full_name() != full_name)
                continue;
            std::vector<double> out;
            out.reserve(states.size());
            for (const auto& x : states)
                out.push_back(x[static_cast<Eigen::Index>(j)]);
            return out;
        }
        throw StructuralError("trace has no state " + full_name);
    }
};

/// Integration failure; carries everything accepted before the failure.
class IntegrationError : public ConvergenceError {
public:
    IntegrationError(const std::string& what, double residual, Trace partial)
        : ConvergenceError(what, residual), partial_(std::move(partial)) {}
    const Trace& partial_trace() const { return partial_; }

private:
    Trace partial_;
};

namespace detail {

struct TimedAction {
    double t;
    Event event;
    bool is_clear; // automatic clearing of a timed fault
};

inline PowerSystem apply_event(const PowerSystem& sys, const TimedAction& a, std::vector<std::string>& log) {
    std::ostringstream msg;
    msg << std::setprecision(6) << "t=" << a.t << " ";
    const Event& e = a.event;
    const auto where = e.bus ? "bus " + std::to_string(*e.bus) : "branch " + std::to_string(*e.branch);
    PowerSystem out = sys;
    if ((e.kind == EventKind::three_phase_fault && a.is_clear) || e.kind == EventKind::clear_fault) {
        Network net = sys.network();
        std::erase_if(net.faults, [&](const ShuntFault& f) { return f.bus == e.bus && f.branch == e.branch; });
        out = sys.with_network(std::move(net));
        msg << "fault cleared at " << where;
    } else if (e.kind == EventKind::three_phase_fault) {
        out = sys.with_network(apply_three_phase_fault(sys.network(), e.fault()));
        msg << "three-phase fault at " << where;
    } else if (e.kind == EventKind::load_step) {
        Eigen::VectorXcd y = sys.load_shunts();
        y[static_cast<Eigen::Index>(sys.network().index_of(*e.bus))] += e.severity;
        out = sys.with_load_shunts(std::move(y));
        msg << "load step " << e.severity << " pu at " << where;
    } else {
        Network net = sys.network();
        if (*e.branch >= net.branches.size())
            throw StructuralError("line trip: unknown branch index " + std::to_string(*e.branch));
        net.branches[*e.branch].in_service = false;
        out = sys.with_network(std::move(net));
        msg << "line trip of " << where;
    }
    log.push_back(msg.str());
    return out;
}

inline Eigen::MatrixXd fd_jacobian(const PowerSystem& sys, const Eigen::VectorXd& x, const Eigen::VectorXd& fx) {
    const auto n = x.size();
    Eigen::MatrixXd j(n, n);
    Eigen::VectorXd xp = x;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double h = 1e-7 * std::max(1.0, std::abs(x[k]));
        xp[k] = x[k] + h;
        j.col(k) = (sys.derivatives(xp) - fx) / h;
        xp[k] = x[k];
    }
    return j;
}

} // namespace detail

/// Implicit trapezoidal integration with Newton iterations on a reused
/// finite-difference Jacobian. Steps end exactly on event times, where the
/// network is modified and integration restarts from the current states.
inline Trace simulate(const PowerSystem& system, const Eigen::VectorXd& x0, std::vector<Event> events,
                      double t_end, const SimulationOptions& opt = {}) {
    if (x0.size() != system.state_count())
        throw ValidationError("simulate: state vector size does not match the model");
    if (!(t_end > 0.0) || !(opt.dt_max > 0.0) || !(opt.dt_min > 0.0) || opt.dt_min > opt.dt_max)
        throw ValidationError("simulate: invalid time settings");
    for (std::size_t i = 0; i < events.size(); ++i) {
        events[i].validate();
        if (i > 0 && events[i].t_start < events[i - 1].t_start)
            throw ValidationError("simulate: events must be sorted by start time");
    }

    std::vector<detail::TimedAction> actions;
    for (const auto& e : events) {
        actions.push_back({e.t_start, e, false});
        if (e.kind == EventKind::three_phase_fault && e.duration > 0.0)
            actions.push_back({e.t_start + e.duration, e, true});
    }
    std::stable_sort(actions.begin(), actions.end(),
                     [](const auto& a, const auto& b) { return a.t < b.t; });

    Trace trace;
    trace.labels = system.labels();
    for (const auto& d : system.devices())
        trace.device_ids.push_back(device_id(d));

    PowerSystem sys = system;
    Eigen::VectorXd x = x0;
    double t = 0.0;
    double last_record = -std::numeric_limits<double>::infinity();
    std::vector<std::string> seen_flags;

    auto record = [&](bool force) {
        if (!force && t - last_record < opt.record_interval * (1.0 - 1e-9))
            return;
        if (!trace.time.empty() && !(t > trace.time.back()))
            return;
        std::vector<std::string> flags;
        trace.time.push_back(t);
        trace.states.push_back(x);
        trace.outputs.push_back(sys.outputs(x, &flags));
        trace.max_power_imbalance =
            std::max(trace.max_power_imbalance, std::abs(sys.power_balance_residual(x)));
        for (const auto& f : flags)
            if (std::find(seen_flags.begin(), seen_flags.end(), f) == seen_flags.end()) {
                seen_flags.push_back(f);
                std::ostringstream msg;
                msg << std::setprecision(6) << "t=" << t << " " << f;
                trace.log.push_back(msg.str());
            }
        last_record = t;
    };
    record(true);

    const auto n = x.size();
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd fx = sys.derivatives(x);
    Eigen::MatrixXd jac = detail::fd_jacobian(sys, x, fx);
    double h_lu = -1.0;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    bool jac_fresh = true;
    double h = opt.dt_max;
    std::size_t next_action = 0;

    auto fail = [&](const std::string& why, double residual) {
        std::ostringstream msg;
        msg << "simulate: " << why << " at t=" << t;
        throw IntegrationError(msg.str(), residual, trace);
    };

    while (t < t_end - 1e-12) {
        while (next_action < actions.size() && actions[next_action].t <= t + 1e-12) {
            sys = detail::apply_event(sys, actions[next_action], trace.log);
            ++next_action;
            fx = sys.derivatives(x);
            jac = detail::fd_jacobian(sys, x, fx);
            jac_fresh = true;
            h_lu = -1.0;
            h = opt.dt_max;
        }
        double t_stop = t_end;
        if (next_action < actions.size())
            t_stop = std::min(t_stop, actions[next_action].t);
        double step = std::min(h, t_stop - t);
        const bool lands_on_stop = step >= t_stop - t - 1e-12;

        // Newton on G(y) = y - x - step/2 (f(x) + f(y))
        Eigen::VectorXd y = x + step * fx;
        Eigen::VectorXd fy;
        bool converged = false;
        double last_norm = std::numeric_limits<double>::infinity();
        try {
            for (int attempt = 0; attempt < 2 && !converged; ++attempt) {
                if (h_lu != step) {
                    lu.compute(eye - 0.5 * step * jac);
                    h_lu = step;
                }
                y = x + step * fx;
                for (int it = 0; it < opt.newton_max_iter; ++it) {
                    fy = sys.derivatives(y);
                    const Eigen::VectorXd g = y - x - 0.5 * step * (fx + fy);
                    const Eigen::VectorXd dy = lu.solve(g);
                    y -= dy;
                    last_norm = dy.cwiseAbs().maxCoeff();
                    if (!std::isfinite(last_norm))
                        break;
                    if (last_norm <= opt.newton_tol) {
                        fy = sys.derivatives(y);
                        converged = true;
                        break;
                    }
                }
                if (!converged && !jac_fresh) {
                    jac = detail::fd_jacobian(sys, x, fx);
                    jac_fresh = true;
                    h_lu = -1.0;
                }
                else
                    break;
            }
        } catch (const ConvergenceError&) {
            converged = false;
        } catch (const ValidationError&) {
            converged = false;
        }

        if (!converged) {
            h = 0.5 * step;
            if (h < opt.dt_min)
                fail("Newton iteration failed after step halving to dt_min", last_norm);
            continue;
        }

        x = y;
        fx = fy;
        t = lands_on_stop ? t_stop : t + step;
        jac_fresh = false;
        ++trace.steps;
        if (!x.allFinite())
            fail("non-finite state", std::numeric_limits<double>::infinity());
        record(lands_on_stop || t >= t_end - 1e-12);
        h = std::min(opt.dt_max, 2.0 * h);
    }
    return trace;
}

/// CSV with a time column, every state, and per-device speed/power/frequency.
inline void write_trace_csv(const Trace& tr, std::ostream& os) {
    os << "time";
    for (const auto& l : tr.labels)
        os << ',' << l.full_name();
    for (const auto& id : tr.device_ids)
        os << ',' << id << ".speed," << id << ".p," << id << ".freq";
    os << '\n';
    os << std::setprecision(10);
    for (std::size_t i = 0; i < tr.size(); ++i) {
        os << tr.time[i];
        for (Eigen::Index j = 0; j < tr.states[i].size(); ++j)
            os << ',' << tr.states[i][j];
        for (const auto& o : tr.outputs[i])
            os << ',' << o.rotor_speed << ',' << o.active_power << ',' << o.bus_frequency;
        os << '\n';
    }
}

inline void write_trace_csv(const Trace& tr, const std::string& path) {
    std::ofstream os(path);
    if (!os)
        throw Error("cannot open " + path + " for writing");
    write_trace_csv(tr, os);
    if (!os)
        throw Error("failed writing " + path);
}

} // namespace dfigss
