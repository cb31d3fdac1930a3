#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "common.hpp"

namespace dfigss {

enum class BusKind { slack, pv, pq };

inline const char* to_string(BusKind k) {
    switch (k) {
    case BusKind::slack: return "slack";
    case BusKind::pv: return "PV";
    case BusKind::pq: return "PQ";
    }
    return "PQ";
}

/// Bus data in per-unit on the system base. For slack and PV buses
/// voltage_mag is the set point; voltage_angle is the slack reference.
struct Bus {
    int id = 0;
    BusKind kind = BusKind::pq;
    double base_kv = 230.0;
    double voltage_mag = 1.0;
    double voltage_angle = 0.0;
    double p_load = 0.0;
    double q_load = 0.0;
    double p_gen = 0.0; // scheduled injection (PV and PQ buses)
    double q_gen = 0.0; // scheduled injection (PQ buses)
    double g_shunt = 0.0;
    double b_shunt = 0.0;
    std::string name;
};

struct Branch {
    int from = 0;
    int to = 0;
    double r = 0.0;
    double x = 0.0;
    double b_shunt = 0.0; // total line charging
    double tap = 1.0;
    bool in_service = true;
    std::string name;

    cplx series_admittance() const { return 1.0 / cplx(r, x); }
};

/// Temporary shunt to ground, either at a bus or at the midpoint of a branch.
struct ShuntFault {
    std::optional<int> bus;
    std::optional<std::size_t> branch; // index into Network::branches
    cplx admittance{1e4, 0.0};

    bool operator==(const ShuntFault&) const = default;
};

struct Network {
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    double system_base_mva = 100.0;
    double nominal_frequency_hz = 60.0;
    std::vector<ShuntFault> faults;

    std::size_t bus_count() const { return buses.size(); }

    std::size_t index_of(int bus_id) const {
        for (std::size_t i = 0; i < buses.size(); ++i)
            if (buses[i].id == bus_id)
                return i;
        throw StructuralError("unknown bus id " + std::to_string(bus_id));
    }

    std::size_t slack_index() const {
        for (std::size_t i = 0; i < buses.size(); ++i)
            if (buses[i].kind == BusKind::slack)
                return i;
        throw StructuralError("network has no slack bus");
    }

    std::optional<std::size_t> find_branch(int from, int to) const {
        for (std::size_t k = 0; k < branches.size(); ++k) {
            const auto& br = branches[k];
            if ((br.from == from && br.to == to) || (br.from == to && br.to == from))
                return k;
        }
        return std::nullopt;
    }
};

inline void validate(const Network& net) {
    if (net.buses.empty())
        throw StructuralError("network has no buses");
    std::set<int> ids;
    int slack_count = 0;
    for (const auto& b : net.buses) {
        if (!ids.insert(b.id).second)
            throw ValidationError("duplicate bus id " + std::to_string(b.id));
        if (b.kind == BusKind::slack)
            ++slack_count;
        if (!(b.voltage_mag > 0.0))
            throw ValidationError("bus " + std::to_string(b.id) + ": voltage magnitude must be positive");
    }
    if (slack_count != 1)
        throw StructuralError("network must have exactly one slack bus, found " +
                              std::to_string(slack_count));
    for (const auto& br : net.branches) {
        if (!ids.count(br.from) || !ids.count(br.to))
            throw StructuralError("branch references an unknown bus");
        if (br.from == br.to)
            throw ValidationError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                                  " connects a bus to itself");
        if (br.x == 0.0)
            throw ValidationError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                                  " has zero reactance");
        if (!(br.tap > 0.0))
            throw ValidationError("branch tap must be positive");
    }
    if (!(net.system_base_mva > 0.0))
        throw ValidationError("system base must be positive");

    // connectivity over in-service branches
    std::map<int, std::vector<int>> adj;
    for (const auto& br : net.branches) {
        if (!br.in_service)
            continue;
        adj[br.from].push_back(br.to);
        adj[br.to].push_back(br.from);
    }
    std::set<int> seen{net.buses.front().id};
    std::queue<int> q;
    q.push(net.buses.front().id);
    while (!q.empty()) {
        const int u = q.front();
        q.pop();
        for (int v : adj[u])
            if (seen.insert(v).second)
                q.push(v);
    }
    if (seen.size() != net.buses.size())
        throw StructuralError("network is not connected over in-service branches");
}

/// Constant-impedance equivalents of the bus loads at the given voltages.
inline Eigen::VectorXcd load_admittances(const Network& net, const Eigen::VectorXcd& v) {
    Eigen::VectorXcd y(static_cast<Eigen::Index>(net.buses.size()));
    for (std::size_t i = 0; i < net.buses.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double vm2 = std::norm(v[ii]);
        y[ii] = cplx(net.buses[i].p_load, -net.buses[i].q_load) / vm2;
    }
    return y;
}

/// Bus admittance matrix. Diagonal = sum of incident series admittances,
/// half line charging, bus shunts, active faults and (optionally) load shunts.
inline Eigen::MatrixXcd build_ybus(const Network& net,
                                   const Eigen::VectorXcd* load_shunts = nullptr) {
    validate(net);
    const auto n = static_cast<Eigen::Index>(net.buses.size());
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
    std::map<int, Eigen::Index> idx;
    for (Eigen::Index i = 0; i < n; ++i)
        idx[net.buses[static_cast<std::size_t>(i)].id] = i;

    std::vector<bool> midpoint_faulted(net.branches.size(), false);
    for (const auto& f : net.faults)
        if (f.branch) {
            if (*f.branch >= net.branches.size())
                throw StructuralError("fault references an unknown branch");
            midpoint_faulted[*f.branch] = true;
        }

    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const auto& br = net.branches[k];
        if (!br.in_service)
            continue;
        const Eigen::Index i = idx.at(br.from), j = idx.at(br.to);
        const cplx ys = br.series_admittance();
        const cplx ysh(0.0, br.b_shunt / 2.0);
        if (!midpoint_faulted[k]) {
            const double a = br.tap;
            y(i, i) += ys / (a * a) + ysh;
            y(j, j) += ys + ysh;
            y(i, j) -= ys / a;
            y(j, i) -= ys / a;
            continue;
        }
        if (br.tap != 1.0)
            throw ValidationError("midpoint faults are only supported on lines without taps");
        // Two half sections meeting at a faulted midpoint node, Kron-reduced.
        cplx yf{0.0, 0.0};
        for (const auto& f : net.faults)
            if (f.branch && *f.branch == k)
                yf += f.admittance;
        const cplx yh = 2.0 * ys;
        const cplx yq(0.0, br.b_shunt / 4.0);
        const cplx ymm = 2.0 * yh + 2.0 * yq + yf;
        y(i, i) += yh + yq - yh * yh / ymm;
        y(j, j) += yh + yq - yh * yh / ymm;
        y(i, j) -= yh * yh / ymm;
        y(j, i) -= yh * yh / ymm;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& b = net.buses[static_cast<std::size_t>(i)];
        y(i, i) += cplx(b.g_shunt, b.b_shunt);
    }
    for (const auto& f : net.faults)
        if (f.bus)
            y(idx.at(*f.bus), idx.at(*f.bus)) += f.admittance;
    if (load_shunts) {
        if (load_shunts->size() != n)
            throw ValidationError("load shunt vector has wrong size");
        for (Eigen::Index i = 0; i < n; ++i)
            y(i, i) += (*load_shunts)[i];
    }
    return y;
}

/// Returns a copy of the network with a fault shunt inserted. Target is either
/// a bus id or a branch index (fault at the branch midpoint).
inline Network apply_three_phase_fault(const Network& net, ShuntFault fault) {
    if (fault.bus.has_value() == fault.branch.has_value())
        throw ValidationError("fault must target exactly one bus or one branch");
    if (fault.bus)
        (void)net.index_of(*fault.bus);
    if (fault.branch && *fault.branch >= net.branches.size())
        throw StructuralError("unknown branch index " + std::to_string(*fault.branch));
    Network out = net;
    out.faults.push_back(fault);
    return out;
}

/// Inverse of apply_three_phase_fault: removes the matching fault entry.
inline Network clear_fault(const Network& net, const ShuntFault& fault) {
    Network out = net;
    auto it = std::find(out.faults.begin(), out.faults.end(), fault);
    if (it == out.faults.end())
        throw StructuralError("clear_fault: no such fault is active");
    out.faults.erase(it);
    return out;
}

// ---------------------------------------------------------------------------
// Power flow
// ---------------------------------------------------------------------------

struct PowerFlowOptions {
    double tol = 1e-8;
    int max_iter = 50;
    std::optional<Eigen::VectorXcd> initial; // warm start; flat start when empty
};

struct PowerFlowSolution {
    std::vector<int> bus_ids;
    Eigen::VectorXcd voltage;  // per bus, same order as bus_ids
    Eigen::VectorXd p_gen;     // net generation injected at each bus
    Eigen::VectorXd q_gen;
    double mismatch_norm = 0.0; // max |dP|, |dQ| over equations
    int iterations = 0;
    double total_generation = 0.0;
    double total_load = 0.0;
    double losses = 0.0;

    cplx voltage_at(int bus_id) const {
        for (std::size_t i = 0; i < bus_ids.size(); ++i)
            if (bus_ids[i] == bus_id)
                return voltage[static_cast<Eigen::Index>(i)];
        throw StructuralError("unknown bus id " + std::to_string(bus_id));
    }
    double p_at(int bus_id) const { return p_gen[static_cast<Eigen::Index>(position(bus_id))]; }
    double q_at(int bus_id) const { return q_gen[static_cast<Eigen::Index>(position(bus_id))]; }

private:
    std::size_t position(int bus_id) const {
        for (std::size_t i = 0; i < bus_ids.size(); ++i)
            if (bus_ids[i] == bus_id)
                return i;
        throw StructuralError("unknown bus id " + std::to_string(bus_id));
    }
};

/// Polar Newton-Raphson power flow from a flat start (or `opt.initial`).
inline PowerFlowSolution solve_power_flow(const Network& net, const PowerFlowOptions& opt = {}) {
    const Eigen::MatrixXcd ybus = build_ybus(net);
    const auto n = static_cast<Eigen::Index>(net.buses.size());

    std::vector<Eigen::Index> pvpq, pq;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = net.buses[static_cast<std::size_t>(i)].kind;
        if (k != BusKind::slack)
            pvpq.push_back(i);
        if (k == BusKind::pq)
            pq.push_back(i);
    }
    const auto npvpq = static_cast<Eigen::Index>(pvpq.size());
    const auto npq = static_cast<Eigen::Index>(pq.size());

    Eigen::VectorXd vm(n), va(n);
    Eigen::VectorXd p_sched(n), q_sched(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& b = net.buses[static_cast<std::size_t>(i)];
        vm[i] = b.kind == BusKind::pq ? 1.0 : b.voltage_mag;
        va[i] = net.buses[net.slack_index()].voltage_angle;
        p_sched[i] = b.p_gen - b.p_load;
        q_sched[i] = b.q_gen - b.q_load;
    }
    if (opt.initial) {
        if (opt.initial->size() != n)
            throw ValidationError("power flow initial voltage vector has wrong size");
        for (Eigen::Index i = 0; i < n; ++i) {
            if (net.buses[static_cast<std::size_t>(i)].kind == BusKind::pq)
                vm[i] = std::abs((*opt.initial)[i]);
            if (net.buses[static_cast<std::size_t>(i)].kind != BusKind::slack)
                va[i] = std::arg((*opt.initial)[i]);
        }
    }

    auto phasors = [&]() {
        Eigen::VectorXcd v(n);
        for (Eigen::Index i = 0; i < n; ++i)
            v[i] = std::polar(vm[i], va[i]);
        return v;
    };
    auto mismatch = [&](const Eigen::VectorXcd& v) {
        const Eigen::VectorXcd s = v.cwiseProduct((ybus * v).conjugate());
        Eigen::VectorXd f(npvpq + npq);
        for (Eigen::Index k = 0; k < npvpq; ++k)
            f[k] = p_sched[pvpq[k]] - s[pvpq[k]].real();
        for (Eigen::Index k = 0; k < npq; ++k)
            f[npvpq + k] = q_sched[pq[k]] - s[pq[k]].imag();
        return f;
    };

    PowerFlowSolution sol;
    Eigen::VectorXcd v = phasors();
    Eigen::VectorXd f = mismatch(v);
    double norm = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
    int it = 0;
    while (norm > opt.tol) {
        if (it >= opt.max_iter) {
            std::ostringstream msg;
            msg << "power flow did not converge in " << opt.max_iter
                << " iterations, final mismatch " << norm << " pu";
            throw ConvergenceError(msg.str(), norm);
        }
        // dS/dVa and dS/dVm in complex form
        const Eigen::VectorXcd ibus = ybus * v;
        const Eigen::MatrixXcd diag_v = v.asDiagonal();
        const Eigen::VectorXcd vnorm = v.cwiseQuotient(v.cwiseAbs().cast<cplx>());
        const Eigen::MatrixXcd ds_dva =
            cplx(0.0, 1.0) * diag_v * (Eigen::MatrixXcd(ibus.asDiagonal()) - ybus * diag_v).conjugate();
        const Eigen::MatrixXcd ds_dvm =
            diag_v * (ybus * vnorm.asDiagonal()).conjugate() +
            Eigen::MatrixXcd(ibus.conjugate().asDiagonal()) * vnorm.asDiagonal();

        Eigen::MatrixXd jac(npvpq + npq, npvpq + npq);
        for (Eigen::Index r = 0; r < npvpq; ++r) {
            for (Eigen::Index c = 0; c < npvpq; ++c)
                jac(r, c) = ds_dva(pvpq[r], pvpq[c]).real();
            for (Eigen::Index c = 0; c < npq; ++c)
                jac(r, npvpq + c) = ds_dvm(pvpq[r], pq[c]).real();
        }
        for (Eigen::Index r = 0; r < npq; ++r) {
            for (Eigen::Index c = 0; c < npvpq; ++c)
                jac(npvpq + r, c) = ds_dva(pq[r], pvpq[c]).imag();
            for (Eigen::Index c = 0; c < npq; ++c)
                jac(npvpq + r, npvpq + c) = ds_dvm(pq[r], pq[c]).imag();
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
        if (!lu.isInvertible())
            throw SingularError("power flow Jacobian is singular");
        const Eigen::VectorXd dx = lu.solve(f);
        for (Eigen::Index k = 0; k < npvpq; ++k)
            va[pvpq[k]] += dx[k];
        for (Eigen::Index k = 0; k < npq; ++k)
            vm[pq[k]] += dx[npvpq + k];
        ++it;
        v = phasors();
        f = mismatch(v);
        norm = f.cwiseAbs().maxCoeff();
        if (!std::isfinite(norm))
            throw ConvergenceError("power flow diverged", norm);
    }
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(std::abs(v[i]) > 0.0))
            throw ConvergenceError("power flow produced a zero voltage", norm);

    const Eigen::VectorXcd s = v.cwiseProduct((ybus * v).conjugate());
    sol.voltage = v;
    sol.p_gen.resize(n);
    sol.q_gen.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& b = net.buses[static_cast<std::size_t>(i)];
        sol.bus_ids.push_back(b.id);
        sol.p_gen[i] = s[i].real() + b.p_load;
        sol.q_gen[i] = s[i].imag() + b.q_load;
        sol.total_generation += sol.p_gen[i];
        sol.total_load += b.p_load;
    }
    sol.losses = sol.total_generation - sol.total_load;
    sol.mismatch_norm = norm;
    sol.iterations = it;
    return sol;
}

} // namespace dfigss
