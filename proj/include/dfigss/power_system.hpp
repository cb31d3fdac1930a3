#pragma once

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "dfig.hpp"
#include "modal.hpp"
#include "network.hpp"
#include "sync_machine.hpp"

namespace dfigss {

struct SyncGenDevice {
    std::string id;
    int bus = 0;
    SyncGenParams params{};
    SyncGenSetpoints setpoints{};
};

struct DfigDevice {
    std::string id;
    int bus = 0;
    DfigParams params{};
    DfigSetpoints setpoints{};
    WindOperatingPoint wind{};
};

using Device = std::variant<SyncGenDevice, DfigDevice>;

inline const std::string& device_id(const Device& d) {
    return std::visit([](const auto& x) -> const std::string& { return x.id; }, d);
}
inline int device_bus(const Device& d) {
    return std::visit([](const auto& x) { return x.bus; }, d);
}
inline double device_base_mva(const Device& d) {
    return std::visit([](const auto& x) { return x.params.base_mva; }, d);
}
inline int device_state_count(const Device& d) {
    return std::holds_alternative<SyncGenDevice>(d) ? static_cast<int>(sg::count) : static_cast<int>(df::count);
}
inline DeviceClass device_class(const Device& d) {
    return std::holds_alternative<SyncGenDevice>(d) ? DeviceClass::synchronous
                                                    : DeviceClass::converter_based;
}

/// Quantities recorded per device in time-domain traces.
struct DeviceOutputs {
    double rotor_speed = 1.0;     // pu
    double active_power = 0.0;    // pu on device base
    double bus_frequency = 1.0;   // pu
    double reactive_power = 0.0;  // pu on device base
    double reference_power = 0.0; // commanded active power (pu device base); Pm for machines
};

/// Assembled multi-machine model: device ODEs coupled through the network.
///
/// Loads are constant admittances and each synchronous machine appears as a
/// Norton source behind its subtransient impedance, so the network equations
/// are linear except at converter buses, which are solved by Newton's method
/// at every evaluation (simultaneous solution of the algebraic equations).
class PowerSystem {
public:
    PowerSystem(Network net, std::vector<Device> devices, Eigen::VectorXcd load_shunts)
        : net_(std::move(net)), devices_(std::move(devices)), load_shunts_(std::move(load_shunts)) {
        omega0_ = 2.0 * std::numbers::pi * net_.nominal_frequency_hz;
        int off = 0;
        std::set<int> used_buses;
        for (const auto& d : devices_) {
            offsets_.push_back(off);
            off += device_state_count(d);
            bus_index_.push_back(static_cast<Eigen::Index>(net_.index_of(device_bus(d))));
            if (!used_buses.insert(device_bus(d)).second)
                throw ValidationError("at most one dynamic device per bus is supported");
            std::visit([](const auto& x) { x.params.validate(); }, d);
        }
        n_states_ = off;
        refactor();
    }

    const Network& network() const { return net_; }
    const std::vector<Device>& devices() const { return devices_; }
    const Eigen::VectorXcd& load_shunts() const { return load_shunts_; }
    double omega0() const { return omega0_; }
    Eigen::Index state_count() const { return n_states_; }
    int offset(std::size_t device) const { return offsets_[device]; }

    std::size_t device_index(const std::string& id) const {
        for (std::size_t i = 0; i < devices_.size(); ++i)
            if (device_id(devices_[i]) == id)
                return i;
        throw StructuralError("unknown device id " + id);
    }

    std::vector<StateLabel> labels() const {
        std::vector<StateLabel> out;
        for (const auto& d : devices_) {
            const auto cls = device_class(d);
            if (std::holds_alternative<SyncGenDevice>(d))
                for (auto n : sg::names)
                    out.push_back({device_id(d), n, cls});
            else
                for (auto n : df::names)
                    out.push_back({device_id(d), n, cls});
        }
        return out;
    }

    /// Copy with a different network topology or fault set (same devices).
    PowerSystem with_network(Network net) const {
        PowerSystem out = *this;
        out.net_ = std::move(net);
        out.refactor();
        return out;
    }

    PowerSystem with_load_shunts(Eigen::VectorXcd y) const {
        PowerSystem out = *this;
        out.load_shunts_ = std::move(y);
        out.refactor();
        return out;
    }

    PowerSystem with_device(std::size_t i, Device d) const {
        PowerSystem out = *this;
        out.devices_.at(i) = std::move(d);
        out.refactor();
        return out;
    }

    /// Bus voltages consistent with the device states.
    Eigen::VectorXcd bus_voltages(const Eigen::VectorXd& x) const {
        Eigen::VectorXcd inj = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(net_.bus_count()));
        for (std::size_t k = 0; k < devices_.size(); ++k) {
            if (const auto* g = std::get_if<SyncGenDevice>(&devices_[k]))
                inj[bus_index_[k]] += norton_current(sync_state(x, k), g->params) * ratio(k);
        }
        Eigen::VectorXcd v = z_ * inj;
        if (dfig_devices_.empty())
            return v;
        solve_converter_buses(x, v);
        return v;
    }

    Eigen::VectorXd derivatives(const Eigen::VectorXd& x) const {
        Eigen::VectorXd dx(n_states_);
        const Eigen::VectorXcd v = bus_voltages(x);
        for (std::size_t k = 0; k < devices_.size(); ++k) {
            const cplx vt = v[bus_index_[k]];
            if (const auto* g = std::get_if<SyncGenDevice>(&devices_[k])) {
                dx.segment<sg::count>(offsets_[k]) =
                    sync_gen_derivatives(sync_state(x, k), vt, g->params, g->setpoints, omega0_).dx;
            } else {
                const auto& w = std::get<DfigDevice>(devices_[k]);
                dx.segment<df::count>(offsets_[k]) =
                    dfig_derivatives(dfig_state(x, k), vt, w.params, w.setpoints, w.wind, omega0_).dx;
            }
        }
        return dx;
    }

    Eigen::VectorXd operator()(const Eigen::VectorXd& x) const { return derivatives(x); }

    std::vector<DeviceOutputs> outputs(const Eigen::VectorXd& x, std::vector<std::string>* flags = nullptr) const {
        const Eigen::VectorXcd v = bus_voltages(x);
        std::vector<DeviceOutputs> out(devices_.size());
        for (std::size_t k = 0; k < devices_.size(); ++k) {
            const cplx vt = v[bus_index_[k]];
            if (const auto* g = std::get_if<SyncGenDevice>(&devices_[k])) {
                const auto xs = sync_state(x, k);
                const auto r = sync_gen_derivatives(xs, vt, g->params, g->setpoints, omega0_);
                const cplx s = vt * std::conj(r.current);
                out[k] = {1.0 + xs[sg::domega], s.real(), 1.0 + xs[sg::domega], s.imag(), xs[sg::pm]};
            } else {
                const auto& w = std::get<DfigDevice>(devices_[k]);
                const auto xs = dfig_state(x, k);
                const auto r = dfig_derivatives(xs, vt, w.params, w.setpoints, w.wind, omega0_);
                const double f_pll =
                    1.0 + w.params.pll_kp * (vt * std::polar(1.0, -xs[df::theta_pll])).imag() /
                              std::max(std::abs(vt), 1e-6) + xs[df::x_pll];
                out[k] = {xs[df::omega_r], r.p_e, f_pll, r.q_e, r.p_ref};
                if (flags && r.speed_out_of_bounds)
                    flags->push_back(w.id + ": rotor speed outside protection bounds");
            }
        }
        return out;
    }

    /// Total device injection minus load, shunt, fault and branch losses,
    /// evaluated from bus voltages and branch flows (system base).
    double power_balance_residual(const Eigen::VectorXd& x) const {
        const Eigen::VectorXcd v = bus_voltages(x);
        const auto outs = outputs(x);
        double gen = 0.0;
        for (std::size_t k = 0; k < devices_.size(); ++k)
            gen += outs[k].active_power * ratio(k);
        double consumed = 0.0;
        for (std::size_t i = 0; i < net_.bus_count(); ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            consumed += std::norm(v[ii]) * (load_shunts_[ii].real() + net_.buses[i].g_shunt);
        }
        for (const auto& f : net_.faults)
            if (f.bus)
                consumed += std::norm(v[static_cast<Eigen::Index>(net_.index_of(*f.bus))]) * f.admittance.real();
        for (std::size_t k = 0; k < net_.branches.size(); ++k) {
            const auto& br = net_.branches[k];
            if (!br.in_service)
                continue;
            const cplx vi = v[static_cast<Eigen::Index>(net_.index_of(br.from))];
            const cplx vj = v[static_cast<Eigen::Index>(net_.index_of(br.to))];
            bool faulted = false;
            for (const auto& f : net_.faults)
                faulted |= f.branch && *f.branch == k;
            if (faulted) {
                // power into both ends of a midpoint-faulted line
                const cplx yh = 2.0 * br.series_admittance();
                const cplx yq(0.0, br.b_shunt / 4.0);
                cplx yf{0.0, 0.0};
                for (const auto& f : net_.faults)
                    if (f.branch && *f.branch == k)
                        yf += f.admittance;
                const cplx vm = yh * (vi + vj) / (2.0 * yh + 2.0 * yq + yf);
                const cplx ii = yh * (vi - vm) + yq * vi;
                const cplx ij = yh * (vj - vm) + yq * vj;
                consumed += (vi * std::conj(ii) + vj * std::conj(ij)).real();
                continue;
            }
            const double a = br.tap;
            const cplx ys = br.series_admittance();
            const cplx ysh(0.0, br.b_shunt / 2.0);
            const cplx ii = (ys / (a * a) + ysh) * vi - ys / a * vj;
            const cplx ij = (ys + ysh) * vj - ys / a * vi;
            consumed += (vi * std::conj(ii) + vj * std::conj(ij)).real();
        }
        return gen - consumed;
    }

    SyncGenState sync_state(const Eigen::VectorXd& x, std::size_t k) const {
        return x.segment<sg::count>(offsets_[k]);
    }
    DfigState dfig_state(const Eigen::VectorXd& x, std::size_t k) const {
        return x.segment<df::count>(offsets_[k]);
    }

    /// Device base to system base multiplier.
    double ratio(std::size_t k) const { return device_base_mva(devices_[k]) / net_.system_base_mva; }

private:
    void refactor() {
        Eigen::MatrixXcd y = build_ybus(net_, &load_shunts_);
        dfig_devices_.clear();
        for (std::size_t k = 0; k < devices_.size(); ++k) {
            const auto b = bus_index_[k];
            if (const auto* g = std::get_if<SyncGenDevice>(&devices_[k])) {
                y(b, b) += ratio(k) / subtransient_impedance(g->params);
            } else {
                const auto& w = std::get<DfigDevice>(devices_[k]);
                y(b, b) += ratio(k) * magnetizing_admittance(w.params);
                dfig_devices_.push_back(k);
            }
        }
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu(y);
        z_ = lu.inverse();
        if (!z_.allFinite())
            throw SingularError("augmented network admittance matrix is singular");
        const auto nw = static_cast<Eigen::Index>(dfig_devices_.size());
        z_cols_.resize(z_.rows(), nw);
        for (Eigen::Index j = 0; j < nw; ++j)
            z_cols_.col(j) = z_.col(bus_index_[dfig_devices_[static_cast<std::size_t>(j)]]);
    }

    /// Adds converter injections to v = Z * I_sync and enforces consistency
    /// at converter buses: V_w = V0_w + Z_ww I_w(V_w).
    void solve_converter_buses(const Eigen::VectorXd& x, Eigen::VectorXcd& v) const {
        const auto nw = static_cast<Eigen::Index>(dfig_devices_.size());
        Eigen::VectorXcd v0(nw), vw(nw);
        for (Eigen::Index j = 0; j < nw; ++j) {
            v0[j] = v[bus_index_[dfig_devices_[static_cast<std::size_t>(j)]]];
            vw[j] = v0[j];
        }
        auto injections = [&](const Eigen::VectorXcd& vb) {
            Eigen::VectorXcd i(nw);
            for (Eigen::Index j = 0; j < nw; ++j) {
                const auto k = dfig_devices_[static_cast<std::size_t>(j)];
                const auto& w = std::get<DfigDevice>(devices_[k]);
                const cplx vv = std::abs(vb[j]) < 1e-4 ? cplx(1e-4, 0.0) : vb[j];
                i[j] = converter_current(dfig_state(x, k), vv, w.params) * ratio(k);
            }
            return i;
        };
        Eigen::MatrixXcd zww(nw, nw);
        for (Eigen::Index j = 0; j < nw; ++j)
            for (Eigen::Index c = 0; c < nw; ++c)
                zww(j, c) = z_cols_(bus_index_[dfig_devices_[static_cast<std::size_t>(j)]], c);

        auto residual = [&](const Eigen::VectorXcd& vb) -> Eigen::VectorXd {
            const Eigen::VectorXcd r = vb - v0 - zww * injections(vb);
            Eigen::VectorXd out(2 * nw);
            for (Eigen::Index j = 0; j < nw; ++j) {
                out[2 * j] = r[j].real();
                out[2 * j + 1] = r[j].imag();
            }
            return out;
        };
        Eigen::VectorXd r = residual(vw);
        for (int it = 0; it < 50 && r.cwiseAbs().maxCoeff() > 1e-14; ++it) {
            Eigen::MatrixXd jac(2 * nw, 2 * nw);
            for (Eigen::Index c = 0; c < 2 * nw; ++c) {
                Eigen::VectorXcd vp = vw;
                const double h = 1e-7;
                vp[c / 2] += (c % 2 == 0) ? cplx(h, 0.0) : cplx(0.0, h);
                jac.col(c) = (residual(vp) - r) / h;
            }
            const Eigen::VectorXd step = jac.partialPivLu().solve(r);
            for (Eigen::Index j = 0; j < nw; ++j)
                vw[j] -= cplx(step[2 * j], step[2 * j + 1]);
            r = residual(vw);
        }
        if (!(r.cwiseAbs().maxCoeff() <= 1e-9))
            throw ConvergenceError("converter bus voltage solve did not converge", r.cwiseAbs().maxCoeff());
        v += z_cols_ * injections(vw);
    }

    Network net_;
    std::vector<Device> devices_;
    Eigen::VectorXcd load_shunts_;
    double omega0_ = 0.0;
    std::vector<int> offsets_;
    std::vector<Eigen::Index> bus_index_;
    std::vector<std::size_t> dfig_devices_;
    Eigen::Index n_states_ = 0;
    Eigen::MatrixXcd z_;
    Eigen::MatrixXcd z_cols_;
};

/// Device placement: parameters and bus, before initialization.
struct SyncGenSpec {
    std::string id;
    int bus = 0;
    SyncGenParams params{};
};
struct DfigSpec {
    std::string id;
    int bus = 0;
    DfigParams params{};
};
using DeviceSpec = std::variant<SyncGenSpec, DfigSpec>;

struct Equilibrium {
    PowerSystem system;
    Eigen::VectorXd x0;
    PowerFlowSolution power_flow;
};

/// Converts loads to constant impedance at the solved voltages and places
/// every device at its power-flow operating point.
inline Equilibrium initialize_system(const Network& net, const std::vector<DeviceSpec>& specs,
                                     const PowerFlowSolution& pf) {
    const Eigen::VectorXcd y_load = load_admittances(net, pf.voltage);
    std::vector<Device> devices;
    std::vector<Eigen::VectorXd> states;
    for (const auto& spec : specs) {
        std::visit(
            [&](const auto& s) {
                const cplx v = pf.voltage_at(s.bus);
                const double ratio = s.params.base_mva / net.system_base_mva;
                cplx s_dev(pf.p_at(s.bus), pf.q_at(s.bus));
                s_dev /= ratio;
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, SyncGenSpec>) {
                    const auto init = initialize_sync_gen(v, s_dev, s.params);
                    devices.emplace_back(SyncGenDevice{s.id, s.bus, s.params, init.setpoints});
                    states.emplace_back(init.x);
                } else {
                    const auto init = initialize_dfig(v, s_dev, s.params);
                    devices.emplace_back(DfigDevice{s.id, s.bus, s.params, init.setpoints, init.wind});
                    states.emplace_back(init.x);
                }
            },
            spec);
    }
    // the network itself carries the loads as shunts from here on
    Network dyn = net;
    PowerSystem sys(dyn, std::move(devices), y_load);
    Eigen::VectorXd x0(sys.state_count());
    for (std::size_t k = 0; k < states.size(); ++k)
        x0.segment(sys.offset(k), states[k].size()) = states[k];
    return {std::move(sys), std::move(x0), pf};
}

} // namespace dfigss
