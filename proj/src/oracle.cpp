#include "primer/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>

#include "json.hpp"

namespace primer {

InertialVector InertialPoint::as_vector() const {
    InertialVector y;
    y << r, v, p, pdot, dv, psi_dv;
    return y;
}

InertialPoint InertialPoint::from_vector(const InertialVector& y, double t) {
    InertialPoint pt;
    pt.t = t;
    pt.r = y.segment<3>(0);
    pt.v = y.segment<3>(3);
    pt.p = y.segment<3>(6);
    pt.pdot = y.segment<3>(9);
    pt.dv = y[12];
    pt.psi_dv = y[13];
    return pt;
}

InertialPoint embed_to_inertial(const OrbitalState& st, const AdjointState& adj, const AdjointConstants& consts,
                                double dlam_dt, double dmu_dt) {
    if (st.chi != 0.0) throw DomainError("only points with zero plane change can be embedded");
    if (!(st.r > 0.0) || !(st.v_theta > 0.0)) throw DomainError("invalid orbital state");

    const Vec3 r_hat(std::cos(st.theta), std::sin(st.theta), 0.0);
    const Vec3 t_hat(-std::sin(st.theta), std::cos(st.theta), 0.0);
    const Vec3 h_hat(0.0, 0.0, 1.0);
    const double omega = st.v_theta / st.r;
    const double nu = consts.e_const / st.v_theta;
    const double dnu_dt = st.v_r / st.r * nu;

    InertialPoint pt;
    pt.t = st.t;
    pt.r = st.r * r_hat;
    pt.v = st.v_r * r_hat + st.v_theta * t_hat;
    pt.p = adj.lam * r_hat + adj.mu * t_hat + nu * h_hat;
    pt.pdot = (dlam_dt - omega * adj.mu) * r_hat + (dmu_dt + omega * adj.lam) * t_hat + dnu_dt * h_hat;
    pt.dv = st.dv;
    pt.psi_dv = adj.psi_dv;
    return pt;
}

InertialPoint embed_to_inertial(const OrbitalState& st, const AdjointState& adj, const AdjointConstants& consts,
                                const Vehicle& vehicle, const PhysicalConstants& k, Engine engine) {
    const auto d = reduced_rhs(st, adj, consts, vehicle, k, engine, nullptr, 1.0, false);
    return embed_to_inertial(st, adj, consts, d.lam, d.mu);
}

InertialVector full_rhs(const InertialPoint& pt, const Vehicle& vehicle, const PhysicalConstants& k, Engine engine) {
    const double rn = pt.r.norm();
    if (!(rn > 0.0)) throw DomainError("position vector must be nonzero");
    const double rn3 = rn * rn * rn;
    const double a = thrust_accel(pt.dv, vehicle, k, engine);

    Vec3 thrust = Vec3::Zero();
    const double pn = pt.p.norm();
    if (is_on(engine)) {
        if (!(pn > 0.0)) throw DomainError("thrust direction undefined for a zero primer");
        thrust = a * pt.p / pn;
    }
    const Vec3 pddot = 3.0 * k.gamma * pt.r.dot(pt.p) / (rn3 * rn * rn) * pt.r - k.gamma / rn3 * pt.p;

    InertialVector d;
    d << pt.v, -k.gamma / rn3 * pt.r + thrust, pt.pdot, pddot, a,
        -a * (pt.psi_dv + pn) / vehicle.exhaust_velocity(k);
    return d;
}

double full_kappa(const InertialPoint& pt) { return pt.psi_dv + pt.p.norm(); }

Vec3 pines_z(const InertialPoint& pt) { return pt.pdot.cross(pt.r) - pt.p.cross(pt.v); }

double hamiltonian_full(const InertialPoint& pt, const Vehicle& vehicle, const PhysicalConstants& k, Engine engine,
                        double c_const) {
    const double rn = pt.r.norm();
    const double a = thrust_accel(pt.dv, vehicle, k, engine);
    const double h = -k.gamma * pt.r.dot(pt.p) / (rn * rn * rn) - pt.v.dot(pt.pdot) + a * full_kappa(pt) + c_const;
    return h / (k.gamma / (rn * rn));
}

namespace {

class FullPropagator {
public:
    FullPropagator(const Vehicle& vehicle, const PhysicalConstants& k, const StopCondition& stop,
                   const FullPropagationOptions& opts)
        : vehicle_(vehicle), k_(k), stop_(stop), opts_(opts) {}

    FullPropagation run(const InertialPoint& init) {
        if (!(opts_.step > 0.0)) throw DomainError("step must be positive");
        stop_.validate();
        if (stop_.variable == StopVariable::angle) {
            throw DomainError("angle stop conditions are not supported by the full system");
        }
        t_ = init.t;
        y_ = init.as_vector();
        engine_ = opts_.policy == EventPolicy::slaved ? opts_.initial_engine
                                                      : (full_kappa(init) >= 0.0 ? Engine::on : Engine::off);
        record();
        std::size_t next_switch = 0;
        int crossings = 0;

        while (true) {
            if (t_ >= opts_.t_max) {
                throw PropagationError(PropagationError::Reason::stop_not_met, "stop condition never met within t_max");
            }
            double h = opts_.step;
            bool slaved_switch = false;
            if (opts_.policy == EventPolicy::slaved && next_switch < opts_.switch_times.size() &&
                opts_.switch_times[next_switch] - t_ <= h) {
                h = std::max(0.0, opts_.switch_times[next_switch] - t_);
                slaved_switch = true;
            }
            bool lands_on_time_stop = false;
            if (stop_.variable == StopVariable::time && stop_.target - t_ <= h * (1.0 + 1e-12)) {
                h = stop_.target - t_;
                lands_on_time_stop = true;
                slaved_switch = false;
            }

            const InertialVector y_new = h > 0.0 ? step(y_, h) : y_;
            check(y_new);

            bool switch_in_step = false;
            if (opts_.policy == EventPolicy::independent) {
                switch_in_step = (kappa(y_new) >= 0.0) != is_on(engine_);
            }
            bool stop_in_step = false;
            if (stop_.variable != StopVariable::time) {
                const double g0 = stop_value(y_, t_);
                const double g1 = stop_value(y_new, t_ + h);
                stop_in_step = crosses(g0, g1);
            }

            double tau_switch = std::numeric_limits<double>::infinity();
            double tau_stop = std::numeric_limits<double>::infinity();
            if (switch_in_step) tau_switch = locate([&](double tau) { return kappa(step(y_, tau)); }, h);
            if (stop_in_step) {
                tau_stop = locate([&](double tau) { return stop_value(step(y_, tau), t_ + tau); }, h);
            }

            if (stop_in_step && tau_stop <= tau_switch) {
                if (++crossings == stop_.crossing_index) {
                    advance(tau_stop);
                    return finish();
                }
                if (!switch_in_step && !slaved_switch) {
                    accept(y_new, h);
                    continue;
                }
            }

            if (switch_in_step) {
                advance(tau_switch);
                flip();
                continue;
            }

            accept(y_new, h);
            if (slaved_switch) {
                ++next_switch;
                flip();
            }
            if (lands_on_time_stop) {
                t_ = stop_.target;
                return finish();
            }
        }
    }

private:
    InertialVector step(const InertialVector& y, double h) const {
        return rk4_step(
            [this](const InertialVector& v) { return full_rhs(InertialPoint::from_vector(v, 0.0), vehicle_, k_, engine_); },
            y, h);
    }

    static double kappa(const InertialVector& y) { return y[13] + y.segment<3>(6).norm(); }

    double stop_value(const InertialVector& y, double t) const {
        switch (stop_.variable) {
            case StopVariable::radius: return y.segment<3>(0).norm() - stop_.target;
            case StopVariable::time: return t - stop_.target;
            case StopVariable::delta_v: return y[12] - stop_.target;
            case StopVariable::angle: break;
        }
        return 0.0;
    }

    bool crosses(double g0, double g1) const {
        switch (stop_.direction) {
            case CrossingDirection::increasing: return g0 < 0.0 && g1 >= 0.0;
            case CrossingDirection::decreasing: return g0 > 0.0 && g1 <= 0.0;
            case CrossingDirection::any: return (g0 < 0.0 && g1 >= 0.0) || (g0 > 0.0 && g1 <= 0.0);
        }
        return false;
    }

    double locate(const std::function<double(double)>& f, double h) const {
        if (f(0.0) == 0.0) return 0.0;
        try {
            return locate_event(f, 0.0, h, opts_.event_tol, opts_.max_event_iter).t;
        } catch (const EventError& e) {
            throw PropagationError(PropagationError::Reason::event_failure, e.what());
        }
    }

    void check(const InertialVector& y) const {
        if (!y.allFinite()) throw PropagationError(PropagationError::Reason::invalid_state, "non-finite state");
        if (y.segment<3>(0).norm() <= opts_.r_min) {
            throw PropagationError(PropagationError::Reason::impact, "trajectory impacts");
        }
    }

    void flip() {
        if (static_cast<int>(result_.switch_times.size()) >= opts_.max_switches) {
            throw PropagationError(PropagationError::Reason::too_many_switches, "too many engine switches");
        }
        result_.switch_times.push_back(t_);
        engine_ = flipped(engine_);
        result_.samples.back().engine = engine_;
    }

    void advance(double tau) {
        if (tau > 0.0) {
            y_ = step(y_, tau);
            t_ += tau;
        }
        record();
    }

    void accept(const InertialVector& y_new, double h) {
        y_ = y_new;
        t_ += h;
        record();
    }

    void record() { result_.samples.push_back({InertialPoint::from_vector(y_, t_), engine_}); }

    FullPropagation finish() {
        result_.final_sample = result_.samples.back();
        return std::move(result_);
    }

    Vehicle vehicle_;
    PhysicalConstants k_;
    StopCondition stop_;
    FullPropagationOptions opts_;
    InertialVector y_;
    double t_ = 0.0;
    Engine engine_ = Engine::off;
    FullPropagation result_;
};

}  // namespace

FullPropagation propagate_full(const InertialPoint& init, const Vehicle& vehicle, const PhysicalConstants& k,
                               const StopCondition& stop, const FullPropagationOptions& opts) {
    FullPropagator p(vehicle, k, stop, opts);
    return p.run(init);
}

InvariantReport monitor_invariants(const FullPropagation& run, const Vehicle& vehicle, const PhysicalConstants& k,
                                   double c_const) {
    InvariantReport rep;
    if (run.samples.empty()) return rep;
    const auto& first = run.samples.front().point;
    rep.z0 = pines_z(first);
    const Vec3 r_hat0 = first.r.normalized();
    const Vec3 h_hat0 = first.r.cross(first.v).normalized();
    rep.z_transverse = rep.z0.dot(h_hat0.cross(r_hat0));
    const double z_ref = std::max(rep.z0.norm(), 1.0);

    for (const auto& s : run.samples) {
        const auto& pt = s.point;
        const Vec3 z = pines_z(pt);
        rep.z_drift = std::max(rep.z_drift, (z - rep.z0).cwiseAbs().maxCoeff() / z_ref);
        const Vec3 h = pt.r.cross(pt.v);
        const double hp_ref = std::max(h.norm() * pt.p.norm(), 1.0);
        rep.hp_minus_rz = std::max(rep.hp_minus_rz, std::abs(h.dot(pt.p) - pt.r.dot(z)) / hp_ref);
        rep.hamiltonian = std::max(rep.hamiltonian, std::abs(hamiltonian_full(pt, vehicle, k, s.engine, c_const)));
    }
    return rep;
}

DivergenceReport compare_reduced_vs_full(const OrbitalState& init_state, const AdjointState& init_adjoint,
                                         const AdjointConstants& consts, const Vehicle& vehicle,
                                         const PhysicalConstants& k, const StopCondition& stop,
                                         const PropagationOptions& opts) {
    PropagationOptions reduced_opts = opts;
    reduced_opts.record_samples = true;
    const Propagation reduced = propagate(init_state, init_adjoint, consts, vehicle, k, stop, reduced_opts);

    const Engine engine0 = reduced.samples.front().engine;
    const InertialPoint init = embed_to_inertial(init_state, init_adjoint, consts, vehicle, k, engine0);

    FullPropagationOptions fopts;
    fopts.step = opts.step;
    fopts.event_tol = opts.event_tol;
    fopts.max_event_iter = opts.max_event_iter;
    fopts.t_max = opts.t_max;
    fopts.r_min = opts.r_min;
    fopts.max_switches = opts.max_switches;

    DivergenceReport rep;
    const auto reduced_switches = reduced.schedule.switch_times();
    rep.reduced_switches = reduced_switches.size();
    rep.dv_reduced = reduced.final_sample.state.dv;

    // Slaved events: identical time grids, pointwise comparison.
    fopts.policy = EventPolicy::slaved;
    fopts.switch_times = reduced_switches;
    fopts.initial_engine = engine0;
    StopCondition time_stop;
    time_stop.variable = StopVariable::time;
    time_stop.target = reduced.final_sample.state.t;
    const FullPropagation slaved = propagate_full(init, vehicle, k, time_stop, fopts);

    std::optional<Vec3> z_first;
    for (const auto& s : reduced.samples) {
        if (s.state.chi != 0.0) continue;
        const auto d = reduced_rhs(s.state, s.adjoint, consts, vehicle, k, s.engine, nullptr, opts.dlam_scale, false);
        const InertialPoint e = embed_to_inertial(s.state, s.adjoint, consts, d.lam, d.mu);
        const Vec3 z = pines_z(e);
        if (!z_first) z_first = z;
        const double z_ref = std::max(z_first->norm(), 1.0);
        rep.reduced_z_drift = std::max(rep.reduced_z_drift, (z - *z_first).cwiseAbs().maxCoeff() / z_ref);
        rep.reduced_hamiltonian =
            std::max(rep.reduced_hamiltonian, std::abs(hamiltonian_full(e, vehicle, k, s.engine, consts.c_const)));
    }

    std::size_t j = 0;
    for (const auto& s : reduced.samples) {
        while (j < slaved.samples.size() && slaved.samples[j].point.t < s.state.t - 1e-9) ++j;
        if (j == slaved.samples.size()) break;
        const auto& f = slaved.samples[j].point;
        if (std::abs(f.t - s.state.t) > 1e-9) continue;
        if (s.state.chi != 0.0) continue;
        const InertialPoint e = embed_to_inertial(s.state, s.adjoint, consts, 0.0, 0.0);
        rep.max_position = std::max(rep.max_position, (e.r - f.r).norm());
        rep.max_velocity = std::max(rep.max_velocity, (e.v - f.v).norm());
        rep.max_primer = std::max(rep.max_primer, std::abs(s.primer.p_hat - f.p.norm()));
        rep.max_kappa = std::max(rep.max_kappa, std::abs(s.primer.kappa - full_kappa(f)));
        ++rep.compared_samples;
    }

    // Independent events: switch times, final state and Δv.
    fopts.policy = EventPolicy::independent;
    fopts.switch_times.clear();
    // The full system carries no transfer angle; angle stops end at the
    // reduced arrival time instead.
    const StopCondition& free_stop = stop.variable == StopVariable::angle ? time_stop : stop;
    const FullPropagation free_run = propagate_full(init, vehicle, k, free_stop, fopts);
    rep.invariants = monitor_invariants(free_run, vehicle, k, consts.c_const);
    rep.full_switches = free_run.switch_times.size();
    rep.dv_full = free_run.final_sample.point.dv;
    const std::size_t common = std::min(reduced_switches.size(), free_run.switch_times.size());
    for (std::size_t i = 0; i < common; ++i) {
        rep.max_switch_time = std::max(rep.max_switch_time, std::abs(reduced_switches[i] - free_run.switch_times[i]));
    }
    if (reduced_switches.size() != free_run.switch_times.size()) {
        rep.max_switch_time = std::numeric_limits<double>::infinity();
    }
    if (reduced.final_sample.state.chi == 0.0) {
        const InertialPoint e = embed_to_inertial(reduced.final_sample.state, reduced.final_sample.adjoint, consts, 0.0, 0.0);
        rep.final_position = (e.r - free_run.final_sample.point.r).norm();
        rep.final_velocity = (e.v - free_run.final_sample.point.v).norm();
    } else {
        rep.final_position = rep.final_velocity = std::numeric_limits<double>::quiet_NaN();
    }
    return rep;
}

std::string to_json(const DivergenceReport& r, int indent) {
    auto num = [](double x) -> nlohmann::json {
        if (std::isfinite(x)) return x;
        return nullptr;
    };
    nlohmann::json j;
    j["max_position_m"] = num(r.max_position);
    j["max_velocity_ms"] = num(r.max_velocity);
    j["max_primer_magnitude"] = num(r.max_primer);
    j["max_kappa"] = num(r.max_kappa);
    j["final_position_m"] = num(r.final_position);
    j["final_velocity_ms"] = num(r.final_velocity);
    j["dv_reduced_ms"] = num(r.dv_reduced);
    j["dv_full_ms"] = num(r.dv_full);
    j["dv_divergence_ms"] = num(std::abs(r.dv_reduced - r.dv_full));
    j["max_switch_time_s"] = num(r.max_switch_time);
    j["reduced_switches"] = r.reduced_switches;
    j["full_switches"] = r.full_switches;
    j["compared_samples"] = r.compared_samples;
    j["reduced_z_drift_rel"] = num(r.reduced_z_drift);
    j["reduced_hamiltonian_scaled"] = num(r.reduced_hamiltonian);
    j["invariants"] = {
        {"z_drift_rel", num(r.invariants.z_drift)},
        {"hp_minus_rz_rel", num(r.invariants.hp_minus_rz)},
        {"hamiltonian_scaled", num(r.invariants.hamiltonian)},
        {"z0_ms", {r.invariants.z0.x(), r.invariants.z0.y(), r.invariants.z0.z()}},
        {"z_transverse_ms", num(r.invariants.z_transverse)},
    };
    return j.dump(indent);
}

}  // namespace primer
