#include "primer/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace primer {

EventLocation locate_event(const std::function<double(double)>& f, double t_lo, double t_hi,
                           double tol_t, int max_iter) {
    double a = t_lo, b = t_hi;
    double fa = f(a), fb = f(b);
    if (fa == 0.0) return {a, fa, 0};
    if (fb == 0.0) return {b, fb, 0};
    if (fa * fb > 0.0) throw EventError("no sign change on event bracket");

    // Illinois weights act on copies so the true values remain available.
    double wa = fa, wb = fb;
    int side = 0;
    int stalled = 0;
    for (int it = 1; it <= max_iter; ++it) {
        const double width = b - a;
        if (std::abs(width) <= tol_t) {
            return std::abs(fa) <= std::abs(fb) ? EventLocation{a, fa, it - 1} : EventLocation{b, fb, it - 1};
        }
        double c = (a * wb - b * wa) / (wb - wa);
        if (stalled >= 2 || !(c > std::min(a, b) && c < std::max(a, b))) {
            c = 0.5 * (a + b);
            stalled = 0;
        }
        const double fc = f(c);
        if (fc == 0.0) return {c, fc, it};
        if (fc * fb > 0.0) {
            b = c;
            fb = wb = fc;
            if (side == -1) wa *= 0.5;
            side = -1;
        } else {
            a = c;
            fa = wa = fc;
            if (side == +1) wb *= 0.5;
            side = +1;
        }
        stalled = std::abs(b - a) > 0.5 * std::abs(width) ? stalled + 1 : 0;
    }
    throw EventError("event location did not converge");
}

void StopCondition::validate() const {
    if (!std::isfinite(target)) throw DomainError("stop target must be finite");
    if (variable == StopVariable::radius && !(target > 0.0)) {
        throw DomainError("radius stop target must be positive");
    }
    if (crossing_index < 1) throw DomainError("crossing index must be >= 1");
}

double StopCondition::value(const OrbitalState& st) const {
    switch (variable) {
        case StopVariable::radius: return st.r;
        case StopVariable::angle: return st.theta;
        case StopVariable::time: return st.t;
        case StopVariable::delta_v: return st.dv;
    }
    return 0.0;
}

std::string to_string(StopVariable v) {
    switch (v) {
        case StopVariable::radius: return "radius";
        case StopVariable::angle: return "angle";
        case StopVariable::time: return "time";
        case StopVariable::delta_v: return "delta_v";
    }
    return "?";
}

double BurnSchedule::total_dv() const {
    double sum = 0.0;
    for (const auto& arc : arcs) sum += arc.dv;
    return sum;
}

std::vector<double> BurnSchedule::burn_dvs() const {
    std::vector<double> out;
    for (const auto& arc : arcs) {
        if (arc.type == ArcType::burn) out.push_back(arc.dv);
    }
    return out;
}

std::vector<double> BurnSchedule::switch_times() const {
    std::vector<double> out;
    for (std::size_t i = 1; i < arcs.size(); ++i) out.push_back(arcs[i].t_start);
    return out;
}

namespace {

bool crosses(CrossingDirection dir, double g0, double g1) {
    switch (dir) {
        case CrossingDirection::increasing: return g0 < 0.0 && g1 >= 0.0;
        case CrossingDirection::decreasing: return g0 > 0.0 && g1 <= 0.0;
        case CrossingDirection::any: return (g0 < 0.0 && g1 >= 0.0) || (g0 > 0.0 && g1 <= 0.0);
    }
    return false;
}

class Propagator {
public:
    Propagator(const AdjointConstants& consts, const Vehicle& vehicle, const PhysicalConstants& k,
               const StopCondition& stop, const PropagationOptions& opts)
        : sys_(consts, vehicle, k, opts.vr_eps, opts.dlam_scale, opts.frame_rotation), stop_(stop), opts_(opts) {}

    Propagation run(const OrbitalState& init_state, const AdjointState& init_adjoint) {
        if (!(opts_.step > 0.0)) throw DomainError("step must be positive");
        stop_.validate();
        if (!(init_state.r > 0.0) || !(init_state.v_theta > 0.0)) {
            throw PropagationError(PropagationError::Reason::invalid_state, "invalid initial state");
        }

        t_ = init_state.t;
        y_ = pack(init_state, init_adjoint);
        // Events are located on kappa / |psi_dv(t0)| so that a positive
        // rescaling of all adjoints yields the same event times.
        kappa_unit_ = init_adjoint.psi_dv != 0.0 ? 1.0 / std::abs(init_adjoint.psi_dv) : 1.0;
        const bool burn0 = !opts_.force_coast && sys_.kappa(y_) >= 0.0;
        sys_.set_engine(burn0 ? Engine::on : Engine::off);
        open_arc();
        record();

        if (stop_.variable == StopVariable::time && stop_.target <= t_) {
            throw PropagationError(PropagationError::Reason::stop_not_met, "stop time precedes the initial time");
        }

        int crossings = 0;
        int switches = 0;
        while (true) {
            if (t_ >= opts_.t_max) {
                throw PropagationError(PropagationError::Reason::stop_not_met,
                                       "stop condition (" + to_string(stop_.variable) +
                                           ") never met within t_max");
            }
            double h = opts_.step;
            bool lands_on_time_stop = false;
            if (stop_.variable == StopVariable::time && stop_.target - t_ <= h * (1.0 + 1e-12)) {
                h = stop_.target - t_;
                lands_on_time_stop = true;
            }

            const ReducedVector y_new = step(y_, h);
            ++result_.steps;
            check_state(y_new);

            const double k_new = sys_.kappa(y_new);
            const bool switch_in_step = !opts_.force_coast && ((k_new >= 0.0) != is_on(sys_.engine()));

            bool stop_in_step = false;
            if (stop_.variable != StopVariable::time) {
                const double g0 = stop_value(y_, t_);
                const double g1 = stop_value(y_new, t_ + h);
                stop_in_step = crosses(stop_.direction, g0, g1);
            }

            double tau_switch = std::numeric_limits<double>::infinity();
            double tau_stop = std::numeric_limits<double>::infinity();
            if (switch_in_step) tau_switch = locate_switch(h);
            if (stop_in_step) tau_stop = locate_stop(h);

            if (stop_in_step && tau_stop <= tau_switch) {
                if (crossings + 1 == stop_.crossing_index) {
                    advance(tau_stop);
                    return finish();
                }
                if (!switch_in_step) {
                    ++crossings;
                    accept(y_new, h);
                    continue;
                }
                ++crossings;
            }

            if (switch_in_step) {
                advance(tau_switch);
                if (++switches > opts_.max_switches) {
                    throw PropagationError(PropagationError::Reason::too_many_switches,
                                           "more than " + std::to_string(opts_.max_switches) +
                                               " engine switches");
                }
                close_arc();
                sys_.set_engine(flipped(sys_.engine()));
                open_arc();
                if (opts_.record_samples) result_.samples.back().engine = sys_.engine();
                continue;
            }

            accept(y_new, h);
            if (lands_on_time_stop) {
                t_ = stop_.target;
                return finish();
            }
        }
    }

private:
    ReducedVector step(const ReducedVector& y, double h) {
        return rk4_step([this](const ReducedVector& v) { return sys_(v); }, y, h);
    }

    double stop_value(const ReducedVector& y, double t) const {
        return stop_.value(unpack_state(y, t)) - stop_.target;
    }

    void check_state(const ReducedVector& y) const {
        if (!y.allFinite()) {
            throw PropagationError(PropagationError::Reason::invalid_state, "non-finite state");
        }
        if (y[idx::r] <= opts_.r_min) {
            throw PropagationError(PropagationError::Reason::impact, "trajectory impacts");
        }
        if (!(y[idx::v_theta] > 0.0)) {
            throw PropagationError(PropagationError::Reason::invalid_state,
                                   "transversal velocity is no longer positive");
        }
    }

    double locate_switch(double h) {
        const bool on = is_on(sys_.engine());
        auto f = [&](double tau) { return kappa_unit_ * sys_.kappa(step(y_, tau)); };
        // A bracket without sign change means kappa already sits on the far
        // side at the start of the step: the switch happens immediately.
        const double f0 = sys_.kappa(y_);
        if ((f0 >= 0.0) != on) return 0.0;
        try {
            return locate_event(f, 0.0, h, opts_.event_tol, opts_.max_event_iter).t;
        } catch (const EventError& e) {
            throw PropagationError(PropagationError::Reason::event_failure, e.what());
        }
    }

    double locate_stop(double h) {
        auto f = [&](double tau) { return stop_value(step(y_, tau), t_ + tau); };
        try {
            return locate_event(f, 0.0, h, opts_.event_tol, opts_.max_event_iter).t;
        } catch (const EventError& e) {
            throw PropagationError(PropagationError::Reason::event_failure, e.what());
        }
    }

    void advance(double tau) {
        if (tau > 0.0) {
            y_ = step(y_, tau);
            t_ += tau;
        }
        record();
    }

    void accept(const ReducedVector& y_new, double h) {
        y_ = y_new;
        t_ += h;
        record();
    }

    TrajectorySample sample() const {
        TrajectorySample s;
        s.state = unpack_state(y_, t_);
        s.adjoint = unpack_adjoint(y_);
        s.primer = sys_.primer(y_);
        s.engine = sys_.engine();
        return s;
    }

    void record() {
        if (opts_.record_samples) result_.samples.push_back(sample());
    }

    void open_arc() {
        BurnArc arc;
        arc.t_start = t_;
        arc.type = is_on(sys_.engine()) ? ArcType::burn : ArcType::coast;
        arc_dv_start_ = y_[idx::dv];
        result_.schedule.arcs.push_back(arc);
    }

    void close_arc() {
        auto& arc = result_.schedule.arcs.back();
        arc.t_end = t_;
        arc.dv = arc.type == ArcType::burn ? y_[idx::dv] - arc_dv_start_ : 0.0;
    }

    Propagation finish() {
        close_arc();
        result_.final_sample = sample();
        result_.guard_activations = sys_.guard().activations;
        return std::move(result_);
    }

    ReducedSystem sys_;
    double kappa_unit_ = 1.0;
    StopCondition stop_;
    PropagationOptions opts_;
    ReducedVector y_;
    double t_ = 0.0;
    double arc_dv_start_ = 0.0;
    Propagation result_;
};

}  // namespace

Propagation propagate(const OrbitalState& init_state, const AdjointState& init_adjoint,
                      const AdjointConstants& consts, const Vehicle& vehicle,
                      const PhysicalConstants& k, const StopCondition& stop,
                      const PropagationOptions& opts) {
    Propagator p(consts, vehicle, k, stop, opts);
    return p.run(init_state, init_adjoint);
}

void write_trajectory_csv(std::ostream& os, const std::vector<TrajectorySample>& samples) {
    os << "t,r,vr,vtheta,theta,chi,dv,lambda,mu,nu,psi_dv,p,kappa,engine\n";
    std::ostringstream line;
    line << std::setprecision(15);
    for (const auto& s : samples) {
        line.str("");
        line << s.state.t << ',' << s.state.r << ',' << s.state.v_r << ',' << s.state.v_theta << ','
             << s.state.theta << ',' << s.state.chi << ',' << s.state.dv << ',' << s.adjoint.lam << ','
             << s.adjoint.mu << ',' << s.primer.nu << ',' << s.adjoint.psi_dv << ',' << s.primer.p_hat
             << ',' << s.primer.kappa << ',' << (is_on(s.engine) ? 1 : 0) << '\n';
        os << line.str();
    }
}

}  // namespace primer
