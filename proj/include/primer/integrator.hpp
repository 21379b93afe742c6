// Fixed-step RK4 propagation of the reduced system with switching-function
// and stop-condition event location.
#pragma once

#include <functional>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "primer/dynamics.hpp"
#include "primer/model.hpp"

namespace primer {

/// Classical fourth-order Runge-Kutta step for an autonomous system.
template <typename Rhs, typename Vector>
Vector rk4_step(Rhs&& rhs, const Vector& y, double h) {
    const Vector k1 = rhs(y);
    const Vector k2 = rhs(Vector(y + 0.5 * h * k1));
    const Vector k3 = rhs(Vector(y + 0.5 * h * k2));
    const Vector k4 = rhs(Vector(y + h * k3));
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

class EventError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EventLocation {
    double t = 0.0;
    double value = 0.0;  // f(t)
    int iterations = 0;
};

/// Finds a zero of `f` on [t_lo, t_hi] by Illinois regula falsi with a
/// bisection fallback. Terminates once the bracket is no wider than `tol_t`
/// or f vanishes exactly; the endpoint with the smaller |f| is returned.
/// Throws EventError when f(t_lo) f(t_hi) > 0 or after `max_iter` iterations.
EventLocation locate_event(const std::function<double(double)>& f, double t_lo, double t_hi,
                           double tol_t = 1e-6, int max_iter = 200);

enum class StopVariable { radius, angle, time, delta_v };
enum class CrossingDirection { increasing, decreasing, any };

struct StopCondition {
    StopVariable variable = StopVariable::time;
    double target = 0.0;
    CrossingDirection direction = CrossingDirection::increasing;
    int crossing_index = 1;

    void validate() const;
    double value(const OrbitalState& st) const;
};

std::string to_string(StopVariable v);

struct PropagationOptions {
    double step = 1.0;              // s
    double event_tol = 1e-6;        // s
    double t_max = 15500.0;         // s
    double r_min = 0.9 * 6378e3;    // m
    int max_switches = 10;
    double vr_eps = 1e-3;           // m/s
    int max_event_iter = 200;
    bool record_samples = true;
    double dlam_scale = 1.0;        // fault injection only
    /// Rotating-plane term in dμ/dt for out-of-plane thrust.
    bool frame_rotation = true;
    /// Keep the engine off for the whole run (coast comparisons).
    bool force_coast = false;
};

struct TrajectorySample {
    OrbitalState state;
    AdjointState adjoint;
    PrimerInfo primer;
    Engine engine = Engine::off;
};

enum class ArcType { burn, coast };

struct BurnArc {
    double t_start = 0.0;
    double t_end = 0.0;
    ArcType type = ArcType::coast;
    double dv = 0.0;
};

struct BurnSchedule {
    std::vector<BurnArc> arcs;

    double total_dv() const;
    std::vector<double> burn_dvs() const;
    std::vector<double> switch_times() const;  // interior arc boundaries
};

class PropagationError : public std::runtime_error {
public:
    enum class Reason { stop_not_met, impact, too_many_switches, invalid_state, event_failure };

    PropagationError(Reason reason, const std::string& what) : std::runtime_error(what), reason_(reason) {}
    Reason reason() const { return reason_; }

private:
    Reason reason_;
};

struct Propagation {
    std::vector<TrajectorySample> samples;  // empty unless record_samples
    BurnSchedule schedule;
    TrajectorySample final_sample;
    std::size_t guard_activations = 0;
    std::size_t steps = 0;
};

/// Integrates the reduced system from the given initial point until the stop
/// condition is met. The engine starts on iff kappa(t0) >= 0 and flips only at
/// located zeros of kappa; each RK4 step that contains an event is truncated
/// at the event and the integration restarts from there.
Propagation propagate(const OrbitalState& init_state, const AdjointState& init_adjoint,
                      const AdjointConstants& consts, const Vehicle& vehicle,
                      const PhysicalConstants& k, const StopCondition& stop,
                      const PropagationOptions& opts = {});

/// Writes `t,r,vr,vtheta,theta,chi,dv,lambda,mu,nu,psi_dv,p,kappa,engine`.
void write_trajectory_csv(std::ostream& os, const std::vector<TrajectorySample>& samples);

}  // namespace primer
