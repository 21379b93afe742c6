// Reduced state/adjoint equations in the orbital rotating frame.
//
// The primer vector is carried by its radial and transversal components
// (lam, mu); the normal component is algebraic, nu = E / v_theta. Together
// with the Δv costate psi_dv this gives a nine-dimensional system:
//
//   r, v_r, v_theta, theta, chi, dv, lam, mu, psi_dv
//
// Out-of-plane thrust turns the orbital plane about the radius vector at the
// rate omega_r = a w0 / v_theta. The frame-rotation model accounts for this
// in the transversal primer component (dmu/dt gains omega_r nu), which keeps
// the primer continuous across engine switches. Without it the normal
// component nu = E / v_theta jumps relative to (lam, mu) whenever the engine
// switches, and noncoplanar shooting becomes ill-conditioned. Coplanar runs
// (E = 0) are identical under both models.
#pragma once

#include <cstddef>

#include <Eigen/Core>

#include "primer/model.hpp"

namespace primer {

enum class Engine : bool { off = false, on = true };

inline constexpr bool is_on(Engine e) { return e == Engine::on; }
inline constexpr Engine flipped(Engine e) { return is_on(e) ? Engine::off : Engine::on; }

using ReducedVector = Eigen::Matrix<double, 9, 1>;

namespace idx {
inline constexpr Eigen::Index r = 0;
inline constexpr Eigen::Index v_r = 1;
inline constexpr Eigen::Index v_theta = 2;
inline constexpr Eigen::Index theta = 3;
inline constexpr Eigen::Index chi = 4;
inline constexpr Eigen::Index dv = 5;
inline constexpr Eigen::Index lam = 6;
inline constexpr Eigen::Index mu = 7;
inline constexpr Eigen::Index psi_dv = 8;
}  // namespace idx

ReducedVector pack(const OrbitalState& st, const AdjointState& adj);
OrbitalState unpack_state(const ReducedVector& y, double t);
AdjointState unpack_adjoint(const ReducedVector& y);

struct PrimerInfo {
    double nu = 0.0;
    double p_hat = 0.0;
    double kappa = 0.0;
};

struct ControlDirection {
    double s0 = 0.0;
    double t0 = 0.0;
    double w0 = 0.0;
};

struct ReducedDerivative {
    double r = 0.0, v_r = 0.0, v_theta = 0.0, theta = 0.0, chi = 0.0, dv = 0.0;
    double lam = 0.0, mu = 0.0, psi_dv = 0.0;

    ReducedVector as_vector() const;
};

/// Zero-order hold for dλ/dt near v_r = 0, where the closed-form expression
/// divides by v_r. Holds the last value computed with |v_r| >= eps.
struct VrGuard {
    double eps = 1e-3;  // m/s
    double held_dlam = 0.0;
    std::size_t activations = 0;
};

/// (P/m0) exp(dv / (g0 isp)), P = p_max when the engine is on, 0 otherwise.
double thrust_accel(double dv, const Vehicle& vehicle, const PhysicalConstants& k, Engine engine);

/// nu = E / v_theta, p_hat = |(lam, mu, nu)|, kappa = psi_dv + p_hat.
PrimerInfo primer_and_kappa(const AdjointState& adj, double e_const, double v_theta);

/// Unit thrust direction (lam, mu, nu) / p_hat. Throws DomainError for p_hat <= 0.
ControlDirection control_direction(double lam, double mu, double nu, double p_hat);

/// Right-hand side of the reduced system for a fixed engine flag.
///
/// `guard` may be null, in which case a local guard with the default
/// threshold is used (no hold history). `dlam_scale` multiplies dλ/dt and
/// exists only for fault-injection checks of the oracle. `frame_rotation`
/// selects the rotating-plane term in dμ/dt (see the header comment).
ReducedDerivative reduced_rhs(const OrbitalState& st, const AdjointState& adj,
                              const AdjointConstants& consts, const Vehicle& vehicle,
                              const PhysicalConstants& k, Engine engine, VrGuard* guard = nullptr,
                              double dlam_scale = 1.0, bool frame_rotation = true);

/// Hamiltonian identity written with the reduced variables, divided by γ/r².
/// Zero by construction when the derivatives come from reduced_rhs.
double hamiltonian_residual_reduced(const OrbitalState& st, const AdjointState& adj,
                                    const AdjointConstants& consts, const Vehicle& vehicle,
                                    const PhysicalConstants& k, Engine engine, double dlam_dt,
                                    double dmu_dt);

/// Bundles everything the reduced right-hand side needs so it can be handed to
/// a generic stepper as `ReducedVector(const ReducedVector&)`.
class ReducedSystem {
public:
    ReducedSystem(AdjointConstants consts, Vehicle vehicle, PhysicalConstants k, double vr_eps = 1e-3,
                  double dlam_scale = 1.0, bool frame_rotation = true)
        : consts_(consts), vehicle_(vehicle), k_(k), dlam_scale_(dlam_scale),
          frame_rotation_(frame_rotation) {
        guard_.eps = vr_eps;
    }

    void set_engine(Engine e) { engine_ = e; }
    Engine engine() const { return engine_; }

    ReducedVector operator()(const ReducedVector& y) {
        return reduced_rhs(unpack_state(y, 0.0), unpack_adjoint(y), consts_, vehicle_, k_, engine_,
                           &guard_, dlam_scale_, frame_rotation_)
            .as_vector();
    }

    PrimerInfo primer(const ReducedVector& y) const {
        return primer_and_kappa(unpack_adjoint(y), consts_.e_const, y[idx::v_theta]);
    }
    double kappa(const ReducedVector& y) const { return primer(y).kappa; }

    const AdjointConstants& constants() const { return consts_; }
    const Vehicle& vehicle() const { return vehicle_; }
    const PhysicalConstants& physical() const { return k_; }
    const VrGuard& guard() const { return guard_; }
    double dlam_scale() const { return dlam_scale_; }
    bool frame_rotation() const { return frame_rotation_; }

private:
    AdjointConstants consts_;
    Vehicle vehicle_;
    PhysicalConstants k_;
    double dlam_scale_;
    bool frame_rotation_;
    VrGuard guard_;
    Engine engine_ = Engine::off;
};

}  // namespace primer
