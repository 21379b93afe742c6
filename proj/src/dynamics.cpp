#include "primer/dynamics.hpp"

#include <cmath>

namespace primer {

ReducedVector pack(const OrbitalState& st, const AdjointState& adj) {
    ReducedVector y;
    y << st.r, st.v_r, st.v_theta, st.theta, st.chi, st.dv, adj.lam, adj.mu, adj.psi_dv;
    return y;
}

OrbitalState unpack_state(const ReducedVector& y, double t) {
    return {t, y[idx::r], y[idx::v_r], y[idx::v_theta], y[idx::theta], y[idx::chi], y[idx::dv]};
}

AdjointState unpack_adjoint(const ReducedVector& y) {
    return {y[idx::lam], y[idx::mu], y[idx::psi_dv]};
}

ReducedVector ReducedDerivative::as_vector() const {
    ReducedVector d;
    d << r, v_r, v_theta, theta, chi, dv, lam, mu, psi_dv;
    return d;
}

double thrust_accel(double dv, const Vehicle& vehicle, const PhysicalConstants& k, Engine engine) {
    if (!is_on(engine)) return 0.0;
    return vehicle.p_max / vehicle.m0 * std::exp(dv / vehicle.exhaust_velocity(k));
}

PrimerInfo primer_and_kappa(const AdjointState& adj, double e_const, double v_theta) {
    if (!(v_theta > 0.0)) throw DomainError("transversal velocity must be positive");
    PrimerInfo info;
    info.nu = e_const / v_theta;
    info.p_hat = std::sqrt(adj.lam * adj.lam + adj.mu * adj.mu + info.nu * info.nu);
    info.kappa = adj.psi_dv + info.p_hat;
    return info;
}

ControlDirection control_direction(double lam, double mu, double nu, double p_hat) {
    if (!(p_hat > 0.0)) throw DomainError("thrust direction undefined for a zero primer");
    return {lam / p_hat, mu / p_hat, nu / p_hat};
}

ReducedDerivative reduced_rhs(const OrbitalState& st, const AdjointState& adj,
                              const AdjointConstants& consts, const Vehicle& vehicle,
                              const PhysicalConstants& k, Engine engine, VrGuard* guard,
                              double dlam_scale, bool frame_rotation) {
    if (!(st.r > 0.0)) throw DomainError("radius must be positive");
    const auto primer = primer_and_kappa(adj, consts.e_const, st.v_theta);

    const double r = st.r;
    const double vr = st.v_r;
    const double vt = st.v_theta;
    const double omega = vt / r;
    const double a = thrust_accel(st.dv, vehicle, k, engine);

    ControlDirection dir;
    if (is_on(engine)) dir = control_direction(adj.lam, adj.mu, primer.nu, primer.p_hat);

    const double centrifugal = vt * vt - k.gamma / r;

    ReducedDerivative d;
    d.r = vr;
    d.v_r = centrifugal / r + a * dir.s0;
    d.v_theta = -vr * vt / r + a * dir.t0;
    d.chi = a * dir.w0 / vt;
    d.theta = omega;
    d.dv = a;

    const double numer = centrifugal * adj.lam / r + omega * consts.a_const + consts.c_const + a * primer.kappa;
    VrGuard local;
    VrGuard& g = guard ? *guard : local;
    if (std::abs(vr) >= g.eps) {
        d.lam = numer / vr * dlam_scale;
        g.held_dlam = d.lam;
    } else {
        ++g.activations;
        d.lam = numer == 0.0 ? 0.0 : g.held_dlam;
    }
    d.mu = (vr * adj.mu - 2.0 * vt * adj.lam - consts.a_const) / r;
    if (frame_rotation) d.mu += a * dir.w0 / vt * primer.nu;
    d.psi_dv = -a * primer.kappa / vehicle.exhaust_velocity(k);
    return d;
}

double hamiltonian_residual_reduced(const OrbitalState& st, const AdjointState& adj,
                                    const AdjointConstants& consts, const Vehicle& vehicle,
                                    const PhysicalConstants& k, Engine engine, double dlam_dt,
                                    double dmu_dt) {
    const auto primer = primer_and_kappa(adj, consts.e_const, st.v_theta);
    const double r = st.r;
    const double omega = st.v_theta / r;
    const double grav = k.gamma / (r * r);
    const double a = thrust_accel(st.dv, vehicle, k, engine);
    const double h = -grav * adj.lam - st.v_r * (dlam_dt - omega * adj.mu) -
                     st.v_theta * (dmu_dt + omega * adj.lam) + a * primer.kappa + consts.c_const;
    return h / grav;
}

}  // namespace primer
