#include "primer/shooting.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/LU>

namespace primer {

std::string to_string(ProblemKind kind) {
    switch (kind) {
        case ProblemKind::I: return "I";
        case ProblemKind::II: return "II";
        case ProblemKind::III: return "III";
        case ProblemKind::III_T: return "III-T";
    }
    return "?";
}

ProblemKind parse_problem_kind(const std::string& text) {
    if (text == "I" || text == "1") return ProblemKind::I;
    if (text == "II" || text == "2") return ProblemKind::II;
    if (text == "III" || text == "3") return ProblemKind::III;
    if (text == "III-T" || text == "III_T" || text == "3T") return ProblemKind::III_T;
    throw DomainError("unknown problem kind '" + text + "' (expected I, II, III or III-T)");
}

std::string to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::converged: return "converged";
        case SolveStatus::max_iter: return "max_iter";
        case SolveStatus::singular_jacobian: return "singular_jacobian";
        case SolveStatus::infeasible_guess: return "infeasible_guess";
        case SolveStatus::line_search_failed: return "line_search_failed";
        case SolveStatus::stalled: return "stalled";
    }
    return "?";
}

StopCondition ProblemSpec::stop() const {
    StopCondition s;
    s.direction = CrossingDirection::increasing;
    switch (kind) {
        case ProblemKind::I:
            s.variable = StopVariable::radius;
            s.target = boundary.r_f;
            break;
        case ProblemKind::II:
            s.variable = StopVariable::angle;
            s.target = boundary.dtheta;
            break;
        case ProblemKind::III:
            s.variable = StopVariable::time;
            s.target = boundary.dt;
            break;
        case ProblemKind::III_T:
            s.variable = StopVariable::delta_v;
            s.target = boundary.dv_target;
            break;
    }
    return s;
}

std::size_t ProblemSpec::unknown_count() const {
    std::size_t n = 2;
    if (!coplanar) ++n;
    if (kind != ProblemKind::I) ++n;
    return n;
}

std::size_t ProblemSpec::residual_count() const {
    std::size_t n = 2;
    if (!coplanar) ++n;
    if (kind != ProblemKind::I) ++n;  // radius becomes a residual
    return n;
}

void ProblemSpec::validate() const {
    if (!(boundary.v_ftheta > 0.0)) throw DomainError("final transversal velocity must be positive");
    if (!(boundary.r_f > 0.0)) throw DomainError("final radius must be positive");
    switch (kind) {
        case ProblemKind::I: break;
        case ProblemKind::II:
            if (!(boundary.dtheta > 0.0)) throw DomainError("kind II needs a positive transfer angle");
            break;
        case ProblemKind::III:
            if (!(boundary.dt > 0.0)) throw DomainError("kind III needs a positive flight time");
            break;
        case ProblemKind::III_T:
            if (!(boundary.dv_target > 0.0)) throw DomainError("kind III-T needs a positive delta-v budget");
            break;
    }
    if (unknown_count() != residual_count()) throw DomainError("unknown and residual counts differ");
}

Eigen::VectorXd GuessVector::unknowns(const ProblemSpec& spec) const {
    Eigen::VectorXd x(spec.unknown_count());
    Eigen::Index i = 0;
    x[i++] = lambda0;
    x[i++] = mu0;
    if (!spec.coplanar) x[i++] = e_guess;
    if (spec.has_a()) x[i++] = a_guess;
    if (spec.has_c()) x[i++] = c_guess;
    return x;
}

Eigen::VectorXd GuessVector::unknown_scales(const ProblemSpec& spec) {
    Eigen::VectorXd s(spec.unknown_count());
    Eigen::Index i = 0;
    s[i++] = 1.0;
    s[i++] = 1.0;
    if (!spec.coplanar) s[i++] = 1000.0;
    if (spec.has_a()) s[i++] = 100.0;
    if (spec.has_c()) s[i++] = 0.1;
    return s;
}

GuessVector GuessVector::from_unknowns(const ProblemSpec& spec, const Eigen::VectorXd& x) {
    GuessVector g;
    Eigen::Index i = 0;
    g.lambda0 = x[i++];
    g.mu0 = x[i++];
    if (!spec.coplanar) g.e_guess = x[i++];
    if (spec.has_a()) g.a_guess = x[i++];
    if (spec.has_c()) g.c_guess = x[i++];
    return g;
}

AdjointConstants GuessVector::constants(const ProblemSpec& spec) const {
    AdjointConstants c;
    c.e_const = spec.coplanar ? 0.0 : e_guess;
    c.a_const = spec.has_a() ? a_guess : 0.0;
    c.c_const = spec.has_c() ? c_guess : 0.0;
    return c;
}

namespace {

OrbitalState departure(const TransferSetup& setup) {
    OrbitalState st;
    st.r = setup.initial.r;
    st.v_r = setup.initial.v_r;
    st.v_theta = setup.initial.v_theta;
    return st;
}

Eigen::VectorXd terminal_mismatch(const OrbitalState& fin, const ProblemSpec& spec,
                                  const ResidualScales& scales) {
    Eigen::VectorXd res(spec.residual_count());
    Eigen::Index i = 0;
    res[i++] = (fin.v_r - spec.boundary.v_fr) / scales.velocity;
    res[i++] = (fin.v_theta - spec.boundary.v_ftheta) / scales.velocity;
    if (!spec.coplanar) res[i++] = (fin.chi - spec.boundary.chi_f) / scales.angle;
    if (spec.kind != ProblemKind::I) res[i++] = (fin.r - spec.boundary.r_f) / scales.length;
    return res;
}

}  // namespace

ResidualEvaluation residual_vector(const GuessVector& g, const ProblemSpec& spec,
                                   const TransferSetup& setup, const ResidualScales& scales) {
    ResidualEvaluation out;
    PropagationOptions popts = setup.propagation;
    popts.record_samples = false;
    AdjointState adj{g.lambda0, g.mu0, -1.0};
    try {
        auto prop = propagate(departure(setup), adj, g.constants(spec), setup.vehicle, setup.constants,
                              spec.stop(), popts);
        out.residuals = terminal_mismatch(prop.final_sample.state, spec, scales);
        out.feasible = out.residuals.allFinite();
        if (!out.feasible) out.failure = "non-finite residual";
        out.propagation = std::move(prop);
    } catch (const PropagationError& e) {
        out.failure = e.what();
    } catch (const DomainError& e) {
        out.failure = e.what();
    }
    return out;
}

Solution summarize(const ProblemSpec& spec, const GuessVector& params, const TransferSetup& setup,
                   const ResidualScales& scales, bool keep_samples) {
    Solution sol;
    sol.parameters = params;
    PropagationOptions popts = setup.propagation;
    popts.record_samples = keep_samples;
    AdjointState adj{params.lambda0, params.mu0, -1.0};
    auto prop = propagate(departure(setup), adj, params.constants(spec), setup.vehicle, setup.constants,
                          spec.stop(), popts);
    const auto& fin = prop.final_sample.state;
    sol.residuals = terminal_mismatch(fin, spec, scales);
    sol.residual_norm = sol.residuals.norm();
    sol.schedule = prop.schedule;
    const auto burns = prop.schedule.burn_dvs();
    if (!burns.empty()) sol.dv1 = burns.front();
    for (std::size_t i = 1; i < burns.size(); ++i) sol.dv2 += burns[i];
    sol.dv_total = fin.dv;
    sol.theta_f = fin.theta;
    sol.t_f = fin.t;
    sol.chi_f = fin.chi;
    sol.r_f = fin.r;
    if (keep_samples) sol.samples = std::move(prop.samples);
    return sol;
}

namespace {

Solution finish(const ProblemSpec& spec, const GuessVector& params, const TransferSetup& setup,
                const SolverOptions& opts, SolveStatus status, int iterations, std::string message) {
    Solution sol;
    try {
        sol = summarize(spec, params, setup, opts.scales);
    } catch (const std::exception& e) {
        sol.parameters = params;
        sol.residual_norm = std::numeric_limits<double>::infinity();
        if (status == SolveStatus::converged) status = SolveStatus::infeasible_guess;
        message += message.empty() ? e.what() : std::string("; ") + e.what();
    }
    sol.status = status;
    sol.converged = status == SolveStatus::converged;
    sol.iterations = iterations;
    sol.message = std::move(message);
    return sol;
}

struct NewtonOutcome {
    Eigen::VectorXd z;
    SolveStatus status = SolveStatus::max_iter;
    int iterations = 0;
    std::string message;
};

/// Solver coordinates. The departure primer (lambda0, mu0) is represented by
/// its in-plane angle phi = atan2(lambda0, mu0) and the departure switching
/// value delta = p0 - 1, where p0 includes the out-of-plane component
/// E / v_theta0. The terminal state is extremely sensitive to delta, which is
/// otherwise buried in the leading digits of mu0 and coupled to E.
/// The remaining unknowns (E, A or C) are carried unchanged.
class SolverCoordinates {
public:
    SolverCoordinates(const ProblemSpec& spec, double v_theta0) : spec_(spec), v_theta0_(v_theta0) {}

    Eigen::VectorXd to_solver(const GuessVector& g) const {
        Eigen::VectorXd z = g.unknowns(spec_);
        const double nu0 = nu(g.e_guess);
        z[0] = std::atan2(g.lambda0, g.mu0);
        z[1] = std::sqrt(g.lambda0 * g.lambda0 + g.mu0 * g.mu0 + nu0 * nu0) - 1.0;
        return z;
    }

    /// Returns nullopt when the switching value cannot be met with the
    /// out-of-plane component alone.
    std::optional<GuessVector> from_solver(const Eigen::VectorXd& z) const {
        GuessVector g = GuessVector::from_unknowns(spec_, z);
        const double nu0 = nu(g.e_guess);
        const double p0 = 1.0 + z[1];
        const double rho2 = p0 * p0 - nu0 * nu0;
        if (!(p0 > 0.0) || !(rho2 >= 0.0)) return std::nullopt;
        const double rho = std::sqrt(rho2);
        g.lambda0 = rho * std::sin(z[0]);
        g.mu0 = rho * std::cos(z[0]);
        return g;
    }

private:
    double nu(double e) const { return spec_.coplanar ? 0.0 : e / v_theta0_; }

    const ProblemSpec& spec_;
    double v_theta0_;
};

/// Propagation-backed residual in solver coordinates, with an optional
/// constant offset subtracted (used by the homotopy).
class ResidualMap {
public:
    ResidualMap(const ProblemSpec& spec, const TransferSetup& setup, const SolverOptions& opts)
        : spec_(spec), setup_(setup), opts_(opts), coords_(spec, setup.initial.v_theta),
          scale_(GuessVector::unknown_scales(spec)), floor_(scale_) {
        floor_[0] = 1e-3;  // rad
        floor_[1] = 1e-5;
    }

    ResidualEvaluation operator()(const Eigen::VectorXd& z) const {
        const auto g = coords_.from_solver(z);
        if (!g) {
            ResidualEvaluation ev;
            ev.failure = "switching value below the out-of-plane primer component";
            return ev;
        }
        auto ev = residual_vector(*g, spec_, setup_, opts_.scales);
        if (ev.feasible && offset_.size() == ev.residuals.size()) ev.residuals -= offset_;
        return ev;
    }

    void set_offset(Eigen::VectorXd offset) { offset_ = std::move(offset); }
    const SolverCoordinates& coordinates() const { return coords_; }
    const Eigen::VectorXd& scale() const { return scale_; }
    double fd_step(const Eigen::VectorXd& z, Eigen::Index j) const {
        return opts_.fd_eps * std::max(std::abs(z[j]), floor_[j]);
    }

private:
    const ProblemSpec& spec_;
    const TransferSetup& setup_;
    const SolverOptions& opts_;
    SolverCoordinates coords_;
    Eigen::VectorXd scale_;
    Eigen::VectorXd floor_;
    Eigen::VectorXd offset_;
};

NewtonOutcome newton(const ResidualMap& map, Eigen::VectorXd z, const SolverOptions& opts, double tol) {
    const Eigen::VectorXd& scale = map.scale();
    const auto n = z.size();
    NewtonOutcome out;

    auto current = map(z);
    if (!current.feasible) {
        out.z = std::move(z);
        out.status = SolveStatus::infeasible_guess;
        out.message = "initial guess is infeasible: " + current.failure;
        return out;
    }
    auto done = [&](SolveStatus status, int iterations, std::string message) {
        out.z = z;
        out.status = status;
        out.iterations = iterations;
        out.message = std::move(message);
        return out;
    };

    for (int iter = 0; iter < opts.max_iter; ++iter) {
        const double norm = current.residuals.norm();
        if (norm < tol) return done(SolveStatus::converged, iter, "");

        // Forward differences in scaled unknowns; fall back to a backward
        // difference when the forward point cannot be propagated.
        Eigen::MatrixXd jac(current.residuals.size(), n);
        for (Eigen::Index j = 0; j < n; ++j) {
            const double hj = map.fd_step(z, j);
            Eigen::VectorXd zp = z;
            zp[j] += hj;
            auto fp = map(zp);
            if (fp.feasible) {
                jac.col(j) = (fp.residuals - current.residuals) / hj * scale[j];
                continue;
            }
            zp[j] = z[j] - hj;
            auto fm = map(zp);
            if (!fm.feasible) {
                return done(SolveStatus::singular_jacobian, iter,
                            "cannot difference parameter " + std::to_string(j) + ": " + fm.failure);
            }
            jac.col(j) = (current.residuals - fm.residuals) / hj * scale[j];
        }

        Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
        const double pmax = lu.maxPivot();
        double pmin = pmax;
        for (Eigen::Index i = 0; i < n; ++i) pmin = std::min(pmin, std::abs(lu.matrixLU()(i, i)));
        if (!(pmax > 0.0) || pmin / pmax < opts.singular_pivot_ratio) {
            return done(SolveStatus::singular_jacobian, iter, "jacobian is numerically singular");
        }
        const Eigen::VectorXd dw = -lu.solve(current.residuals);
        const Eigen::VectorXd dz = dw.cwiseProduct(scale);

        double alpha = 1.0;
        bool accepted = false;
        for (int k = 0; k <= opts.max_halvings; ++k) {
            Eigen::VectorXd z_try = z + alpha * dz;
            auto trial = map(z_try);
            if (trial.feasible && trial.residuals.norm() < norm) {
                z = std::move(z_try);
                current = std::move(trial);
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            return done(SolveStatus::line_search_failed, iter + 1, "no decrease along the Newton direction");
        }
        const double rnorm = current.residuals.norm();
        if (rnorm < tol) return done(SolveStatus::converged, iter + 1, "");
        if ((alpha * dw).norm() < opts.step_tol) {
            const bool ok = rnorm < opts.stall_tol;
            return done(ok ? SolveStatus::converged : SolveStatus::stalled, iter + 1,
                        ok ? "" : "step below tolerance with residual above tolerance");
        }
    }
    return done(SolveStatus::max_iter, opts.max_iter, "iteration limit reached");
}

bool ends_with_burn(const ResidualEvaluation& ev) {
    return ev.propagation && !ev.propagation->schedule.arcs.empty() &&
           ev.propagation->schedule.arcs.back().type == ArcType::burn;
}

/// Rotates the departure primer at fixed magnitude until the switching
/// function reaches zero at the stop, i.e. until an arrival burn appears.
/// The rotation leaves the departure switching state unchanged. Returns
/// nullopt when the start is infeasible or no such rotation is found.
std::optional<Eigen::VectorXd> restore_arrival_burn(const ResidualMap& map, Eigen::VectorXd z,
                                                    const SolverOptions& opts) {
    auto kappa_f = [](const ResidualEvaluation& ev) { return ev.propagation->final_sample.primer.kappa; };
    auto current = map(z);
    if (!current.feasible) return std::nullopt;
    constexpr double max_turn = 0.05;  // rad per iteration

    for (int iter = 0; iter < opts.max_iter; ++iter) {
        if (ends_with_burn(current)) return z;
        const double g = kappa_f(current);
        // Difference towards the coasting side first.
        double h = -map.fd_step(z, 0);
        Eigen::VectorXd zp = z;
        zp[0] += h;
        auto probe = map(zp);
        if (!probe.feasible || ends_with_burn(probe)) {
            h = -h;
            zp[0] = z[0] + h;
            probe = map(zp);
        }
        if (!probe.feasible || ends_with_burn(probe)) return std::nullopt;
        const double slope = (kappa_f(probe) - g) / h;
        if (!(std::abs(slope) > 0.0)) return std::nullopt;
        // Aim slightly past the zero so that the arrival burn is triggered.
        const double dphi = std::clamp((1e-3 * std::abs(g) - g) / slope, -max_turn, max_turn);

        double alpha = 1.0;
        bool accepted = false;
        for (int k = 0; k <= opts.max_halvings; ++k) {
            Eigen::VectorXd z_try = z;
            z_try[0] += alpha * dphi;
            auto trial = map(z_try);
            if (trial.feasible && (ends_with_burn(trial) || std::abs(kappa_f(trial)) < std::abs(g))) {
                z = std::move(z_try);
                current = std::move(trial);
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) return std::nullopt;
    }
    return ends_with_burn(current) ? std::optional<Eigen::VectorXd>(z) : std::nullopt;
}

/// Residual homotopy F(z) = (1 - s) F(z_start), traced from s = 0 to 1 with
/// adaptive steps and secant prediction.
NewtonOutcome trace_homotopy(ResidualMap& map, const Eigen::VectorXd& z_start, const SolverOptions& opts) {
    map.set_offset({});
    const auto start = map(z_start);
    NewtonOutcome out;
    out.z = z_start;
    if (!start.feasible) {
        out.status = SolveStatus::infeasible_guess;
        out.message = "homotopy start is infeasible: " + start.failure;
        return out;
    }
    const Eigen::VectorXd f0 = start.residuals;
    const double inner_tol = std::max(opts.newton_tol, 1e-3 * opts.stall_tol);

    double s = 0.0, ds = opts.homotopy_initial_step;
    Eigen::VectorXd z = z_start, z_prev = z_start;
    double s_prev = 0.0;
    int steps = 0;
    while (s < 1.0) {
        if (++steps > opts.homotopy_max_steps) {
            out.z = z;
            out.status = SolveStatus::max_iter;
            out.message = "homotopy step limit reached";
            return out;
        }
        const double s_next = std::min(1.0, s + ds);
        Eigen::VectorXd predicted = z;
        if (s > s_prev) predicted += (z - z_prev) * ((s_next - s) / (s - s_prev));
        map.set_offset((1.0 - s_next) * f0);
        const double tol = s_next >= 1.0 ? opts.newton_tol : inner_tol;
        auto res = newton(map, predicted, opts, tol);
        if (res.status != SolveStatus::converged && s > s_prev) res = newton(map, z, opts, tol);
        out.iterations += res.iterations;
        if (res.status == SolveStatus::converged) {
            z_prev = z;
            s_prev = s;
            z = res.z;
            s = s_next;
            ds = std::min(2.0 * ds, 0.25);
            continue;
        }
        ds *= 0.5;
        if (ds < opts.homotopy_min_step) {
            map.set_offset({});
            out.z = z;
            out.status = res.status;
            out.message = "homotopy stalled: " + res.message;
            return out;
        }
    }
    map.set_offset({});
    out.z = z;
    out.status = SolveStatus::converged;
    return out;
}

Solution solve_single(const ProblemSpec& spec, const GuessVector& guess, const TransferSetup& setup,
                      const SolverOptions& opts) {
    ResidualMap map(spec, setup, opts);
    const auto& coords = map.coordinates();
    const Eigen::VectorXd z0 = coords.to_solver(guess);
    auto conclude = [&](const NewtonOutcome& r, int iterations, std::string message) {
        const auto g = coords.from_solver(r.z);
        return finish(spec, g ? *g : guess, setup, opts, r.status, iterations, std::move(message));
    };

    auto direct = newton(map, z0, opts, opts.newton_tol);
    if (direct.status == SolveStatus::converged || !opts.globalize) {
        return conclude(direct, direct.iterations, direct.message);
    }

    // Restarts: the guess itself and the guess with a unit departure primer
    // (switching value zero, as for an impulse), each also with its primer
    // turned towards the transversal direction.
    std::vector<Eigen::VectorXd> candidates;
    for (double t : {1.0, 0.5, 0.25, 0.0}) {
        for (bool unit : {false, true}) {
            Eigen::VectorXd candidate = z0;
            candidate[0] *= t;
            if (unit) candidate[1] = 0.0;
            candidates.push_back(std::move(candidate));
        }
    }
    int total = direct.iterations;
    for (const auto& candidate : candidates) {
        auto start = restore_arrival_burn(map, candidate, opts);
        if (!start) continue;
        auto traced = trace_homotopy(map, *start, opts);
        total += traced.iterations;
        if (traced.status == SolveStatus::converged) {
            return conclude(traced, total, "converged by residual homotopy");
        }
    }
    return conclude(direct, total, direct.message + "; globalization did not converge");
}

}  // namespace

Solution solve(const ProblemSpec& spec, const GuessVector& guess, const TransferSetup& setup,
               const SolverOptions& opts) {
    spec.validate();
    Solution best = solve_single(spec, guess, setup, opts);
    if (opts.multistart_n <= 1) return best;

    std::mt19937_64 rng(opts.multistart_seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const Eigen::VectorXd scale = GuessVector::unknown_scales(spec);
    const Eigen::VectorXd x0 = guess.unknowns(spec);
    for (int i = 1; i < opts.multistart_n; ++i) {
        Eigen::VectorXd x = x0;
        for (Eigen::Index j = 0; j < x.size(); ++j) {
            x[j] += opts.multistart_spread * std::max(std::abs(x0[j]), 0.1 * scale[j]) * unit(rng);
        }
        Solution candidate = solve_single(spec, GuessVector::from_unknowns(spec, x), setup, opts);
        const bool better = candidate.converged &&
                            (!best.converged || candidate.dv_total < best.dv_total);
        if (better) best = std::move(candidate);
    }
    return best;
}

std::vector<SweepRow> sweep(const ProblemSpec& spec_template, std::span<const double> chi_list,
                            const GuessVector& seed, const TransferSetup& setup, const SweepOptions& opts,
                            const SpecCustomizer& customize) {
    auto make_spec = [&](double chi) {
        ProblemSpec spec = spec_template;
        spec.coplanar = chi == 0.0;
        spec.boundary.chi_f = chi;
        if (customize) customize(spec, chi);
        return spec;
    };

    std::vector<SweepRow> rows;
    GuessVector current = seed;
    std::optional<double> last_good;
    for (double chi : chi_list) {
        Solution sol = solve(make_spec(chi), current, setup, opts.solver);

        // March towards chi through intermediate plane changes.
        for (int level = 1; !sol.converged && last_good && level <= opts.max_refinements; ++level) {
            const int pieces = 1 << level;
            GuessVector march = current;
            bool ok = true;
            for (int p = 1; p < pieces && ok; ++p) {
                const double mid = *last_good + (chi - *last_good) * p / pieces;
                Solution step = solve(make_spec(mid), march, setup, opts.solver);
                ok = step.converged;
                if (ok) march = step.parameters;
            }
            if (ok) sol = solve(make_spec(chi), march, setup, opts.solver);
        }

        if (!sol.converged && opts.fallback_seed) {
            if (const auto alt = opts.fallback_seed(chi)) {
                Solution retry = solve(make_spec(chi), *alt, setup, opts.solver);
                if (retry.converged) sol = std::move(retry);
            }
        }

        if (sol.converged) {
            current = sol.parameters;
            last_good = chi;
        }
        rows.push_back({chi, std::move(sol)});
    }
    return rows;
}

}  // namespace primer
