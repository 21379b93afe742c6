// Boundary-value problem variants and their damped-Newton shooting solver.
//
// Kind     fixed            free (besides lambda0, mu0)   integration stop
// I        A = C = 0        E (noncoplanar)                r = r_f
// II       C = 0            E (noncoplanar), A             theta = dtheta
// III      A = 0            E (noncoplanar), C             t = dt
// III_T    A = 0            E (noncoplanar), C             dv = dv_target
//
// Coplanar problems fix E = 0 and drop the plane-change residual.
#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "primer/integrator.hpp"
#include "primer/model.hpp"

namespace primer {

enum class ProblemKind { I, II, III, III_T };

std::string to_string(ProblemKind kind);
ProblemKind parse_problem_kind(const std::string& text);

/// Terminal conditions. Only the fields relevant to the kind are read.
struct BoundaryValues {
    double v_fr = 0.0;        // m/s
    double v_ftheta = 0.0;    // m/s
    double r_f = 0.0;         // m
    double chi_f = 0.0;       // rad, noncoplanar only
    double dtheta = 0.0;      // rad, kind II
    double dt = 0.0;          // s, kind III
    double dv_target = 0.0;   // m/s, kind III_T
};

struct ProblemSpec {
    ProblemKind kind = ProblemKind::I;
    bool coplanar = true;
    BoundaryValues boundary;

    StopCondition stop() const;
    std::size_t unknown_count() const;
    std::size_t residual_count() const;
    void validate() const;  // throws DomainError

    bool has_a() const { return kind == ProblemKind::II; }
    bool has_c() const { return kind == ProblemKind::III || kind == ProblemKind::III_T; }
};

/// Vehicle, gravity and departure point shared by every propagation.
struct TransferSetup {
    PhysicalConstants constants;
    Vehicle vehicle;
    PlanarVelocityState initial;
    PropagationOptions propagation;
};

struct GuessVector {
    double lambda0 = 0.0;
    double mu0 = 1.0;
    double e_guess = 0.0;  // m/s
    double a_guess = 0.0;  // m/s
    double c_guess = 0.0;  // m/s^2

    /// Free parameters in the order (lambda0, mu0, [E], [A or C]).
    Eigen::VectorXd unknowns(const ProblemSpec& spec) const;
    /// Natural magnitude of each free parameter (used for scaling).
    static Eigen::VectorXd unknown_scales(const ProblemSpec& spec);
    static GuessVector from_unknowns(const ProblemSpec& spec, const Eigen::VectorXd& x);

    /// Adjoint constants with the fixed ones forced to zero for the kind.
    AdjointConstants constants(const ProblemSpec& spec) const;
};

struct ResidualScales {
    double velocity = 1000.0;  // m/s
    double length = 1000e3;    // m
    double angle = 0.1;        // rad
};

struct ResidualEvaluation {
    bool feasible = false;
    std::string failure;  // reason when infeasible
    Eigen::VectorXd residuals;
    std::optional<Propagation> propagation;
};

/// Propagates from the departure point with the guessed adjoints and returns
/// the scaled terminal mismatch. A failed propagation yields feasible = false.
ResidualEvaluation residual_vector(const GuessVector& g, const ProblemSpec& spec,
                                   const TransferSetup& setup, const ResidualScales& scales = {});

struct SolverOptions {
    double newton_tol = 1e-8;
    double step_tol = 1e-12;
    int max_iter = 50;
    double fd_eps = 1e-6;
    int max_halvings = 8;
    double singular_pivot_ratio = 1e-13;
    /// A step below step_tol counts as convergence only when the residual
    /// norm is also below this bound (propagation noise floor).
    double stall_tol = 1e-6;
    /// When plain Newton fails: restore an arrival burn, then trace the
    /// residual homotopy F(x) = (1 - s) F(x_start).
    bool globalize = true;
    double homotopy_initial_step = 0.05;
    double homotopy_min_step = 1e-4;
    int homotopy_max_steps = 400;
    int multistart_n = 1;
    double multistart_spread = 0.05;  // relative perturbation of seed components
    unsigned multistart_seed = 1;
    ResidualScales scales;
};

enum class SolveStatus { converged, max_iter, singular_jacobian, infeasible_guess, line_search_failed, stalled };

std::string to_string(SolveStatus status);

struct Solution {
    GuessVector parameters;
    bool converged = false;
    SolveStatus status = SolveStatus::max_iter;
    std::string message;
    double residual_norm = 0.0;
    Eigen::VectorXd residuals;
    int iterations = 0;
    BurnSchedule schedule;
    double dv1 = 0.0;       // first burn
    double dv2 = 0.0;       // all later burns
    double dv_total = 0.0;
    double theta_f = 0.0;   // rad
    double t_f = 0.0;       // s
    double chi_f = 0.0;     // rad
    double r_f = 0.0;       // m
    std::vector<TrajectorySample> samples;
};

Solution solve(const ProblemSpec& spec, const GuessVector& guess, const TransferSetup& setup,
               const SolverOptions& opts = {});

/// Re-propagates at given parameters and fills the Solution summary fields.
Solution summarize(const ProblemSpec& spec, const GuessVector& params, const TransferSetup& setup,
                   const ResidualScales& scales = {}, bool keep_samples = false);

struct SweepRow {
    double chi = 0.0;  // rad
    Solution solution;
};

struct SweepOptions {
    SolverOptions solver;
    /// Intermediate plane-change targets inserted when a row fails from the
    /// previous seed (0 disables continuation refinement).
    int max_refinements = 3;
    /// Independent seed for a plane-change angle, tried when continuation
    /// from the previous row fails (e.g. tabulated impulsive solutions).
    std::function<std::optional<GuessVector>(double chi)> fallback_seed;
};

using SpecCustomizer = std::function<void(ProblemSpec&, double chi)>;

/// Continuation over plane-change angles. chi = 0 entries are solved as
/// coplanar problems; every converged row seeds the next. A row that cannot be
/// reached by continuation is retried from `fallback_seed` when one is given.
std::vector<SweepRow> sweep(const ProblemSpec& spec_template, std::span<const double> chi_list,
                            const GuessVector& seed, const TransferSetup& setup,
                            const SweepOptions& opts = {}, const SpecCustomizer& customize = {});

}  // namespace primer
