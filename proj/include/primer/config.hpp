// JSON run configuration.
//
// Values are stored exactly as written in the file (km, deg, m/s, ...), which
// makes parse -> serialize -> parse lossless. Conversion to SI happens only in
// the make_* helpers.
#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "primer/model.hpp"
#include "primer/shooting.hpp"

namespace primer {

/// Invalid or incomplete configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ConstantsConfig {
    double gamma_m3s2 = PhysicalConstants{}.gamma;
    double g0_ms2 = PhysicalConstants{}.g0;
};

struct VehicleConfig {
    double p_max_n = 0.0;
    double isp_s = 0.0;
    double m0_kg = 0.0;
};

/// Either (r, v_r, v_theta) or conic elements (l, e, f), never both.
struct InitialConfig {
    std::optional<double> r_km, vr_ms, vtheta_ms;
    std::optional<double> l_km, e, f_deg;

    bool has_state() const { return r_km || vr_ms || vtheta_ms; }
    bool has_elements() const { return l_km || e || f_deg; }
};

struct FinalConfig {
    std::optional<double> vfr_ms, vftheta_ms, rf_km;
    std::optional<double> chif_deg, dtheta_deg, dt_s, dv_ms;
};

struct GuessConfig {
    double lambda0 = 0.0;
    double mu0 = 1.0;
    std::optional<double> e_ms, a_ms, c_ms2;
};

struct SolverConfig {
    double step_s = 1.0;
    double event_tol_s = 1e-6;
    double newton_tol = 1e-8;
    int max_iter = 50;
    double fd_eps = 1e-6;
    double vr_eps_ms = 1e-3;
    int multistart_n = 1;
};

struct ProblemConfig {
    ProblemKind kind = ProblemKind::I;
    bool coplanar = true;
};

/// Plane-change list for sweeps, optionally with per-row Δθ or Δt.
struct SweepConfig {
    std::vector<double> chi_deg;
    std::vector<double> dtheta_deg;
    std::vector<double> dt_s;
};

struct OutputConfig {
    std::string trajectory_csv;
    std::string solution_json;
};

struct RunConfig {
    ConstantsConfig constants;
    VehicleConfig vehicle;
    InitialConfig initial;
    FinalConfig final_point;
    ProblemConfig problem;
    std::optional<GuessConfig> guess;
    SolverConfig solver;
    SweepConfig sweep;
    OutputConfig output;

    /// Throws ConfigError naming the first missing or inconsistent field.
    void validate() const;
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const RunConfig& cfg, int indent = 2);

PhysicalConstants make_constants(const RunConfig& cfg);
Vehicle make_vehicle(const RunConfig& cfg);
PlanarVelocityState make_initial_state(const RunConfig& cfg);
/// Problem spec with chi_f, Δθ and Δt taken from the final block.
ProblemSpec make_problem(const RunConfig& cfg);
TransferSetup make_setup(const RunConfig& cfg);
SolverOptions make_solver_options(const RunConfig& cfg);

/// The configured guess, or the generating solution for the nearest
/// inclination from the bundled dataset.
GuessVector make_guess(const RunConfig& cfg, const PaperDataset& dataset);
GuessVector generating_guess(const PaperDataset& dataset, double chi_deg);

}  // namespace primer
