// Text and JSON renderings of solutions, and the pass/fail thresholds applied
// to oracle divergence reports.
#pragma once

#include <string>
#include <vector>

#include "primer/oracle.hpp"
#include "primer/shooting.hpp"

namespace primer {

/// Column header matching format_table_row.
std::string table_header(ProblemKind kind);

/// i_f, Δv1, Δv2, Δv_Σ, λ0, μ0, E, A or C, θ_f, t_f. Speeds with two
/// decimals, adjoints with six significant digits.
std::string format_table_row(const Solution& sol, const ProblemSpec& spec, double chi_deg);

/// CSV header and row for sweep output (adds status and residual norm).
std::string sweep_csv_header();
std::string sweep_csv_row(const Solution& sol, const ProblemSpec& spec, double chi_deg);

std::string solution_to_json(const Solution& sol, const ProblemSpec& spec, int indent = 2);

struct VerifyThresholds {
    double z_drift = 1e-6;
    double hp_minus_rz = 1e-6;
    double hamiltonian = 1e-6;
    double final_position = 10.0;  // m
    double dv = 0.1;               // m/s
    double switch_time = 1e-3;     // s
    double primer = 1e-6;
};

struct Violation {
    std::string name;
    double value = 0.0;
    double limit = 0.0;
};

/// Checks the full-system invariants and the reduced Hamiltonian always; the
/// reduced Z, pointwise and end-to-end divergence only for coplanar runs.
std::vector<Violation> check_report(const DivergenceReport& rep, bool coplanar, const VerifyThresholds& limits = {});

}  // namespace primer
