#include "primer/report.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace primer {

namespace {

const char* extra_label(const ProblemSpec& spec) {
    if (spec.has_a()) return "A[m/s]";
    if (spec.has_c()) return "C[m/s2]";
    return "-";
}

double extra_value(const Solution& sol, const ProblemSpec& spec) {
    if (spec.has_a()) return sol.parameters.a_guess;
    if (spec.has_c()) return sol.parameters.c_guess;
    return 0.0;
}

}  // namespace

std::string table_header(ProblemKind kind) {
    ProblemSpec spec;
    spec.kind = kind;
    std::ostringstream os;
    os << std::setw(6) << "i_f" << std::setw(10) << "dv1" << std::setw(10) << "dv2" << std::setw(10) << "dv_sum"
       << std::setw(12) << "lambda0" << std::setw(12) << "mu0" << std::setw(10) << "E" << std::setw(12)
       << extra_label(spec) << std::setw(9) << "theta_f" << std::setw(10) << "t_f";
    return os.str();
}

std::string format_table_row(const Solution& sol, const ProblemSpec& spec, double chi_deg) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << std::setw(6) << chi_deg << std::setw(10) << sol.dv1 << std::setw(10)
       << sol.dv2 << std::setw(10) << sol.dv_total;
    os << std::defaultfloat << std::setprecision(6) << std::setw(12) << sol.parameters.lambda0 << std::setw(12)
       << sol.parameters.mu0;
    os << std::fixed << std::setprecision(2) << std::setw(10) << (spec.coplanar ? 0.0 : sol.parameters.e_guess);
    if (spec.has_a() || spec.has_c()) {
        os << std::defaultfloat << std::setprecision(6) << std::setw(12) << extra_value(sol, spec);
    } else {
        os << std::setw(12) << "-";
    }
    os << std::fixed << std::setprecision(2) << std::setw(9) << rad_to_deg(sol.theta_f) << std::setw(10) << sol.t_f;
    return os.str();
}

std::string sweep_csv_header() {
    return "i_deg,status,dv1,dv2,dv_total,lambda0,mu0,e_ms,extra,theta_f_deg,t_f_s,residual_norm,iterations";
}

std::string sweep_csv_row(const Solution& sol, const ProblemSpec& spec, double chi_deg) {
    std::ostringstream os;
    os << std::setprecision(10) << chi_deg << ',' << to_string(sol.status) << ',' << sol.dv1 << ',' << sol.dv2 << ','
       << sol.dv_total << ',' << sol.parameters.lambda0 << ',' << sol.parameters.mu0 << ','
       << (spec.coplanar ? 0.0 : sol.parameters.e_guess) << ',' << extra_value(sol, spec) << ','
       << rad_to_deg(sol.theta_f) << ',' << sol.t_f << ',' << sol.residual_norm << ',' << sol.iterations;
    return os.str();
}

std::string solution_to_json(const Solution& sol, const ProblemSpec& spec, int indent) {
    nlohmann::json j;
    j["kind"] = to_string(spec.kind);
    j["coplanar"] = spec.coplanar;
    j["chi_f_deg"] = rad_to_deg(spec.boundary.chi_f);
    j["status"] = to_string(sol.status);
    j["converged"] = sol.converged;
    j["message"] = sol.message;
    j["iterations"] = sol.iterations;
    j["residual_norm"] = std::isfinite(sol.residual_norm) ? nlohmann::json(sol.residual_norm) : nlohmann::json();
    j["parameters"] = {{"lambda0", sol.parameters.lambda0},
                       {"mu0", sol.parameters.mu0},
                       {"e_ms", spec.coplanar ? 0.0 : sol.parameters.e_guess},
                       {"a_ms", spec.has_a() ? sol.parameters.a_guess : 0.0},
                       {"c_ms2", spec.has_c() ? sol.parameters.c_guess : 0.0}};
    j["dv1_ms"] = sol.dv1;
    j["dv2_ms"] = sol.dv2;
    j["dv_total_ms"] = sol.dv_total;
    j["theta_f_deg"] = rad_to_deg(sol.theta_f);
    j["t_f_s"] = sol.t_f;
    j["r_f_km"] = sol.r_f / 1e3;
    j["chi_reached_deg"] = rad_to_deg(sol.chi_f);
    nlohmann::json arcs = nlohmann::json::array();
    for (const auto& arc : sol.schedule.arcs) {
        arcs.push_back({{"type", arc.type == ArcType::burn ? "burn" : "coast"},
                        {"t_start_s", arc.t_start},
                        {"t_end_s", arc.t_end},
                        {"dv_ms", arc.dv}});
    }
    j["arcs"] = arcs;
    return j.dump(indent);
}

std::vector<Violation> check_report(const DivergenceReport& rep, bool coplanar, const VerifyThresholds& limits) {
    std::vector<Violation> out;
    auto check = [&](const char* name, double value, double limit) {
        if (!(std::abs(value) < limit)) out.push_back({name, value, limit});
    };
    check("z_drift", rep.invariants.z_drift, limits.z_drift);
    check("hp_minus_rz", rep.invariants.hp_minus_rz, limits.hp_minus_rz);
    check("hamiltonian_full", rep.invariants.hamiltonian, limits.hamiltonian);
    check("hamiltonian_reduced", rep.reduced_hamiltonian, limits.hamiltonian);
    if (coplanar) {
        check("z_drift_reduced", rep.reduced_z_drift, limits.z_drift);
        check("max_primer", rep.max_primer, limits.primer);
        check("final_position", rep.final_position, limits.final_position);
        check("dv_divergence", rep.dv_reduced - rep.dv_full, limits.dv);
        check("switch_time", rep.max_switch_time, limits.switch_time);
    }
    return out;
}

}  // namespace primer
