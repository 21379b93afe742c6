// Command-line front end: solve, propagate, sweep, verify and dataset.
//
// Exit codes: 0 success, 2 configuration error, 3 no convergence,
// 4 propagation failure, 5 invariant violation.
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "primer/config.hpp"
#include "primer/oracle.hpp"
#include "primer/report.hpp"
#include "primer/shooting.hpp"

namespace {

using namespace primer;

enum ExitCode : int {
    exit_ok = 0,
    exit_config = 2,
    exit_no_convergence = 3,
    exit_propagation = 4,
    exit_invariant = 5,
};

struct CommonFlags {
    std::string config;
    std::string kind;
    std::optional<bool> coplanar;
    std::vector<double> chi;
    std::optional<double> step;
    std::string out;
    std::string format = "csv";
    std::optional<int> multistart;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_out = true) {
    cmd->add_option("--config", f.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    cmd->add_option("--kind", f.kind, "problem kind: I, II, III or III-T");
    cmd->add_flag_callback("--coplanar", [&f] { f.coplanar = true; }, "force a coplanar problem");
    cmd->add_flag_callback("--noncoplanar", [&f] { f.coplanar = false; }, "force a noncoplanar problem");
    cmd->add_option("--chi", f.chi, "plane-change angle(s), deg")->delimiter(',');
    cmd->add_option("--step", f.step, "RK4 step, s");
    cmd->add_option("--multistart", f.multistart, "number of perturbed seeds");
    if (with_out) {
        cmd->add_option("--out", f.out, "output file");
        cmd->add_option("--format", f.format, "output format")->check(CLI::IsMember({"csv", "json"}));
    }
}

/// Loads the config and applies command-line overrides. A single --chi value
/// selects the target plane change (0 means coplanar).
RunConfig load(const CommonFlags& f, bool chi_is_list) {
    RunConfig cfg = load_config(f.config);
    if (!f.kind.empty()) {
        try {
            cfg.problem.kind = parse_problem_kind(f.kind);
        } catch (const DomainError& e) {
            throw ConfigError(std::string("--kind: ") + e.what());
        }
    }
    if (f.coplanar) cfg.problem.coplanar = *f.coplanar;
    if (!f.chi.empty()) {
        if (chi_is_list) {
            cfg.sweep.chi_deg = f.chi;
            if (cfg.sweep.dt_s.size() != f.chi.size()) cfg.sweep.dt_s.clear();
            if (cfg.sweep.dtheta_deg.size() != f.chi.size()) cfg.sweep.dtheta_deg.clear();
        } else {
            if (f.chi.size() != 1) throw ConfigError("--chi: expected a single angle for this command");
            cfg.final_point.chif_deg = f.chi.front();
            cfg.problem.coplanar = f.chi.front() == 0.0;
        }
    }
    if (f.step) cfg.solver.step_s = *f.step;
    if (f.multistart) cfg.solver.multistart_n = *f.multistart;
    cfg.validate();
    return cfg;
}

/// Writes the whole text at once so a failed run never leaves a partial file.
void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot open output file " + path);
    out << text;
}

std::string trajectory_csv(const std::vector<TrajectorySample>& samples) {
    std::ostringstream os;
    write_trajectory_csv(os, samples);
    return os.str();
}

void print_schedule(std::ostream& os, const BurnSchedule& schedule) {
    os << "arcs:\n";
    for (const auto& arc : schedule.arcs) {
        os << "  " << (arc.type == ArcType::burn ? "burn " : "coast") << "  t = " << arc.t_start << " .. " << arc.t_end
           << " s  dv = " << arc.dv << " m/s\n";
    }
    os << "total dv = " << schedule.total_dv() << " m/s\n";
}

double target_chi_deg(const RunConfig& cfg) {
    return cfg.problem.coplanar ? 0.0 : cfg.final_point.chif_deg.value_or(0.0);
}

int cmd_solve(const CommonFlags& f) {
    const RunConfig cfg = load(f, false);
    const PaperDataset dataset = load_paper_dataset();
    const ProblemSpec spec = make_problem(cfg);
    const TransferSetup setup = make_setup(cfg);
    const Solution sol = solve(spec, make_guess(cfg, dataset), setup, make_solver_options(cfg));

    std::cout << table_header(spec.kind) << '\n' << format_table_row(sol, spec, target_chi_deg(cfg)) << '\n';
    std::cout << "status: " << to_string(sol.status) << " after " << sol.iterations << " iterations, residual "
              << sol.residual_norm << (sol.message.empty() ? "" : " (" + sol.message + ")") << '\n';
    if (!sol.converged) {
        // A seed that cannot be propagated at all is a propagation failure;
        // anything that iterated and gave up is non-convergence.
        const bool seed_failed = sol.status == SolveStatus::infeasible_guess && sol.iterations == 0;
        return seed_failed ? exit_propagation : exit_no_convergence;
    }

    const Solution full = summarize(spec, sol.parameters, setup, make_solver_options(cfg).scales, true);
    std::string traj_path = cfg.output.trajectory_csv;
    std::string json_path = cfg.output.solution_json;
    if (!f.out.empty()) (f.format == "json" ? json_path : traj_path) = f.out;
    if (!traj_path.empty()) write_file(traj_path, trajectory_csv(full.samples));
    if (!json_path.empty()) write_file(json_path, solution_to_json(sol, spec) + "\n");
    return exit_ok;
}

struct PropagateFlags {
    std::optional<double> lambda0, mu0, e, a, c;
};

int cmd_propagate(const CommonFlags& f, const PropagateFlags& p) {
    const RunConfig cfg = load(f, false);
    const PaperDataset dataset = load_paper_dataset();
    const ProblemSpec spec = make_problem(cfg);
    TransferSetup setup = make_setup(cfg);
    GuessVector params = make_guess(cfg, dataset);
    if (p.lambda0) params.lambda0 = *p.lambda0;
    if (p.mu0) params.mu0 = *p.mu0;
    if (p.e) params.e_guess = *p.e;
    if (p.a) params.a_guess = *p.a;
    if (p.c) params.c_guess = *p.c;

    Solution sol;
    try {
        sol = summarize(spec, params, setup, {}, true);
    } catch (const PropagationError& e) {
        std::cerr << "propagation failed: " << e.what() << '\n';
        return exit_propagation;
    }

    const std::string csv = trajectory_csv(sol.samples);
    std::ostream& info = f.out.empty() ? std::cerr : std::cout;
    if (f.out.empty()) {
        std::cout << csv;
    } else {
        write_file(f.out, csv);
    }
    print_schedule(info, sol.schedule);
    info << "final: r = " << sol.r_f / 1e3 << " km, theta = " << rad_to_deg(sol.theta_f) << " deg, t = " << sol.t_f
         << " s, chi = " << rad_to_deg(sol.chi_f) << " deg\n";
    return exit_ok;
}

int cmd_sweep(const CommonFlags& f) {
    const RunConfig cfg = load(f, true);
    if (cfg.sweep.chi_deg.empty()) throw ConfigError("sweep.chi_deg: no inclinations given (use --chi or the config)");
    const PaperDataset dataset = load_paper_dataset();
    const ProblemSpec base = make_problem(cfg);
    const TransferSetup setup = make_setup(cfg);

    std::vector<double> chi_rad;
    for (double d : cfg.sweep.chi_deg) chi_rad.push_back(deg_to_rad(d));

    RunConfig first = cfg;
    first.problem.coplanar = cfg.sweep.chi_deg.front() == 0.0;
    first.final_point.chif_deg = cfg.sweep.chi_deg.front();
    const GuessVector seed = make_guess(first, dataset);

    SweepOptions opts;
    opts.solver = make_solver_options(cfg);
    opts.fallback_seed = [&dataset](double chi) -> std::optional<GuessVector> {
        return generating_guess(dataset, rad_to_deg(chi));
    };
    // Per-row Δt / Δθ; intermediate continuation angles interpolate between
    // the bracketing rows.
    auto per_row = [&](const std::vector<double>& values, double chi) {
        if (chi <= chi_rad.front()) return values.front();
        for (std::size_t i = 1; i < chi_rad.size(); ++i) {
            if (chi <= chi_rad[i]) {
                const double w = (chi - chi_rad[i - 1]) / (chi_rad[i] - chi_rad[i - 1]);
                return values[i - 1] + w * (values[i] - values[i - 1]);
            }
        }
        return values.back();
    };
    SpecCustomizer customize = [&](ProblemSpec& spec, double chi) {
        if (!cfg.sweep.dt_s.empty()) spec.boundary.dt = per_row(cfg.sweep.dt_s, chi);
        if (!cfg.sweep.dtheta_deg.empty()) spec.boundary.dtheta = deg_to_rad(per_row(cfg.sweep.dtheta_deg, chi));
    };

    const auto rows = sweep(base, chi_rad, seed, setup, opts, customize);

    bool all_ok = true;
    std::ostringstream machine;
    nlohmann::json array = nlohmann::json::array();
    if (f.format == "csv") machine << sweep_csv_header() << '\n';
    std::cout << table_header(base.kind) << '\n';
    for (const auto& row : rows) {
        ProblemSpec spec = base;
        spec.coplanar = row.chi == 0.0;
        spec.boundary.chi_f = row.chi;
        customize(spec, row.chi);
        const double deg = rad_to_deg(row.chi);
        all_ok = all_ok && row.solution.converged;
        std::cout << format_table_row(row.solution, spec, deg)
                  << (row.solution.converged ? "" : "  FAILED: " + to_string(row.solution.status)) << '\n';
        if (f.format == "csv") {
            machine << sweep_csv_row(row.solution, spec, deg) << '\n';
        } else {
            array.push_back(nlohmann::json::parse(solution_to_json(row.solution, spec)));
        }
    }
    if (f.format == "json") machine << array.dump(2) << '\n';
    if (!f.out.empty()) write_file(f.out, machine.str());
    return all_ok ? exit_ok : exit_no_convergence;
}

struct VerifyFlags {
    bool solve_first = false;
    double dlam_scale = 1.0;
};

int cmd_verify(const CommonFlags& f, const VerifyFlags& v) {
    const RunConfig cfg = load(f, false);
    const PaperDataset dataset = load_paper_dataset();
    const ProblemSpec spec = make_problem(cfg);
    const TransferSetup setup = make_setup(cfg);
    GuessVector params = make_guess(cfg, dataset);
    if (v.solve_first) {
        const Solution sol = solve(spec, params, setup, make_solver_options(cfg));
        if (!sol.converged) {
            std::cerr << "solve failed: " << to_string(sol.status) << ' ' << sol.message << '\n';
            return exit_no_convergence;
        }
        params = sol.parameters;
    }

    PropagationOptions popts = setup.propagation;
    popts.dlam_scale = v.dlam_scale;
    const OrbitalState init{0.0, setup.initial.r, setup.initial.v_r, setup.initial.v_theta, 0.0, 0.0, 0.0};
    const AdjointState adj{params.lambda0, params.mu0, -1.0};
    DivergenceReport rep;
    try {
        rep = compare_reduced_vs_full(init, adj, params.constants(spec), setup.vehicle, setup.constants, spec.stop(),
                                      popts);
    } catch (const PropagationError& e) {
        std::cerr << "propagation failed: " << e.what() << '\n';
        return exit_propagation;
    }

    const std::string report = to_json(rep);
    std::cout << report << '\n';
    if (!f.out.empty()) write_file(f.out, report + "\n");
    const auto violations = check_report(rep, spec.coplanar);
    for (const auto& viol : violations) {
        std::cout << "VIOLATION " << viol.name << " = " << viol.value << " (limit " << viol.limit << ")\n";
    }
    if (!violations.empty()) return exit_invariant;
    std::cout << "all invariants within limits\n";
    return exit_ok;
}

int cmd_dataset(const std::string& format, const std::string& out) {
    const PaperDataset ds = load_paper_dataset();
    std::ostringstream os;
    if (format == "json") {
        std::ifstream in(default_dataset_path());
        os << in.rdbuf();
    } else {
        os << "table,i_deg,dv1,dv2,dv_total,lambda0,mu0,e_ms,extra,angle_deg,time_s,suspect\n";
        os << std::setprecision(10);
        auto dump = [&](const char* name, const SolutionTable& t) {
            for (const auto& r : t.rows) {
                os << name << ',' << r.i_deg << ',' << r.dv1 << ',' << r.dv2 << ',' << r.dv_total << ',' << r.lambda0
                   << ',' << r.mu0 << ',' << r.e_const << ',';
                if (r.extra) os << *r.extra;
                os << ',';
                if (r.angle_deg) os << *r.angle_deg;
                os << ',';
                if (r.time_s) os << *r.time_s;
                os << ',' << (r.suspect ? 1 : 0) << '\n';
            }
        };
        dump("table5", ds.table5);
        dump("table6", ds.table6);
        dump("table7", ds.table7);
        dump("table8", ds.table8);
    }
    if (out.empty()) {
        std::cout << os.str();
    } else {
        write_file(out, os.str());
    }
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Minimum-delta-v finite-thrust transfer optimizer"};
    app.require_subcommand(1);

    CommonFlags solve_flags, prop_flags, sweep_flags, verify_flags;
    PropagateFlags prop_params;
    VerifyFlags verify_opts;
    std::string dataset_format = "json", dataset_out;

    auto* solve_cmd = app.add_subcommand("solve", "solve a boundary-value problem by shooting");
    add_common(solve_cmd, solve_flags);

    auto* prop_cmd = app.add_subcommand("propagate", "propagate with explicit adjoint parameters");
    add_common(prop_cmd, prop_flags);
    prop_cmd->add_option("--lambda0", prop_params.lambda0, "initial radial primer component");
    prop_cmd->add_option("--mu0", prop_params.mu0, "initial transversal primer component");
    prop_cmd->add_option("--e", prop_params.e, "E, m/s");
    prop_cmd->add_option("--a", prop_params.a, "A, m/s");
    prop_cmd->add_option("--c", prop_params.c, "C, m/s^2");

    auto* sweep_cmd = app.add_subcommand("sweep", "continuation over plane-change angles");
    add_common(sweep_cmd, sweep_flags);

    auto* verify_cmd = app.add_subcommand("verify", "cross-check against the full inertial system");
    add_common(verify_cmd, verify_flags);
    verify_cmd->add_flag("--solve", verify_opts.solve_first, "solve first and verify the converged parameters");
    verify_cmd->add_option("--dlam-scale", verify_opts.dlam_scale, "multiply the reduced radial primer rate (fault injection)");

    auto* dataset_cmd = app.add_subcommand("dataset", "dump the bundled numerical tables");
    dataset_cmd->add_option("--format", dataset_format)->check(CLI::IsMember({"csv", "json"}));
    dataset_cmd->add_option("--out", dataset_out, "output file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_config;
    }

    try {
        if (solve_cmd->parsed()) return cmd_solve(solve_flags);
        if (prop_cmd->parsed()) return cmd_propagate(prop_flags, prop_params);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep_flags);
        if (verify_cmd->parsed()) return cmd_verify(verify_flags, verify_opts);
        if (dataset_cmd->parsed()) return cmd_dataset(dataset_format, dataset_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const DomainError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const DatasetError& e) {
        std::cerr << "dataset error: " << e.what() << '\n';
        return exit_config;
    } catch (const PropagationError& e) {
        std::cerr << "propagation failed: " << e.what() << '\n';
        return exit_propagation;
    }
    return exit_config;
}
