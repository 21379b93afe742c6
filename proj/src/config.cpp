#include "primer/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace primer {

namespace {

using nlohmann::json;

const json& section(const json& root, const char* name) {
    static const json empty = json::object();
    if (!root.contains(name)) return empty;
    const json& s = root.at(name);
    if (!s.is_object()) throw ConfigError(std::string(name) + ": expected an object");
    return s;
}

std::optional<double> opt_number(const json& obj, const std::string& prefix, const char* key) {
    if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    const json& v = obj.at(key);
    if (!v.is_number()) throw ConfigError(prefix + "." + key + ": expected a number");
    return v.get<double>();
}

double number(const json& obj, const std::string& prefix, const char* key, double fallback) {
    return opt_number(obj, prefix, key).value_or(fallback);
}

double required(const json& obj, const std::string& prefix, const char* key) {
    const auto v = opt_number(obj, prefix, key);
    if (!v) throw ConfigError(prefix + "." + key + ": required field is missing");
    return *v;
}

int integer(const json& obj, const std::string& prefix, const char* key, int fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) throw ConfigError(prefix + "." + key + ": expected an integer");
    return v.get<int>();
}

std::vector<double> number_list(const json& obj, const std::string& prefix, const char* key) {
    std::vector<double> out;
    if (!obj.contains(key)) return out;
    const json& v = obj.at(key);
    if (!v.is_array()) throw ConfigError(prefix + "." + key + ": expected an array of numbers");
    for (const auto& x : v) {
        if (!x.is_number()) throw ConfigError(prefix + "." + key + ": expected an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

void put(json& obj, const char* key, const std::optional<double>& v) {
    if (v) obj[key] = *v;
}

void require_field(const std::optional<double>& v, const std::string& name, const std::string& why) {
    if (!v) throw ConfigError(name + ": required " + why);
}

}  // namespace

void RunConfig::validate() const {
    if (!(constants.gamma_m3s2 > 0.0)) throw ConfigError("constants.gamma_m3s2: must be positive");
    if (!(constants.g0_ms2 > 0.0)) throw ConfigError("constants.g0_ms2: must be positive");
    if (!(vehicle.p_max_n > 0.0)) throw ConfigError("vehicle.p_max_n: must be positive");
    if (!(vehicle.isp_s > 0.0)) throw ConfigError("vehicle.isp_s: must be positive");
    if (!(vehicle.m0_kg > 0.0)) throw ConfigError("vehicle.m0_kg: must be positive");

    if (initial.has_state() == initial.has_elements()) {
        throw ConfigError("initial: give either r_km/vr_ms/vtheta_ms or l_km/e/f_deg");
    }
    if (initial.has_state()) {
        require_field(initial.r_km, "initial.r_km", "with a state-vector initial point");
        require_field(initial.vr_ms, "initial.vr_ms", "with a state-vector initial point");
        require_field(initial.vtheta_ms, "initial.vtheta_ms", "with a state-vector initial point");
    } else {
        require_field(initial.l_km, "initial.l_km", "with an element initial point");
        require_field(initial.e, "initial.e", "with an element initial point");
        require_field(initial.f_deg, "initial.f_deg", "with an element initial point");
    }

    const std::string kind = "for kind " + to_string(problem.kind);
    require_field(final_point.vfr_ms, "final.vfr_ms", kind);
    require_field(final_point.vftheta_ms, "final.vftheta_ms", kind);
    require_field(final_point.rf_km, "final.rf_km", kind);
    if (!(*final_point.rf_km > 0.0)) throw ConfigError("final.rf_km: must be positive");
    if (!(*final_point.vftheta_ms > 0.0)) throw ConfigError("final.vftheta_ms: must be positive");
    if (!problem.coplanar && sweep.chi_deg.empty()) {
        require_field(final_point.chif_deg, "final.chif_deg", "for noncoplanar problems");
    }
    const bool per_row_dtheta = !sweep.dtheta_deg.empty();
    const bool per_row_dt = !sweep.dt_s.empty();
    switch (problem.kind) {
        case ProblemKind::I: break;
        case ProblemKind::II:
            if (!per_row_dtheta) require_field(final_point.dtheta_deg, "final.dtheta_deg", kind);
            break;
        case ProblemKind::III:
            if (!per_row_dt) require_field(final_point.dt_s, "final.dt_s", kind);
            break;
        case ProblemKind::III_T: require_field(final_point.dv_ms, "final.dv_ms", kind); break;
    }
    if (per_row_dtheta && sweep.dtheta_deg.size() != sweep.chi_deg.size()) {
        throw ConfigError("sweep.dtheta_deg: needs one entry per sweep.chi_deg entry");
    }
    if (per_row_dt && sweep.dt_s.size() != sweep.chi_deg.size()) {
        throw ConfigError("sweep.dt_s: needs one entry per sweep.chi_deg entry");
    }
    if (solver.step_s <= 0.0) throw ConfigError("solver.step_s: must be positive");
    if (solver.event_tol_s <= 0.0) throw ConfigError("solver.event_tol_s: must be positive");
    if (solver.newton_tol <= 0.0) throw ConfigError("solver.newton_tol: must be positive");
    if (solver.max_iter < 1) throw ConfigError("solver.max_iter: must be at least 1");
    if (solver.fd_eps <= 0.0) throw ConfigError("solver.fd_eps: must be positive");
    if (solver.vr_eps_ms <= 0.0) throw ConfigError("solver.vr_eps_ms: must be positive");
    if (solver.multistart_n < 1) throw ConfigError("solver.multistart_n: must be at least 1");
}

RunConfig parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("top level: expected an object");

    RunConfig cfg;
    const json& c = section(root, "constants");
    cfg.constants.gamma_m3s2 = number(c, "constants", "gamma_m3s2", cfg.constants.gamma_m3s2);
    cfg.constants.g0_ms2 = number(c, "constants", "g0_ms2", cfg.constants.g0_ms2);

    if (!root.contains("vehicle")) throw ConfigError("vehicle: required section is missing");
    const json& v = section(root, "vehicle");
    cfg.vehicle.p_max_n = required(v, "vehicle", "p_max_n");
    cfg.vehicle.isp_s = required(v, "vehicle", "isp_s");
    cfg.vehicle.m0_kg = required(v, "vehicle", "m0_kg");

    if (!root.contains("initial")) throw ConfigError("initial: required section is missing");
    const json& i = section(root, "initial");
    cfg.initial.r_km = opt_number(i, "initial", "r_km");
    cfg.initial.vr_ms = opt_number(i, "initial", "vr_ms");
    cfg.initial.vtheta_ms = opt_number(i, "initial", "vtheta_ms");
    cfg.initial.l_km = opt_number(i, "initial", "l_km");
    cfg.initial.e = opt_number(i, "initial", "e");
    cfg.initial.f_deg = opt_number(i, "initial", "f_deg");

    if (!root.contains("final")) throw ConfigError("final: required section is missing");
    const json& f = section(root, "final");
    cfg.final_point.vfr_ms = opt_number(f, "final", "vfr_ms");
    cfg.final_point.vftheta_ms = opt_number(f, "final", "vftheta_ms");
    cfg.final_point.rf_km = opt_number(f, "final", "rf_km");
    cfg.final_point.chif_deg = opt_number(f, "final", "chif_deg");
    cfg.final_point.dtheta_deg = opt_number(f, "final", "dtheta_deg");
    cfg.final_point.dt_s = opt_number(f, "final", "dt_s");
    cfg.final_point.dv_ms = opt_number(f, "final", "dv_ms");

    const json& p = section(root, "problem");
    if (p.contains("kind")) {
        if (!p.at("kind").is_string()) throw ConfigError("problem.kind: expected a string");
        try {
            cfg.problem.kind = parse_problem_kind(p.at("kind").get<std::string>());
        } catch (const DomainError& e) {
            throw ConfigError(std::string("problem.kind: ") + e.what());
        }
    }
    if (p.contains("coplanar")) {
        if (!p.at("coplanar").is_boolean()) throw ConfigError("problem.coplanar: expected true or false");
        cfg.problem.coplanar = p.at("coplanar").get<bool>();
    }

    if (root.contains("guess")) {
        const json& g = section(root, "guess");
        GuessConfig guess;
        guess.lambda0 = required(g, "guess", "lambda0");
        guess.mu0 = required(g, "guess", "mu0");
        guess.e_ms = opt_number(g, "guess", "e_ms");
        guess.a_ms = opt_number(g, "guess", "a_ms");
        guess.c_ms2 = opt_number(g, "guess", "c_ms2");
        cfg.guess = guess;
    }

    const json& s = section(root, "solver");
    cfg.solver.step_s = number(s, "solver", "step_s", cfg.solver.step_s);
    cfg.solver.event_tol_s = number(s, "solver", "event_tol_s", cfg.solver.event_tol_s);
    cfg.solver.newton_tol = number(s, "solver", "newton_tol", cfg.solver.newton_tol);
    cfg.solver.max_iter = integer(s, "solver", "max_iter", cfg.solver.max_iter);
    cfg.solver.fd_eps = number(s, "solver", "fd_eps", cfg.solver.fd_eps);
    cfg.solver.vr_eps_ms = number(s, "solver", "vr_eps_ms", cfg.solver.vr_eps_ms);
    cfg.solver.multistart_n = integer(s, "solver", "multistart_n", cfg.solver.multistart_n);

    const json& w = section(root, "sweep");
    cfg.sweep.chi_deg = number_list(w, "sweep", "chi_deg");
    cfg.sweep.dtheta_deg = number_list(w, "sweep", "dtheta_deg");
    cfg.sweep.dt_s = number_list(w, "sweep", "dt_s");

    const json& o = section(root, "output");
    auto text = [&](const char* key) -> std::string {
        if (!o.contains(key)) return {};
        if (!o.at(key).is_string()) throw ConfigError(std::string("output.") + key + ": expected a string");
        return o.at(key).get<std::string>();
    };
    cfg.output.trajectory_csv = text("trajectory_csv");
    cfg.output.solution_json = text("solution_json");

    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& cfg, int indent) {
    json root;
    root["constants"] = {{"gamma_m3s2", cfg.constants.gamma_m3s2}, {"g0_ms2", cfg.constants.g0_ms2}};
    root["vehicle"] = {{"p_max_n", cfg.vehicle.p_max_n}, {"isp_s", cfg.vehicle.isp_s}, {"m0_kg", cfg.vehicle.m0_kg}};

    json initial = json::object();
    put(initial, "r_km", cfg.initial.r_km);
    put(initial, "vr_ms", cfg.initial.vr_ms);
    put(initial, "vtheta_ms", cfg.initial.vtheta_ms);
    put(initial, "l_km", cfg.initial.l_km);
    put(initial, "e", cfg.initial.e);
    put(initial, "f_deg", cfg.initial.f_deg);
    root["initial"] = initial;

    json fin = json::object();
    put(fin, "vfr_ms", cfg.final_point.vfr_ms);
    put(fin, "vftheta_ms", cfg.final_point.vftheta_ms);
    put(fin, "rf_km", cfg.final_point.rf_km);
    put(fin, "chif_deg", cfg.final_point.chif_deg);
    put(fin, "dtheta_deg", cfg.final_point.dtheta_deg);
    put(fin, "dt_s", cfg.final_point.dt_s);
    put(fin, "dv_ms", cfg.final_point.dv_ms);
    root["final"] = fin;

    root["problem"] = {{"kind", to_string(cfg.problem.kind)}, {"coplanar", cfg.problem.coplanar}};

    if (cfg.guess) {
        json g = {{"lambda0", cfg.guess->lambda0}, {"mu0", cfg.guess->mu0}};
        put(g, "e_ms", cfg.guess->e_ms);
        put(g, "a_ms", cfg.guess->a_ms);
        put(g, "c_ms2", cfg.guess->c_ms2);
        root["guess"] = g;
    }

    root["solver"] = {{"step_s", cfg.solver.step_s},         {"event_tol_s", cfg.solver.event_tol_s},
                      {"newton_tol", cfg.solver.newton_tol}, {"max_iter", cfg.solver.max_iter},
                      {"fd_eps", cfg.solver.fd_eps},         {"vr_eps_ms", cfg.solver.vr_eps_ms},
                      {"multistart_n", cfg.solver.multistart_n}};

    if (!cfg.sweep.chi_deg.empty()) {
        json w = {{"chi_deg", cfg.sweep.chi_deg}};
        if (!cfg.sweep.dtheta_deg.empty()) w["dtheta_deg"] = cfg.sweep.dtheta_deg;
        if (!cfg.sweep.dt_s.empty()) w["dt_s"] = cfg.sweep.dt_s;
        root["sweep"] = w;
    }

    json out = json::object();
    if (!cfg.output.trajectory_csv.empty()) out["trajectory_csv"] = cfg.output.trajectory_csv;
    if (!cfg.output.solution_json.empty()) out["solution_json"] = cfg.output.solution_json;
    if (!out.empty()) root["output"] = out;

    return root.dump(indent);
}

PhysicalConstants make_constants(const RunConfig& cfg) {
    return {cfg.constants.gamma_m3s2, cfg.constants.g0_ms2};
}

Vehicle make_vehicle(const RunConfig& cfg) {
    return {cfg.vehicle.p_max_n, cfg.vehicle.isp_s, cfg.vehicle.m0_kg};
}

PlanarVelocityState make_initial_state(const RunConfig& cfg) {
    if (cfg.initial.has_state()) {
        return {*cfg.initial.r_km * 1e3, *cfg.initial.vr_ms, *cfg.initial.vtheta_ms};
    }
    const ConicElements el{*cfg.initial.l_km * 1e3, *cfg.initial.e, deg_to_rad(*cfg.initial.f_deg)};
    return elements_to_state(el, make_constants(cfg));
}

ProblemSpec make_problem(const RunConfig& cfg) {
    ProblemSpec spec;
    spec.kind = cfg.problem.kind;
    spec.coplanar = cfg.problem.coplanar;
    const auto& f = cfg.final_point;
    spec.boundary.v_fr = f.vfr_ms.value_or(0.0);
    spec.boundary.v_ftheta = f.vftheta_ms.value_or(0.0);
    spec.boundary.r_f = f.rf_km.value_or(0.0) * 1e3;
    spec.boundary.chi_f = spec.coplanar ? 0.0 : deg_to_rad(f.chif_deg.value_or(0.0));
    spec.boundary.dtheta = deg_to_rad(f.dtheta_deg.value_or(0.0));
    spec.boundary.dt = f.dt_s.value_or(0.0);
    spec.boundary.dv_target = f.dv_ms.value_or(0.0);
    return spec;
}

TransferSetup make_setup(const RunConfig& cfg) {
    TransferSetup setup;
    setup.constants = make_constants(cfg);
    setup.vehicle = make_vehicle(cfg);
    setup.initial = make_initial_state(cfg);
    setup.propagation.step = cfg.solver.step_s;
    setup.propagation.event_tol = cfg.solver.event_tol_s;
    setup.propagation.vr_eps = cfg.solver.vr_eps_ms;
    return setup;
}

SolverOptions make_solver_options(const RunConfig& cfg) {
    SolverOptions opts;
    opts.newton_tol = cfg.solver.newton_tol;
    opts.max_iter = cfg.solver.max_iter;
    opts.fd_eps = cfg.solver.fd_eps;
    opts.multistart_n = cfg.solver.multistart_n;
    return opts;
}

GuessVector generating_guess(const PaperDataset& dataset, double chi_deg) {
    const TableRow& row = dataset.table5.nearest(chi_deg);
    GuessVector g;
    g.lambda0 = row.lambda0;
    g.mu0 = row.mu0;
    g.e_guess = row.e_const;
    return g;
}

GuessVector make_guess(const RunConfig& cfg, const PaperDataset& dataset) {
    if (!cfg.guess) {
        const double chi = cfg.problem.coplanar ? 0.0 : cfg.final_point.chif_deg.value_or(0.0);
        return generating_guess(dataset, chi);
    }
    GuessVector g;
    g.lambda0 = cfg.guess->lambda0;
    g.mu0 = cfg.guess->mu0;
    g.e_guess = cfg.guess->e_ms.value_or(0.0);
    g.a_guess = cfg.guess->a_ms.value_or(0.0);
    g.c_guess = cfg.guess->c_ms2.value_or(0.0);
    return g;
}

}  // namespace primer
