// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "primer/config.hpp"
#include "primer/oracle.hpp"
#include "primer/shooting.hpp"

using namespace primer;

namespace {

struct Check {
    bool pass = true;
    std::ostringstream detail;

    void expect(bool ok, const std::string& what) {
        if (!ok) pass = false;
        detail << (ok ? "" : "!") << what << "  ";
    }
    void within_abs(const char* name, double value, double expected, double tol) {
        std::ostringstream os;
        os << name << '=' << value << " (want " << expected << " +/- " << tol << ')';
        expect(std::abs(value - expected) <= tol, os.str());
    }
    void within_rel(const char* name, double value, double expected, double rel) {
        std::ostringstream os;
        os << name << '=' << value << " (want " << expected << " +/- " << rel * 100.0 << "%)";
        expect(std::abs(value - expected) <= rel * std::abs(expected), os.str());
    }
    void below(const char* name, double value, double limit) {
        std::ostringstream os;
        os << name << '=' << value << " (limit " << limit << ')';
        expect(std::abs(value) < limit, os.str());
    }
};

const PaperDataset& dataset() {
    static const PaperDataset ds = load_paper_dataset();
    return ds;
}

TransferSetup setup() {
    const auto& ds = dataset();
    TransferSetup s;
    s.constants = ds.constants;
    s.vehicle = ds.vehicle;
    s.initial = {ds.initial.r_km * 1e3, ds.initial.vr_ms, ds.initial.vtheta_ms};
    return s;
}

ProblemSpec spec_for(ProblemKind kind, double chi_deg) {
    const auto& f = dataset().final_point;
    ProblemSpec spec;
    spec.kind = kind;
    spec.coplanar = chi_deg == 0.0;
    spec.boundary.v_fr = f.vr_ms;
    spec.boundary.v_ftheta = f.vtheta_ms;
    spec.boundary.r_f = f.r_km * 1e3;
    spec.boundary.chi_f = deg_to_rad(chi_deg);
    return spec;
}

GuessVector seed_from(const TableRow& row) {
    GuessVector g;
    g.lambda0 = row.lambda0;
    g.mu0 = row.mu0;
    g.e_guess = row.e_const;
    return g;
}

OrbitalState departure_state() {
    const auto s = setup().initial;
    OrbitalState st;
    st.r = s.r;
    st.v_r = s.v_r;
    st.v_theta = s.v_theta;
    return st;
}

std::string describe(const Solution& sol) {
    std::ostringstream os;
    os << "[" << to_string(sol.status) << ", " << sol.iterations << " it] ";
    return os.str();
}

// Solutions shared between criteria.
struct Results {
    Solution kind1_i0, kind1_i20, kind2_i0, kind3_i10;
    std::vector<SweepRow> sweep;
} results;

Check a1() {
    Check c;
    results.kind1_i0 = solve(spec_for(ProblemKind::I, 0.0), seed_from(dataset().table5.at(0)), setup());
    const auto& s = results.kind1_i0;
    c.expect(s.converged, describe(s) + "converged");
    c.within_abs("dv_sum", s.dv_total, 3795.94, 4.0);
    c.within_abs("dv1", s.dv1, 2384.70, 4.0);
    c.within_abs("dv2", s.dv2, 1411.24, 4.0);
    c.within_abs("t_f", s.t_f, 2242.29, 10.0);
    c.within_abs("theta_f", rad_to_deg(s.theta_f), 116.70, 0.2);
    return c;
}

Check a2() {
    Check c;
    results.kind1_i20 = solve(spec_for(ProblemKind::I, 20.0), seed_from(dataset().table5.at(20)), setup());
    const auto& s = results.kind1_i20;
    c.expect(s.converged, describe(s) + "converged");
    c.within_abs("dv_sum", s.dv_total, 4515.94, 5.0);
    c.within_rel("E", s.parameters.e_guess, 3429.72, 0.02);
    return c;
}

Check a3() {
    Check c;
    const std::vector<double> chi_deg{0.0, 10.0, 20.0, 60.0, 90.0};
    const std::vector<double> expected{3795.94, 3990.48, 4515.94, 7949.84, 10831.13};
    std::vector<double> chi;
    for (double d : chi_deg) chi.push_back(deg_to_rad(d));
    SweepOptions opts;
    opts.fallback_seed = [](double x) -> std::optional<GuessVector> {
        return generating_guess(dataset(), rad_to_deg(x));
    };
    results.sweep = sweep(spec_for(ProblemKind::I, 0.0), chi, seed_from(dataset().table5.at(0)), setup(), opts);
    double previous = -1.0;
    for (std::size_t i = 0; i < results.sweep.size(); ++i) {
        const auto& s = results.sweep[i].solution;
        const std::string label = "i=" + std::to_string(static_cast<int>(chi_deg[i]));
        c.expect(s.converged, label + " converged");
        c.within_rel(label.c_str(), s.dv_total, expected[i], 0.002);
        c.expect(s.dv_total > previous, label + " increasing");
        previous = s.dv_total;
    }
    return c;
}

Check a4() {
    Check c;
    auto spec = spec_for(ProblemKind::II, 0.0);
    spec.boundary.dtheta = deg_to_rad(111.70);
    const auto& row = dataset().table7.at(0);
    GuessVector g = seed_from(row);
    g.a_guess = row.extra.value();
    results.kind2_i0 = solve(spec, g, setup());
    const auto& s = results.kind2_i0;
    c.expect(s.converged, describe(s) + "converged");
    c.within_abs("dv_sum", s.dv_total, 3803.07, 4.0);
    c.within_rel("A", s.parameters.a_guess, -184.57, 0.02);
    return c;
}

Check a5() {
    Check c;
    auto spec = spec_for(ProblemKind::III, 10.0);
    spec.boundary.dt = 2221.63;
    const auto& row = dataset().table8.at(10);
    GuessVector g = seed_from(row);
    g.c_guess = row.extra.value();
    results.kind3_i10 = solve(spec, g, setup());
    const auto& s = results.kind3_i10;
    c.expect(s.converged, describe(s) + "converged");
    c.within_abs("dv_sum", s.dv_total, 3991.46, 4.0);
    c.within_rel("C", s.parameters.c_guess, -0.06476, 0.02);
    return c;
}

Check a6() {
    Check c;
    const double slack = 0.5;
    const auto& ds = dataset();

    // Kind II at 10 deg: the tabulated lambda0 (0.007974) has a dropped digit;
    // the seed uses 0.07974, which matches the neighbouring kind II rows.
    auto spec2 = spec_for(ProblemKind::II, 10.0);
    spec2.boundary.dtheta = deg_to_rad(ds.table7.at(10).angle_deg.value());
    GuessVector g2 = seed_from(ds.table7.at(10));
    g2.lambda0 = 0.07974;
    g2.a_guess = ds.table7.at(10).extra.value();
    const Solution kind2_i10 = solve(spec2, g2, setup());

    // Kind III at 0 deg: flight time from the table caption rule t_f(kind I) - 35 s.
    auto spec3 = spec_for(ProblemKind::III, 0.0);
    spec3.boundary.dt = ds.table6.at(0).time_s.value() - 35.0;
    GuessVector g3 = seed_from(ds.table8.at(0));
    g3.c_guess = ds.table8.at(0).extra.value();
    const Solution kind3_i0 = solve(spec3, g3, setup());

    const Solution& kind1_i10 = results.sweep.size() > 1 ? results.sweep[1].solution : Solution{};
    const auto compare = [&](const char* label, const Solution& relaxed, const Solution& constrained) {
        c.expect(relaxed.converged && constrained.converged, std::string(label) + " both converged");
        std::ostringstream os;
        os << label << ' ' << relaxed.dv_total << " <= " << constrained.dv_total << " + " << slack;
        c.expect(relaxed.dv_total <= constrained.dv_total + slack, os.str());
    };
    compare("I/II i=0", results.kind1_i0, results.kind2_i0);
    compare("I/III i=0", results.kind1_i0, kind3_i0);
    compare("I/II i=10", kind1_i10, kind2_i10);
    compare("I/III i=10", kind1_i10, results.kind3_i10);
    return c;
}

DivergenceReport oracle_run(const Solution& sol, const ProblemSpec& spec) {
    const AdjointState adj{sol.parameters.lambda0, sol.parameters.mu0, -1.0};
    return compare_reduced_vs_full(departure_state(), adj, sol.parameters.constants(spec), dataset().vehicle,
                                   dataset().constants, spec.stop());
}

Check a7() {
    Check c;
    if (!results.kind1_i0.converged) {
        c.expect(false, "needs the converged kind I coplanar transfer");
        return c;
    }
    const auto rep = oracle_run(results.kind1_i0, spec_for(ProblemKind::I, 0.0));
    c.below("final_position_m", rep.final_position, 10.0);
    c.below("dv_divergence_ms", rep.dv_reduced - rep.dv_full, 0.1);
    c.below("switch_time_s", rep.max_switch_time, 1e-3);
    return c;
}

Check a8() {
    Check c;
    auto spec3 = spec_for(ProblemKind::III, 10.0);
    spec3.boundary.dt = 2221.63;
    const std::vector<std::pair<std::string, std::pair<const Solution*, ProblemSpec>>> cases{
        {"I i=0", {&results.kind1_i0, spec_for(ProblemKind::I, 0.0)}},
        {"I i=20", {&results.kind1_i20, spec_for(ProblemKind::I, 20.0)}},
        {"III i=10", {&results.kind3_i10, spec3}},
    };
    for (const auto& [label, item] : cases) {
        const auto& [sol, spec] = item;
        if (!sol->converged) {
            c.expect(false, label + " not converged");
            continue;
        }
        const auto rep = oracle_run(*sol, spec);
        c.below((label + " z_drift").c_str(), rep.invariants.z_drift, 1e-6);
        c.below((label + " hp-rz").c_str(), rep.invariants.hp_minus_rz, 1e-6);
        c.below((label + " H").c_str(), rep.invariants.hamiltonian, 1e-6);
    }
    return c;
}

Check a9() {
    Check c;
    PropagationOptions opts;
    opts.step = 1.0;
    opts.force_coast = true;
    // The departure perigee lies below the default impact floor; conservation
    // is checked on the unobstructed conic.
    opts.r_min = 1000e3;
    const auto run = propagate(departure_state(), {}, {}, dataset().vehicle, dataset().constants,
                               {StopVariable::time, 3000.0, CrossingDirection::increasing, 1}, opts);
    const auto& k = dataset().constants;
    const double e0 = run.samples.front().state.specific_energy(k);
    const double h0 = run.samples.front().state.angular_momentum();
    double de = 0.0, dh = 0.0;
    for (const auto& s : run.samples) {
        de = std::max(de, std::abs(s.state.specific_energy(k) / e0 - 1.0));
        dh = std::max(dh, std::abs(s.state.angular_momentum() / h0 - 1.0));
    }
    c.below("energy_drift", de, 1e-7);
    c.below("momentum_drift", dh, 1e-7);
    c.within_abs("t_end", run.final_sample.state.t, 3000.0, 1e-9);
    return c;
}

Check a10() {
    Check c;
    const double s = 7.0;
    const StopCondition stop{StopVariable::time, 500.0, CrossingDirection::increasing, 1};
    const std::pair<const char*, const Solution*> cases[] = {
        {"I i=0", &results.kind1_i0}, {"I i=20", &results.kind1_i20}, {"III i=10", &results.kind3_i10}};
    for (const auto& [label, ref] : cases) {
        const std::string p = std::string(label) + " ";
        c.expect(ref->converged, p + "reference converged");
        if (!ref->converged) continue;
        const AdjointState adj{ref->parameters.lambda0, ref->parameters.mu0, -1.0};
        const AdjointConstants k{ref->parameters.e_guess, ref->parameters.a_guess, ref->parameters.c_guess};
        const auto base = propagate(departure_state(), adj, k, dataset().vehicle, dataset().constants, stop);
        const auto scaled = propagate(departure_state(), {s * adj.lam, s * adj.mu, s * adj.psi_dv},
                                      {s * k.e_const, s * k.a_const, s * k.c_const}, dataset().vehicle,
                                      dataset().constants, stop);
        c.expect(base.samples.size() == scaled.samples.size(), p + "same sample count");
        const auto switches = base.schedule.switch_times();
        const double first_event = switches.empty() ? 1e300 : switches.front();
        double state_err = 0.0, adj_err = 0.0, pre_event_err = 0.0;
        for (std::size_t i = 0; i < std::min(base.samples.size(), scaled.samples.size()); ++i) {
            const auto& a = base.samples[i];
            const auto& b = scaled.samples[i];
            const Eigen::Vector<double, 7> xa{a.state.t, a.state.r, a.state.v_r, a.state.v_theta, a.state.theta,
                                              a.state.chi, a.state.dv};
            const Eigen::Vector<double, 7> xb{b.state.t, b.state.r, b.state.v_r, b.state.v_theta, b.state.theta,
                                              b.state.chi, b.state.dv};
            const Eigen::Vector3d pa = s * Eigen::Vector3d{a.adjoint.lam, a.adjoint.mu, a.adjoint.psi_dv};
            const Eigen::Vector3d pb{b.adjoint.lam, b.adjoint.mu, b.adjoint.psi_dv};
            // Each component relative to its own magnitude, floored at one unit
            // so that quantities passing through zero (v_r, chi, dv) stay defined.
            const double es = ((xb - xa).array().abs() / xa.array().abs().max(1.0)).maxCoeff();
            state_err = std::max(state_err, es);
            adj_err = std::max(adj_err, ((pb - pa).array().abs() / pa.array().abs().max(1e-300)).maxCoeff());
            if (a.state.t < first_event) pre_event_err = std::max(pre_event_err, es);
        }
        c.detail << p << "pre_first_switch_state_rel=" << pre_event_err << "  ";
        c.below((p + "state_rel").c_str(), state_err, 1e-12);
        c.below((p + "adjoint_rel").c_str(), adj_err, 1e-12);
    }
    return c;
}

Check a11() {
    Check c;
    const auto& ds = dataset();
    for (const auto& [label, pt] : {std::pair{"departure", ds.initial}, {"arrival", ds.final_point}}) {
        const auto s = elements_to_state({pt.l_km * 1e3, pt.e, deg_to_rad(pt.f_deg)}, ds.constants);
        const std::string p = std::string(label) + " ";
        c.within_rel((p + "r").c_str(), s.r / 1e3, pt.r_km, 1e-3);
        c.within_rel((p + "v_r").c_str(), s.v_r, pt.vr_ms, 1e-3);
        c.within_rel((p + "v_theta").c_str(), s.v_theta, pt.vtheta_ms, 1e-3);
        const auto el = state_to_elements(pt.r_km * 1e3, pt.vr_ms, pt.vtheta_ms, ds.constants);
        c.within_rel((p + "l").c_str(), el.l / 1e3, pt.l_km, 1e-3);
        c.within_rel((p + "e").c_str(), el.e, pt.e, 1e-3);
        c.within_rel((p + "f").c_str(), rad_to_deg(el.f), pt.f_deg, 1e-3);
    }
    return c;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Check()>>> criteria{
        {"A1", a1}, {"A2", a2}, {"A3", a3}, {"A4", a4}, {"A5", a5},  {"A6", a6},
        {"A7", a7}, {"A8", a8}, {"A9", a9}, {"A10", a10}, {"A11", a11},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        Check c;
        try {
            c = run();
        } catch (const std::exception& e) {
            c.expect(false, std::string("exception: ") + e.what());
        }
        std::printf("%-4s %s  %s\n", name, c.pass ? "PASS" : "FAIL", c.detail.str().c_str());
        std::fflush(stdout);
        if (!c.pass) ++failed;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
