#include <cmath>
#include <sstream>

#include "doctest.h"
#include "primer/integrator.hpp"

using namespace primer;

namespace {

const PhysicalConstants kEarth;
const Vehicle kVehicle{728339.8955, 356.0, 28000.0};

OrbitalState departure() {
    OrbitalState st;
    st.r = 6553.71e3;
    st.v_r = 74.57;
    st.v_theta = 6994.07;
    return st;
}

// Converged kind I coplanar adjoints. The tabulated values (0.003123,
// 0.9999777) are these rounded; at that precision the arrival state moves by
// hundreds of m/s.
const AdjointState kRow0{0.003123568, 0.999977734, -1.0};

// The departure orbit has its perigee near 4408 km, below the default impact
// floor, so pure-coast checks lower the floor.
PropagationOptions kepler_options() {
    PropagationOptions opts;
    opts.force_coast = true;
    opts.r_min = 1000e3;
    return opts;
}

StopCondition arrival_radius() { return {StopVariable::radius, 11595e3, CrossingDirection::increasing, 1}; }
StopCondition at_time(double t) { return {StopVariable::time, t, CrossingDirection::increasing, 1}; }

OrbitalState coast_to(double t_end, double step) {
    PropagationOptions opts = kepler_options();
    opts.step = step;
    opts.record_samples = false;
    return propagate(departure(), kRow0, {}, kVehicle, kEarth, at_time(t_end), opts).final_sample.state;
}

double position_error(const OrbitalState& a, const OrbitalState& b) {
    const double xa = a.r * std::cos(a.theta), ya = a.r * std::sin(a.theta);
    const double xb = b.r * std::cos(b.theta), yb = b.r * std::sin(b.theta);
    return std::hypot(xa - xb, ya - yb);
}

}  // namespace

TEST_SUITE("integrator") {

TEST_CASE("rk4 advances a constant-rate system exactly") {
    Eigen::Vector2d y(10.0, 3.0);
    auto rhs = [](const Eigen::Vector2d& x) { return Eigen::Vector2d(x[1], 0.0); };
    const Eigen::Vector2d next = rk4_step(rhs, y, 0.5);
    CHECK(next[0] == 11.5);
    CHECK(next[1] == 3.0);
}

TEST_CASE("locate_event") {
    auto lin = locate_event([](double t) { return t - 3.5; }, 3.0, 4.0, 1e-9);
    CHECK(std::abs(lin.t - 3.5) <= 1e-9);

    auto cubic = locate_event([](double t) { return t * t * t - 2.0; }, 0.0, 2.0, 1e-12);
    CHECK(cubic.t == doctest::Approx(std::cbrt(2.0)).epsilon(1e-11));

    auto edge = locate_event([](double t) { return t; }, 0.0, 1.0);
    CHECK(edge.t == 0.0);

    CHECK_THROWS_AS(locate_event([](double t) { return t + 1.0; }, 0.0, 1.0), EventError);
    CHECK_THROWS_AS(locate_event([](double t) { return std::sin(t) > 0 ? 1.0 : -1.0; }, -1.0, 2.0, 0.0, 5),
                    EventError);
}

TEST_CASE("stop condition validation") {
    CHECK_THROWS_AS((StopCondition{StopVariable::radius, -1.0, CrossingDirection::increasing, 1}.validate()),
                    DomainError);
    CHECK_THROWS_AS((StopCondition{StopVariable::time, NAN, CrossingDirection::increasing, 1}.validate()),
                    DomainError);
    CHECK_THROWS_AS((StopCondition{StopVariable::time, 10.0, CrossingDirection::increasing, 0}.validate()),
                    DomainError);
    CHECK_NOTHROW(arrival_radius().validate());
}

TEST_CASE("coast conserves energy and angular momentum") {
    const PropagationOptions opts = kepler_options();
    const auto run = propagate(departure(), kRow0, {}, kVehicle, kEarth, at_time(3000.0), opts);
    const auto& s0 = run.samples.front().state;
    const double e0 = s0.specific_energy(kEarth), h0 = s0.angular_momentum();
    double e_drift = 0.0, h_drift = 0.0;
    for (const auto& s : run.samples) {
        e_drift = std::max(e_drift, std::abs(s.state.specific_energy(kEarth) / e0 - 1.0));
        h_drift = std::max(h_drift, std::abs(s.state.angular_momentum() / h0 - 1.0));
    }
    CHECK(e_drift < 1e-7);
    CHECK(h_drift < 1e-7);
    CHECK(run.schedule.total_dv() == 0.0);
}

TEST_CASE("rk4 global error is fourth order") {
    // At h = 1 s the truncation error over a short coast is below roundoff,
    // so the order is measured with coarse steps.
    const auto ref = coast_to(1000.0, 2.5);
    const double e1 = position_error(coast_to(1000.0, 20.0), ref);
    const double e2 = position_error(coast_to(1000.0, 10.0), ref);
    MESSAGE("h=20 error " << e1 << " m, h=10 error " << e2 << " m");
    const double ratio = e1 / e2;
    CHECK(ratio > 12.0);
    CHECK(ratio < 20.0);
}

TEST_CASE("engine-off run with zero adjoints") {
    const auto run = propagate(departure(), {0.0, 0.0, -1.0}, {}, kVehicle, kEarth, at_time(100.0));
    CHECK(run.samples.size() == 101);
    REQUIRE(run.schedule.arcs.size() == 1);
    CHECK(run.schedule.arcs[0].type == ArcType::coast);
    CHECK(run.final_sample.state.dv == 0.0);
    CHECK(run.final_sample.state.t == doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("tabulated parameters give a two-burn transfer") {
    const auto run = propagate(departure(), {0.003123, 0.9999777, -1.0}, {}, kVehicle, kEarth, arrival_radius());
    CHECK(run.schedule.burn_dvs().size() == 2);
    CHECK(run.samples.front().primer.kappa == doctest::Approx(-1.74e-5).epsilon(0.01));
    CHECK(std::abs(run.final_sample.state.r - 11595e3) < 1e-3);
}

TEST_CASE("two-burn transfer from converged parameters") {
    const auto run = propagate(departure(), kRow0, {}, kVehicle, kEarth, arrival_radius());
    const auto& sched = run.schedule;
    const auto burns = sched.burn_dvs();
    REQUIRE(burns.size() == 2);
    CHECK(sched.arcs.front().type == ArcType::coast);
    CHECK(run.samples.front().primer.kappa < 0.0);
    CHECK(sched.total_dv() == doctest::Approx(3795.94).epsilon(4.0 / 3795.94));
    CHECK(run.final_sample.state.t == doctest::Approx(2242.29).epsilon(10.0 / 2242.29));
    CHECK(rad_to_deg(run.final_sample.state.theta) == doctest::Approx(116.70).epsilon(0.2 / 116.70));
    CHECK(std::abs(run.final_sample.state.r - 11595e3) < 1e-3);

    SUBCASE("first ignition is located just after departure") {
        const double t_on = sched.arcs.front().t_end;
        CHECK(t_on > 0.0);
        CHECK(t_on < 10.0);
    }
    SUBCASE("switching function vanishes at every interior boundary") {
        for (const double t : sched.switch_times()) {
            bool found = false;
            for (const auto& s : run.samples) {
                if (s.state.t == t) {
                    CHECK(std::abs(s.primer.kappa) < 1e-9);
                    found = true;
                }
            }
            CHECK(found);
        }
    }
    SUBCASE("arcs tile the transfer and dv accrues only while burning") {
        double dv = 0.0;
        for (std::size_t i = 0; i < sched.arcs.size(); ++i) {
            if (i > 0) CHECK(sched.arcs[i].t_start == sched.arcs[i - 1].t_end);
            if (sched.arcs[i].type == ArcType::coast) CHECK(sched.arcs[i].dv == 0.0);
            dv += sched.arcs[i].dv;
        }
        CHECK(sched.arcs.front().t_start == 0.0);
        CHECK(sched.arcs.back().t_end == run.final_sample.state.t);
        CHECK(std::abs(dv - run.final_sample.state.dv) <= 1e-9 * run.final_sample.state.dv);
    }
    SUBCASE("samples are one step apart except at events") {
        for (std::size_t i = 1; i < run.samples.size(); ++i) {
            CHECK(run.samples[i].state.t - run.samples[i - 1].state.t <= 1.0 + 1e-9);
        }
    }
}

TEST_CASE("propagation is deterministic") {
    const auto a = propagate(departure(), kRow0, {}, kVehicle, kEarth, arrival_radius());
    const auto b = propagate(departure(), kRow0, {}, kVehicle, kEarth, arrival_radius());
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        CHECK(pack(a.samples[i].state, a.samples[i].adjoint) == pack(b.samples[i].state, b.samples[i].adjoint));
        CHECK(a.samples[i].state.t == b.samples[i].state.t);
    }
}

TEST_CASE("stop exactness for every stop variable") {
    const auto by_time = propagate(departure(), kRow0, {}, kVehicle, kEarth, at_time(1234.5));
    CHECK(std::abs(by_time.final_sample.state.t - 1234.5) < 1e-6);

    const StopCondition angle{StopVariable::angle, deg_to_rad(100.0), CrossingDirection::increasing, 1};
    const auto by_angle = propagate(departure(), kRow0, {}, kVehicle, kEarth, angle);
    CHECK(std::abs(by_angle.final_sample.state.theta - deg_to_rad(100.0)) < 1e-8);

    const StopCondition dv{StopVariable::delta_v, 3000.0, CrossingDirection::increasing, 1};
    const auto by_dv = propagate(departure(), kRow0, {}, kVehicle, kEarth, dv);
    CHECK(std::abs(by_dv.final_sample.state.dv - 3000.0) < 1e-4);
}

TEST_CASE("second radius crossing") {
    const PropagationOptions opts = kepler_options();
    const StopCondition first{StopVariable::radius, 6000e3, CrossingDirection::any, 1};
    const StopCondition second{StopVariable::radius, 6000e3, CrossingDirection::any, 2};
    const auto a = propagate(departure(), kRow0, {}, kVehicle, kEarth, first, opts);
    const auto b = propagate(departure(), kRow0, {}, kVehicle, kEarth, second, opts);
    CHECK(a.final_sample.state.v_r < 0.0);
    CHECK(b.final_sample.state.v_r > 0.0);
    CHECK(b.final_sample.state.t > a.final_sample.state.t);
    CHECK(b.final_sample.state.r == doctest::Approx(6000e3).epsilon(1e-9));
}

TEST_CASE("propagation failures") {
    PropagationOptions opts = kepler_options();
    SUBCASE("target below perigee is never reached") {
        const StopCondition below{StopVariable::radius, 4000e3, CrossingDirection::decreasing, 1};
        try {
            propagate(departure(), kRow0, {}, kVehicle, kEarth, below, opts);
            FAIL("expected a propagation error");
        } catch (const PropagationError& e) {
            CHECK(e.reason() == PropagationError::Reason::stop_not_met);
        }
    }
    SUBCASE("falling trajectory impacts") {
        opts.r_min = 0.9 * 6378e3;
        OrbitalState st;
        st.r = 6600e3;
        st.v_r = -3000.0;
        st.v_theta = 1000.0;
        try {
            propagate(st, kRow0, {}, kVehicle, kEarth, at_time(5000.0), opts);
            FAIL("expected a propagation error");
        } catch (const PropagationError& e) {
            CHECK(e.reason() == PropagationError::Reason::impact);
        }
    }
}

TEST_CASE("trajectory csv") {
    const auto run = propagate(departure(), {0.0, 0.0, -1.0}, {}, kVehicle, kEarth, at_time(3.0));
    std::ostringstream os;
    write_trajectory_csv(os, run.samples);
    std::istringstream in(os.str());
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,r,vr,vtheta,theta,chi,dv,lambda,mu,nu,psi_dv,p,kappa,engine");
    int rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == 4);
}

}
