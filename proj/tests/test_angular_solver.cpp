#include <cmath>
#include <numbers>

#include "doctest.h"
#include "frontlab/angular_solver.hpp"
#include "frontlab/errors.hpp"
#include "frontlab/parallel.hpp"

using namespace frontlab;

namespace {

const BistableNonlinearity& cubic() {
    static const BistableNonlinearity f = make_cubic(0.25);
    return f;
}

const WaveProfile& profile() {
    static const WaveProfile p = solve_profile(cubic(), 1e-10);
    return p;
}

SupportShape ellipse(double a, double b, double rotation = 0.0) {
    SupportShape s;
    s.kind = ShapeKind::ellipse;
    s.a = a;
    s.b = b;
    s.rotation = rotation;
    return s;
}

// Field U*(x + shift(theta)) on a window wide enough for the tails to be flat.
template <class Shift>
PolarField synthetic(Shift shift, int J, double t = 200.0) {
    PolarField field;
    field.t = t;
    field.c_star = profile().c_star;
    field.k_shift = 1.0 / field.c_star;
    field.r = RadialGrid{-30.0, 30.0, 0.05}.nodes();
    for (int j = 0; j < J; ++j) field.theta.push_back(2.0 * std::numbers::pi * j / J);
    field.u.resize(field.r.size() * field.theta.size());
    for (std::size_t j = 0; j < field.J(); ++j) {
        for (std::size_t i = 0; i < field.nr(); ++i) {
            field.at(j, i) = profile_eval(profile(), field.r[i] + shift(field.theta[j])).u;
        }
    }
    update_diagnostics(field);
    return field;
}

PolarField advance(PolarField field, int steps, double dt) {
    for (int n = 0; n < steps; ++n) field = step_2d(cubic(), field, dt);
    return field;
}

}  // namespace

TEST_CASE("support shapes: radii and bounding balls") {
    const auto e = ellipse(30.0, 20.0);
    CHECK(support_radius(e, 0.0) == doctest::Approx(30.0));
    CHECK(support_radius(e, std::numbers::pi / 2) == doctest::Approx(20.0));
    CHECK(support_bounds(e) == std::pair{20.0, 30.0});
    CHECK(support_radius(ellipse(30.0, 20.0, 0.4), 0.4) == doctest::Approx(30.0));

    SupportShape star;
    star.kind = ShapeKind::star;
    star.R_bar = 25.0;
    star.eps = 0.1;
    star.m = 3;
    CHECK(support_radius(star, 0.0) == doctest::Approx(27.5));
    CHECK(support_radius(star, std::numbers::pi / 3) == doctest::Approx(22.5));
    const auto [lo, hi] = support_bounds(star);
    CHECK(lo == doctest::Approx(22.5));
    CHECK(hi == doctest::Approx(27.5));
    star.eps = 1.0;
    CHECK_THROWS_AS(support_bounds(star), ParameterError);
    CHECK_THROWS_AS(support_bounds(ellipse(-1.0, 2.0)), ParameterError);
}

TEST_CASE("build_initial_2d: indicator, declared sandwich and window checks") {
    const double c = profile().c_star;
    const PolarGrid grid{10.0, 40.0, 0.05, 32};
    const PolarField f0 = build_initial_2d(ellipse(25.0, 15.0), grid, c);
    CHECK(f0.t == 1.0);
    CHECK(f0.J() == 32);
    const double R = f0.frame_offset();
    for (std::size_t j = 0; j < f0.J(); ++j) {
        const double Rb = support_radius(ellipse(25.0, 15.0), f0.theta[j]);
        for (std::size_t i = 0; i < f0.nr(); ++i) {
            const double rho = f0.r[i] + R;
            if (std::abs(rho - Rb) > 1e-9) CHECK(f0.at(j, i) == (rho < Rb ? 1.0 : 0.0));
        }
    }
    CHECK_NOTHROW(build_initial_2d(ellipse(25.0, 15.0), grid, c, std::nullopt, std::pair{15.0, 25.0}));
    CHECK_THROWS_AS(build_initial_2d(ellipse(25.0, 15.0), grid, c, std::nullopt, std::pair{16.0, 25.0}),
                    ParameterError);
    CHECK_THROWS_AS(build_initial_2d(ellipse(25.0, 15.0), PolarGrid{20.0, 40.0, 0.05, 32}, c), ParameterError);
    CHECK_THROWS_AS(build_initial_2d(ellipse(25.0, 15.0), PolarGrid{10.0, 20.0, 0.05, 32}, c), ParameterError);

    SupportShape smooth = ellipse(25.0, 15.0);
    smooth.smoothing = 2.0;
    const PolarField fs = build_initial_2d(smooth, grid, c);
    for (double v : fs.u) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("step_2d on an angle-independent field reduces to the moving radial step") {
    const double c = profile().c_star;
    PolarField field = build_initial_2d(ellipse(20.0, 20.0), PolarGrid{10.0, 40.0, 0.05, 16}, c);

    RadialState radial;
    radial.frame = Frame::moving;
    radial.t = field.t;
    radial.dim = 2;
    radial.c_star = c;
    radial.k_shift = field.k_shift;
    radial.r = field.r;
    radial.u.assign(field.u.begin(), field.u.begin() + static_cast<std::ptrdiff_t>(field.nr()));

    for (int n = 0; n < 40; ++n) {
        field = step_2d(cubic(), field, 0.05);
        radial = step_moving(cubic(), radial, 0.05);
    }
    double err = 0.0;
    for (std::size_t j = 0; j < field.J(); ++j) {
        for (std::size_t i = 0; i < field.nr(); ++i) err = std::max(err, std::abs(field.at(j, i) - radial.u[i]));
    }
    CHECK(err <= 1e-12);
    CHECK(angular_gradient_max(field) < 1e-8);
}

TEST_CASE("step_2d: ordering, bounds and the dt guard") {
    const double c = profile().c_star;
    const PolarGrid grid{10.0, 45.0, 0.1, 32};
    PolarField lo = build_initial_2d(ellipse(22.0, 14.0), grid, c);
    PolarField hi = build_initial_2d(ellipse(26.0, 16.0, 0.3), grid, c);
    for (std::size_t n = 0; n < lo.u.size(); ++n) lo.u[n] = std::min(lo.u[n], hi.u[n]);

    const double dt = 0.9 * max_stable_dt_2d(cubic(), lo, 20.0);
    lo = advance(lo, 200, dt);
    hi = advance(hi, 200, dt);
    for (std::size_t n = 0; n < lo.u.size(); ++n) {
        CHECK(lo.u[n] <= hi.u[n] + 1e-12);
        CHECK(lo.u[n] >= -1e-8);
        CHECK(hi.u[n] <= 1.0 + 1e-8);
    }

    const double bound = max_stable_dt_2d(cubic(), lo, 1.0);
    CHECK(bound < 1.0 / cubic().f_lipschitz());
    try {
        step_2d(cubic(), lo, 1.5 * bound);
        FAIL("expected a step_size error");
    } catch (const NumericalError& e) {
        CHECK(e.kind() == NumericalError::Kind::step_size);
    }
}

TEST_CASE("angular gradient of a cosine-shifted wave") {
    const PolarField field = synthetic([](double th) { return 0.5 * std::cos(th); }, 256);
    // d/dTheta U*(x + 0.5 cos Theta) = -0.5 sin Theta U*'; max |U*'| = 1 / (4 sqrt 2).
    const double expected = 0.5 / (4.0 * std::sqrt(2.0));
    CHECK(angular_gradient_max(field) == doctest::Approx(expected).epsilon(2e-3));
    for (std::size_t i = 0; i < field.nr(); ++i) {
        const double slope = -profile_eval(profile(), field.r[i] + 0.5).du;
        CHECK(field.V[i] == doctest::Approx(slope).epsilon(1e-3).scale(1e-4));
    }
}

TEST_CASE("extract_angular_shift recovers a sine shift") {
    const PolarField field = synthetic([](double th) { return 0.3 * std::sin(th); }, 128);
    const AngularShift shift = extract_angular_shift(field, 0.5, profile());
    REQUIRE(shift.s_values.size() == 128);
    for (std::size_t j = 0; j < 128; ++j) {
        CHECK(std::abs(shift.s_values[j] - 0.3 * std::sin(field.theta[j])) < 1e-3);
    }
    CHECK(shift.lipschitz_estimate == doctest::Approx(0.3).epsilon(1e-2));
    CHECK(shifted_wave_error(field, shift, profile()) < 1e-3);

    // Slope floor near the front equals the profile slope at the edge of the band.
    const double M = 3.0;
    const double edge = std::min(-profile_eval(profile(), M).du, -profile_eval(profile(), -M).du);
    CHECK(min_slope_near_front(field, shift, M) == doctest::Approx(edge).epsilon(2e-2));
}

TEST_CASE("extract_angular_shift names the angle with a bad crossing") {
    PolarField field = synthetic([](double) { return 0.0; }, 16);
    // Second crossing inside the band on angle 5.
    for (std::size_t i = 0; i < field.nr(); ++i) {
        if (field.r[i] > 5.0 && field.r[i] < 6.0) field.at(5, i) = 0.9;
    }
    try {
        extract_angular_shift(field, 0.5, profile());
        FAIL("expected a tracking error");
    } catch (const NumericalError& e) {
        CHECK(e.kind() == NumericalError::Kind::tracking);
        CHECK(std::string(e.what()).find("angle index 5") != std::string::npos);
    }
}

TEST_CASE("rotating the datum by whole grid angles rotates the solution") {
    const double c = profile().c_star;
    const int J = 32, shift = 4;
    const PolarGrid grid{10.0, 45.0, 0.1, J};
    const double rot = 2.0 * std::numbers::pi * shift / J;
    PolarField a = build_initial_2d(ellipse(24.0, 15.0), grid, c);
    PolarField b = build_initial_2d(ellipse(24.0, 15.0, rot), grid, c);
    const double dt = 0.9 * max_stable_dt_2d(cubic(), a, 5.0);
    a = advance(a, 50, dt);
    b = advance(b, 50, dt);
    double err = 0.0;
    for (std::size_t j = 0; j < a.J(); ++j) {
        const std::size_t jr = (j + shift) % a.J();
        for (std::size_t i = 0; i < a.nr(); ++i) err = std::max(err, std::abs(a.at(j, i) - b.at(jr, i)));
    }
    CHECK(err < 1e-12);
}

TEST_CASE("results do not depend on the worker count") {
    const double c = profile().c_star;
    const PolarGrid grid{10.0, 45.0, 0.1, 24};
    const PolarField start = build_initial_2d(ellipse(24.0, 15.0), grid, c);
    const double dt = 0.9 * max_stable_dt_2d(cubic(), start, 5.0);
    const unsigned saved = thread_count();
    set_thread_count(1);
    const PolarField one = advance(start, 20, dt);
    set_thread_count(3);
    const PolarField three = advance(start, 20, dt);
    set_thread_count(saved);
    CHECK(one.u == three.u);
}

TEST_CASE("parallel_for visits each index once and rethrows") {
    const unsigned saved = thread_count();
    set_thread_count(4);
    std::vector<int> hits(101, 0);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) CHECK(h == 1);
    CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
                        if (i == 7) throw ParameterError("boom");
                    }),
                    ParameterError);
    set_thread_count(saved);
}

TEST_CASE("simulate_polar lands on snapshot times") {
    PolarSimulation sim;
    sim.shape = ellipse(24.0, 15.0);
    sim.dr = 0.1;
    sim.J = 16;
    sim.t_final = 6.0;
    sim.snapshot_times = {2.5, 4.0, 9.0};
    const PolarRun run = simulate_polar(cubic(), profile(), sim);
    REQUIRE(run.snapshots.size() == 3);
    CHECK(run.snapshots[0].t == 2.5);
    CHECK(run.snapshots[1].t == 4.0);
    CHECK(run.snapshots[2].t == 6.0);
    CHECK(run.steps > 0);
    const PolarGrid g = polar_window(sim, profile().c_star);
    CHECK(run.snapshots[0].r.front() == doctest::Approx(g.lo));
    CHECK(run.snapshots[0].V.size() == run.snapshots[0].u.size());
    sim.t_final = 1.0;
    CHECK_THROWS_AS(simulate_polar(cubic(), profile(), sim), ParameterError);
}
