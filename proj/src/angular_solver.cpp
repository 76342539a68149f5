#include "frontlab/angular_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "column_ops.hpp"
#include "frontlab/errors.hpp"
#include "frontlab/front_history.hpp"
#include "frontlab/parallel.hpp"

namespace frontlab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::size_t wrap(std::ptrdiff_t j, std::size_t J) {
    const auto n = static_cast<std::ptrdiff_t>(J);
    return static_cast<std::size_t>(((j % n) + n) % n);
}

struct PolarWorkspace {
    std::vector<double> kappa, drift, extra, work;
};

void check_dt_2d(const BistableNonlinearity& f, const PolarField& field, double dt) {
    const double bound = max_stable_dt_2d(f, field, dt);
    if (!(dt > 0.0) || dt > bound * (1.0 + 1e-12)) {
        throw NumericalError(NumericalError::Kind::step_size,
                             "dt = " + std::to_string(dt) + " violates the 2D monotonicity bound " + std::to_string(bound));
    }
}

// Advances `in` by dt into `out` (same shape); diagnostics are left untouched.
void advance(const BistableNonlinearity& f, const PolarField& in, PolarField& out, double dt, PolarWorkspace& ws) {
    check_dt_2d(f, in, dt);
    const std::size_t nr = in.nr(), J = in.J();
    const double R_now = in.frame_offset();
    const double t_mid = in.t + 0.5 * dt;
    const double inv_dth2 = 1.0 / (in.dtheta() * in.dtheta());
    ws.kappa.resize(nr);
    ws.drift.resize(nr);
    for (std::size_t i = 0; i < nr; ++i) {
        const double rho = in.r[i] + R_now;
        ws.kappa[i] = inv_dth2 / (rho * rho);
        ws.drift[i] = moving_drift(in.r[i], t_mid, 2, in.c_star, in.k_shift);
    }
    const detail::ColumnOperator op = detail::moving_operator(ws.drift, in.dr(), dt);
    ws.extra.resize(nr * J);
    ws.work.resize(nr * J);
    out.u.resize(in.u.size());

    parallel_for(J, [&](std::size_t j) {
        const double* up = &in.u[wrap(static_cast<std::ptrdiff_t>(j) + 1, J) * nr];
        const double* um = &in.u[wrap(static_cast<std::ptrdiff_t>(j) - 1, J) * nr];
        const double* uc = &in.u[j * nr];
        double* extra = &ws.extra[j * nr];
        for (std::size_t i = 0; i < nr; ++i) extra[i] = ws.kappa[i] * (up[i] - 2.0 * uc[i] + um[i]);
        std::span<double> col(&out.u[j * nr], nr);
        detail::column_step(op, f, std::span<const double>(uc, nr), std::span<const double>(extra, nr), dt, 1.0, 0.0,
                            col, std::span<double>(&ws.work[j * nr], nr));
        detail::clamp_and_check(col);
    });
    out.t = in.t + dt;
}

}  // namespace

double PolarField::frame_offset() const { return frontlab::frame_offset(c_star, k_shift, t); }

void update_diagnostics(PolarField& field) {
    const std::size_t nr = field.nr(), J = field.J();
    const double dr = field.dr(), dth = field.dtheta();
    field.V.assign(nr * J, 0.0);
    field.u_theta.assign(nr * J, 0.0);
    field.u_thetatheta.assign(nr * J, 0.0);
    for (std::size_t j = 0; j < J; ++j) {
        const std::size_t jp = wrap(static_cast<std::ptrdiff_t>(j) + 1, J);
        const std::size_t jm = wrap(static_cast<std::ptrdiff_t>(j) - 1, J);
        for (std::size_t i = 0; i < nr; ++i) {
            const std::size_t k = j * nr + i;
            double du;
            if (i == 0) {
                du = (field.at(j, 1) - field.at(j, 0)) / dr;
            } else if (i + 1 == nr) {
                du = (field.at(j, i) - field.at(j, i - 1)) / dr;
            } else {
                du = (field.at(j, i + 1) - field.at(j, i - 1)) / (2.0 * dr);
            }
            field.V[k] = -du;
            field.u_theta[k] = (field.at(jp, i) - field.at(jm, i)) / (2.0 * dth);
            field.u_thetatheta[k] = (field.at(jp, i) - 2.0 * field.at(j, i) + field.at(jm, i)) / (dth * dth);
        }
    }
}

double support_radius(const SupportShape& shape, double theta) {
    const double phi = theta - shape.rotation;
    if (shape.kind == ShapeKind::ellipse) {
        const double c = std::cos(phi), s = std::sin(phi);
        return shape.a * shape.b / std::sqrt(shape.b * shape.b * c * c + shape.a * shape.a * s * s);
    }
    return shape.R_bar * (1.0 + shape.eps * std::cos(shape.m * phi));
}

std::pair<double, double> support_bounds(const SupportShape& shape) {
    if (shape.kind == ShapeKind::ellipse) {
        if (!(shape.a > 0.0 && shape.b > 0.0)) throw ParameterError("ellipse semi-axes must be positive");
        return {std::min(shape.a, shape.b), std::max(shape.a, shape.b)};
    }
    if (!(shape.R_bar > 0.0)) throw ParameterError("star mean radius must be positive");
    if (!(shape.eps >= 0.0 && shape.eps < 1.0)) throw ParameterError("star amplitude eps must lie in [0, 1)");
    if (shape.m < 0) throw ParameterError("star mode m must be non-negative");
    return {shape.R_bar * (1.0 - shape.eps), shape.R_bar * (1.0 + shape.eps)};
}

PolarField build_initial_2d(const SupportShape& shape, const PolarGrid& grid, double c_star, std::optional<double> k,
                            std::optional<std::pair<double, double>> declared) {
    const auto [R1, R2] = support_bounds(shape);
    if (declared) {
        if (!(declared->first <= R1 + 1e-12 && declared->second >= R2 - 1e-12)) {
            throw ParameterError("support is not sandwiched between the declared balls: needs R1 <= " +
                                 std::to_string(R1) + " and R2 >= " + std::to_string(R2));
        }
    }
    if (grid.J < 8) throw ParameterError("need at least 8 angles");
    if (!(c_star > 0.0)) throw ParameterError("c_star must be positive");
    if (!(shape.smoothing >= 0.0)) throw ParameterError("smoothing width must be non-negative");

    PolarField field;
    field.t = 1.0;
    field.c_star = c_star;
    field.k_shift = k.value_or(1.0 / c_star);
    field.r = RadialGrid{grid.lo, grid.hi, grid.dr}.nodes();
    const auto J = static_cast<std::size_t>(grid.J);
    field.theta.resize(J);
    for (std::size_t j = 0; j < J; ++j) field.theta[j] = kTwoPi * static_cast<double>(j) / static_cast<double>(J);

    const double offset = field.frame_offset();
    const double inner = field.r.front() + offset, outer = field.r.back() + offset;
    if (!(inner > 0.0 && inner < R1)) throw ParameterError("window left edge must have lab radius in (0, R1) at t = 1");
    if (!(outer > R2)) throw ParameterError("window does not reach beyond the support");

    const std::size_t nr = field.nr();
    field.u.resize(nr * J);
    for (std::size_t j = 0; j < J; ++j) {
        const double Rb = support_radius(shape, field.theta[j]);
        for (std::size_t i = 0; i < nr; ++i) {
            const double rho = field.r[i] + offset;
            double v;
            if (shape.smoothing > 0.0) {
                v = rho < R1 ? 1.0 : rho > R2 ? 0.0 : 0.5 * (1.0 - std::tanh((rho - Rb) / shape.smoothing));
            } else if (std::abs(rho - Rb) <= 1e-12 * Rb) {
                v = 0.5;
            } else {
                v = rho < Rb ? 1.0 : 0.0;
            }
            field.at(j, i) = v;
        }
        field.at(j, 0) = 1.0;
        field.at(j, nr - 1) = 0.0;
    }
    update_diagnostics(field);
    return field;
}

double max_stable_dt_2d(const BistableNonlinearity& f, const PolarField& field, double horizon) {
    const double rho = detail::min_window_radius(field.r.front(), field.c_star, field.k_shift, field.t, field.t + horizon);
    if (!(rho > 0.0)) {
        throw NumericalError(NumericalError::Kind::domain,
                             "polar window left edge reaches lab radius " + std::to_string(rho) + " near t = " +
                                 std::to_string(field.t));
    }
    const double dth = field.dtheta();
    return 1.0 / (f.f_lipschitz() + 2.0 / (rho * rho * dth * dth));
}

PolarField step_2d(const BistableNonlinearity& f, const PolarField& field, double dt) {
    PolarField out;
    out.r = field.r;
    out.theta = field.theta;
    out.c_star = field.c_star;
    out.k_shift = field.k_shift;
    PolarWorkspace ws;
    advance(f, field, out, dt, ws);
    update_diagnostics(out);
    return out;
}

double angular_gradient_max(const PolarField& field) {
    const double cut = -0.5 * field.c_star * field.t;
    double m = 0.0;
    for (std::size_t j = 0; j < field.J(); ++j) {
        for (std::size_t i = 0; i < field.nr(); ++i) {
            if (field.r[i] >= cut) m = std::max(m, std::abs(field.u_theta[j * field.nr() + i]));
        }
    }
    return m;
}

AngularShift extract_angular_shift(const PolarField& field, double level, const WaveProfile& profile, double band) {
    const std::size_t nr = field.nr(), J = field.J();
    std::vector<double> mean(nr, 0.0);
    for (std::size_t i = 0; i < nr; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < J; ++j) s += field.at(j, i);
        mean[i] = s / static_cast<double>(J);
    }
    AngularShift out;
    out.level = level;
    out.theta = field.theta;
    out.band_center = track_level_set(field.r, mean, level);
    const double x_lo = out.band_center - band, x_hi = out.band_center + band;
    std::size_t first = 0, last = nr - 1;
    while (first + 1 < nr && field.r[first] < x_lo) ++first;
    while (last > first && field.r[last] > x_hi) --last;

    const double target = profile_inverse(profile, level);
    out.s_values.resize(J);
    for (std::size_t j = 0; j < J; ++j) {
        std::span<const double> col(&field.u[j * nr], nr);
        double x;
        try {
            x = track_level_set(field.r, col, level, first, last);
        } catch (const NumericalError& e) {
            throw NumericalError(NumericalError::Kind::tracking,
                                 "angle index " + std::to_string(j) + " (theta = " + std::to_string(field.theta[j]) +
                                     "): " + e.what());
        }
        out.s_values[j] = target - x;
    }
    const double dth = field.dtheta();
    for (std::size_t j = 0; j < J; ++j) {
        const double ds = out.s_values[wrap(static_cast<std::ptrdiff_t>(j) + 1, J)] - out.s_values[j];
        out.lipschitz_estimate = std::max(out.lipschitz_estimate, std::abs(ds) / dth);
    }
    return out;
}

double shifted_wave_error(const PolarField& field, const AngularShift& shift, const WaveProfile& profile) {
    double m = 0.0;
    for (std::size_t j = 0; j < field.J(); ++j) {
        for (std::size_t i = 0; i < field.nr(); ++i) {
            m = std::max(m, std::abs(field.at(j, i) - profile_eval(profile, field.r[i] + shift.s_values[j]).u));
        }
    }
    return m;
}

double min_slope_near_front(const PolarField& field, const AngularShift& shift, double M) {
    double m = INFINITY;
    for (std::size_t j = 0; j < field.J(); ++j) {
        for (std::size_t i = 0; i < field.nr(); ++i) {
            if (std::abs(field.r[i] + shift.s_values[j]) <= M) m = std::min(m, field.V[j * field.nr() + i]);
        }
    }
    return m;
}

PolarGrid polar_window(const PolarSimulation& sim, double c_star) {
    const auto [R1, R2] = support_bounds(sim.shape);
    const double R_start = frame_offset(c_star, sim.k.value_or(1.0 / c_star), 1.0);
    PolarGrid g;
    g.dr = sim.dr;
    g.J = sim.J;
    g.lo = sim.window_lo.value_or(std::round((0.5 * R1 - R_start) / sim.dr) * sim.dr);
    g.hi = sim.window_hi.value_or(std::max(60.0, std::round((R2 - R_start + 40.0) / sim.dr) * sim.dr));
    return g;
}

PolarRun simulate_polar(const BistableNonlinearity& f, const WaveProfile& profile, const PolarSimulation& sim) {
    if (!(sim.t_final > 1.0)) throw ParameterError("t_final must exceed the start time 1");
    if (!(sim.dt_max > 0.0)) throw ParameterError("dt_max must be positive");
    PolarField field = build_initial_2d(sim.shape, polar_window(sim, profile.c_star), profile.c_star, sim.k);

    std::vector<double> targets;
    for (double ts : sim.snapshot_times) {
        if (ts > 1.0 && ts < sim.t_final) targets.push_back(ts);
    }
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
    targets.push_back(sim.t_final);

    PolarRun out;
    PolarField next = field;
    PolarWorkspace ws;
    for (double target : targets) {
        while (field.t < target) {
            double h = std::min(sim.dt_max, 0.9 * max_stable_dt_2d(f, field, sim.dt_max));
            if (target - field.t <= h * (1.0 + 1e-9)) h = target - field.t;
            advance(f, field, next, h, ws);
            std::swap(field.u, next.u);
            field.t = next.t;
            if (std::abs(field.t - target) < 1e-9) field.t = target;
            ++out.steps;
        }
        update_diagnostics(field);
        if (sim.on_snapshot) sim.on_snapshot(field);
        if (sim.keep_snapshots || target == targets.back()) out.snapshots.push_back(field);
    }
    return out;
}

}  // namespace frontlab
