#include "frontlab/radial_solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "column_ops.hpp"
#include "frontlab/errors.hpp"

namespace frontlab {

namespace {

std::size_t node_count(double lo, double hi, double dr) {
    if (!(dr > 0.0) || !(hi > lo)) throw ParameterError("grid needs dr > 0 and hi > lo");
    const double cells = std::round((hi - lo) / dr);
    if (cells < 3) throw ParameterError("grid needs at least 4 nodes");
    return static_cast<std::size_t>(cells) + 1;
}

void check_dt(const BistableNonlinearity& f, double dt) {
    const double bound = max_stable_dt(f);
    if (!(dt > 0.0) || dt > bound * (1.0 + 1e-12)) {
        throw NumericalError(NumericalError::Kind::step_size,
                             "dt = " + std::to_string(dt) + " violates the monotonicity bound " + std::to_string(bound));
    }
}

// Reusable workspace for repeated steps of one state.
class Stepper {
public:
    explicit Stepper(const BistableNonlinearity& f) : f_(f) {}

    void step(RadialState& s, double dt) {
        check_dt(f_, dt);
        const std::size_t n = s.u.size();
        next_.resize(n);
        work_.resize(n);
        if (s.frame == Frame::lab) {
            if (cached_dt_ != dt || op_.n != n || cached_dim_ != s.dim) {
                op_ = detail::lab_operator(s.dim, s.dr(), n, dt);
                cached_dt_ = dt;
                cached_dim_ = s.dim;
            }
            detail::column_step(op_, f_, s.u, {}, dt, 0.0, 0.0, next_, work_);
        } else {
            const double left = detail::min_window_radius(s.r.front(), s.c_star, s.k_shift, s.t, s.t + dt);
            if (!(left > 0.0)) {
                throw NumericalError(NumericalError::Kind::domain,
                                     "moving window left edge reaches lab radius " + std::to_string(left) +
                                         " at t = " + std::to_string(s.t));
            }
            const double t_mid = s.t + 0.5 * dt;
            drift_.resize(n);
            for (std::size_t i = 0; i < n; ++i) drift_[i] = moving_drift(s.r[i], t_mid, s.dim, s.c_star, s.k_shift);
            op_ = detail::moving_operator(drift_, s.dr(), dt);
            cached_dt_ = -1.0;
            detail::column_step(op_, f_, s.u, {}, dt, 1.0, 0.0, next_, work_);
        }
        detail::clamp_and_check(next_);
        s.u.swap(next_);
        s.t += dt;
    }

private:
    const BistableNonlinearity& f_;
    detail::ColumnOperator op_;
    double cached_dt_ = -1.0;
    int cached_dim_ = 0;
    std::vector<double> next_, work_, drift_;
};

}  // namespace

std::vector<double> RadialGrid::nodes() const {
    const std::size_t n = node_count(lo, hi, dr);
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = lo + static_cast<double>(i) * dr;
    return x;
}

double RadialState::frame_offset() const { return frontlab::frame_offset(c_star, k_shift, t); }

double frame_offset(double c_star, double k, double t) { return c_star * t - k * std::log(t); }

double curvature_drift(double x, double t, int dim, double c_star, double k) {
    return (dim - 1) / (x + frame_offset(c_star, k, t)) - k / t;
}

double moving_drift(double x, double t, int dim, double c_star, double k) {
    return c_star + curvature_drift(x, t, dim, c_star, k);
}

RadialState build_initial(const InitialDatum& datum, const RadialGrid& grid, const FrameSpec& frame,
                          const WaveProfile* profile) {
    if (!(datum.r1 > 0.0)) throw ParameterError("inner radius must be positive");
    if (datum.kind == DatumKind::ball_indicator ? datum.r1 > datum.r2 : datum.r1 >= datum.r2) {
        throw ParameterError("need r1 < r2 (r1 == r2 allowed for ball_indicator)");
    }
    if (datum.kind == DatumKind::smoothed_ball && !(datum.width > 0.0)) {
        throw ParameterError("smoothing width must be positive");
    }
    if (datum.kind == DatumKind::profile_cap && profile == nullptr) {
        throw ParameterError("profile_cap needs the wave profile");
    }
    if (frame.dim < 1) throw ParameterError("dimension must be >= 1");
    if (!(frame.c_star > 0.0)) throw ParameterError("c_star must be positive");
    if (frame.frame == Frame::lab && grid.lo != 0.0) throw ParameterError("lab grid must start at r = 0");

    RadialState s;
    s.frame = frame.frame;
    s.t = 1.0;
    s.dim = frame.dim;
    s.c_star = frame.c_star;
    s.k_shift = frame.k_shift();
    s.r = grid.nodes();
    s.u.resize(s.r.size());

    const double offset = s.frame == Frame::moving ? s.frame_offset() : 0.0;
    const double inner = s.r.front() + offset;
    const double outer = s.r.back() + offset;
    if (s.frame == Frame::moving && !(inner > 0.0 && inner < datum.r1)) {
        throw ParameterError("moving window left edge must have lab radius in (0, r1) at t = 1");
    }
    if (!(outer > datum.r2)) throw ParameterError("grid does not reach beyond the outer radius r2");

    const double mid = 0.5 * (datum.r1 + datum.r2);
    for (std::size_t i = 0; i < s.r.size(); ++i) {
        const double rho = s.r[i] + offset;
        double v = 0.0;
        switch (datum.kind) {
            case DatumKind::ball_indicator:
                if (std::abs(rho - mid) <= 1e-12 * mid) {
                    v = 0.5;
                } else {
                    v = rho < mid ? 1.0 : 0.0;
                }
                break;
            case DatumKind::smoothed_ball:
                v = rho <= datum.r1 ? 1.0 : rho >= datum.r2 ? 0.0 : 0.5 * (1.0 - std::tanh((rho - mid) / datum.width));
                break;
            case DatumKind::profile_cap:
                v = rho < datum.r1 ? 1.0 : rho > datum.r2 ? 0.0 : profile_eval(*profile, rho - mid).u;
                break;
        }
        s.u[i] = v;
    }
    if (s.frame == Frame::moving) {
        s.u.front() = 1.0;
        s.u.back() = 0.0;
    }
    return s;
}

double max_stable_dt(const BistableNonlinearity& f) { return 1.0 / f.f_lipschitz(); }

RadialState step_lab(const BistableNonlinearity& f, const RadialState& state, double dt) {
    if (state.frame != Frame::lab) throw ParameterError("step_lab needs a lab-frame state");
    RadialState next = state;
    Stepper(f).step(next, dt);
    return next;
}

RadialState step_moving(const BistableNonlinearity& f, const RadialState& state, double dt) {
    if (state.frame != Frame::moving) throw ParameterError("step_moving needs a moving-frame state");
    if (state.t < 1.0) throw ParameterError("moving frame is defined for t >= 1");
    RadialState next = state;
    Stepper(f).step(next, dt);
    return next;
}

RadialRun run(const BistableNonlinearity& f, const RadialState& state, double t_final,
              const std::vector<double>& snapshot_times, double dt, double level) {
    if (t_final < state.t) throw ParameterError("t_final precedes the state time");
    RadialRun out;
    out.history.level = level;
    auto record = [&](const RadialState& s) {
        out.snapshots.push_back(s);
        const double x = track_level_set(s.r, s.u, level);
        out.history.push(s.t, s.frame == Frame::moving ? x + s.frame_offset() : x);
    };
    if (t_final == state.t) {
        record(state);
        return out;
    }
    check_dt(f, dt);

    std::vector<double> targets;
    for (double ts : snapshot_times) {
        if (ts > state.t && ts < t_final) targets.push_back(ts);
    }
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
    targets.push_back(t_final);

    RadialState s = state;
    Stepper stepper(f);
    for (double target : targets) {
        while (s.t < target) {
            double h = std::min(dt, target - s.t);
            if (target - s.t - h < 1e-9 * dt) h = target - s.t;
            stepper.step(s, h);
            if (std::abs(s.t - target) < 1e-9 * dt) s.t = target;
        }
        record(s);
    }
    return out;
}

RadialState remap_to_moving(const RadialState& lab, double window_lo, double window_hi, double dr, double k) {
    if (lab.frame != Frame::lab) throw ParameterError("remap_to_moving needs a lab-frame state");
    RadialState s;
    s.frame = Frame::moving;
    s.t = lab.t;
    s.dim = lab.dim;
    s.c_star = lab.c_star;
    s.k_shift = k;
    s.r = RadialGrid{window_lo, window_hi, dr}.nodes();
    s.u.resize(s.r.size());
    const double offset = s.frame_offset();
    const double lab_dr = lab.dr();
    for (std::size_t i = 0; i < s.r.size(); ++i) {
        const double rho = s.r[i] + offset;
        if (!(rho > 0.0)) {
            throw NumericalError(NumericalError::Kind::domain, "window node at non-positive lab radius during remap");
        }
        const double pos = rho / lab_dr;
        const auto j = static_cast<std::size_t>(pos);
        if (j + 1 >= lab.u.size()) {
            s.u[i] = 0.0;
            continue;
        }
        const double w = pos - static_cast<double>(j);
        s.u[i] = (1.0 - w) * lab.u[j] + w * lab.u[j + 1];
    }
    if (s.u.front() < 1.0 - 1e-3 || s.u.back() > 1e-3) {
        throw NumericalError(NumericalError::Kind::domain,
                             "front is not inside the moving window at the frame switch (t = " + std::to_string(s.t) + ")");
    }
    s.u.front() = 1.0;
    s.u.back() = 0.0;
    return s;
}

RadialSimulationResult simulate_radial(const BistableNonlinearity& f, const RadialSimulation& sim,
                                       const WaveProfile* profile) {
    const double c = sim.frame.c_star;
    const double k = sim.frame.k_shift();
    RadialSimulationResult out;

    auto lab_run = [&](double t_end, const std::vector<double>& snaps) {
        FrameSpec lab = sim.frame;
        lab.frame = Frame::lab;
        const double reach = std::max(sim.datum.r2 + c * (t_end - 1.0),
                                      sim.frame.frame == Frame::moving ? sim.window_hi + frame_offset(c, k, t_end) : 0.0);
        const RadialGrid grid{0.0, std::ceil((reach + sim.lab_margin) / sim.dr) * sim.dr, sim.dr};
        return run(f, build_initial(sim.datum, grid, lab, profile), t_end, snaps, sim.dt, sim.level);
    };

    if (sim.frame.frame == Frame::lab) {
        out.run = lab_run(sim.t_final, sim.snapshot_times);
        out.switch_time = sim.t_final;
        return out;
    }

    if (detail::min_window_radius(sim.window_lo, c, k, 1.0, sim.t_final) >= sim.min_radius &&
        sim.window_lo + frame_offset(c, k, 1.0) < sim.datum.r1) {
        const RadialGrid grid{sim.window_lo, sim.window_hi, sim.dr};
        out.run = run(f, build_initial(sim.datum, grid, sim.frame, profile), sim.t_final, sim.snapshot_times,
                      sim.dt, sim.level);
        out.switch_time = 1.0;
        return out;
    }

    // Switch when R(t) first reaches a grid multiple with the left edge at radius >= min_radius,
    // on the increasing branch of R so that it stays there.
    const double t0 = std::max(1.0, k > 0.0 ? k / c : 1.0);
    const double need = std::max(sim.min_radius - sim.window_lo, frame_offset(c, k, t0));
    const double target = std::ceil(need / sim.dr) * sim.dr;
    double lo = t0, hi = 2.0 * t0;
    while (frame_offset(c, k, hi) < target) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (frame_offset(c, k, mid) < target ? lo : hi) = mid;
    }
    const double t_switch = hi;
    if (t_switch >= sim.t_final) {
        out.run = lab_run(sim.t_final, sim.snapshot_times);
        out.switch_time = sim.t_final;
        return out;
    }

    std::vector<double> early, late;
    for (double ts : sim.snapshot_times) (ts <= t_switch ? early : late).push_back(ts);
    RadialRun first = lab_run(t_switch, early);
    const bool keep_switch = std::find(early.begin(), early.end(), t_switch) != early.end();
    const RadialState lab_final = first.snapshots.back();
    if (!keep_switch) {
        first.snapshots.pop_back();
        first.history.times.pop_back();
        first.history.positions.pop_back();
    }
    const RadialState moving = remap_to_moving(lab_final, sim.window_lo, sim.window_hi, sim.dr, k);
    RadialRun second = run(f, moving, sim.t_final, late, sim.dt, sim.level);

    out.run = std::move(first);
    for (auto& s : second.snapshots) out.run.snapshots.push_back(std::move(s));
    for (std::size_t i = 0; i < second.history.size(); ++i) {
        out.run.history.push(second.history.times[i], second.history.positions[i]);
    }
    out.switch_time = t_switch;
    return out;
}

}  // namespace frontlab
