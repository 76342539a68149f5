#include "frontlab/front_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "frontlab/errors.hpp"
#include "frontlab/front_history.hpp"

namespace frontlab {

double track_level_set(std::span<const double> grid, std::span<const double> u, double level) {
    return track_level_set(grid, u, level, 0, u.size() - 1);
}

double track_level_set(std::span<const double> grid, std::span<const double> u, double level, std::size_t first,
                       std::size_t last) {
    if (grid.size() != u.size() || u.size() < 2 || last >= u.size() || first >= last) {
        throw ParameterError("track_level_set: bad grid or search band");
    }
    int crossings = 0;
    double position = 0.0;
    for (std::size_t i = first; i < last; ++i) {
        const bool above_here = u[i] >= level;
        const bool above_next = u[i + 1] >= level;
        if (above_here == above_next) continue;
        ++crossings;
        if (u[i] == level) {
            position = grid[i];
        } else if (u[i + 1] == level) {
            position = grid[i + 1];
        } else {
            const double w = (u[i] - level) / (u[i] - u[i + 1]);
            position = grid[i] + w * (grid[i + 1] - grid[i]);
        }
    }
    if (crossings != 1) {
        throw NumericalError(NumericalError::Kind::tracking,
                             std::to_string(crossings) + " crossings of level " + std::to_string(level) + " in the search band");
    }
    return position;
}

// ---------------------------------------------------------------------------------------
// Fits, drift and the radial squeeze.

std::string to_string(FitMode mode) {
    switch (mode) {
        case FitMode::full: return "full";
        case FitMode::fixed_speed: return "fixed_speed";
        case FitMode::offset_only: return "offset_only";
    }
    return "full";
}

FitMode fit_mode_from_string(const std::string& name) {
    if (name == "full") return FitMode::full;
    if (name == "fixed_speed") return FitMode::fixed_speed;
    if (name == "offset_only") return FitMode::offset_only;
    throw ParameterError("unknown fit mode '" + name + "' (full | fixed_speed | offset_only)");
}

FrontFit fit_log_shift(const FrontHistory& h, FitMode mode, std::optional<double> c_star, std::optional<double> window_lo,
                       std::optional<double> window_hi) {
    if (h.size() == 0) throw NumericalError(NumericalError::Kind::fit, "empty front history");
    if (mode != FitMode::full && !c_star) throw ParameterError("fixed_speed and offset_only fits need c_star");
    FrontFit fit;
    fit.mode = mode;
    fit.window_hi = window_hi.value_or(h.times.back());
    fit.window_lo = window_lo.value_or(fit.window_hi / 4.0);

    std::vector<double> t, r;
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (h.times[i] >= fit.window_lo && h.times[i] <= fit.window_hi) {
            t.push_back(h.times[i]);
            r.push_back(h.positions[i]);
        }
    }
    fit.samples = t.size();
    if (t.size() < 10) {
        throw NumericalError(NumericalError::Kind::fit,
                             "fit window holds " + std::to_string(t.size()) + " samples; at least 10 are needed");
    }

    const Eigen::Index n = static_cast<Eigen::Index>(t.size());
    const Eigen::Index cols = mode == FitMode::full ? 3 : mode == FitMode::fixed_speed ? 2 : 1;
    Eigen::MatrixXd A(n, cols);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double ti = t[static_cast<std::size_t>(i)], ri = r[static_cast<std::size_t>(i)];
        if (mode == FitMode::full) {
            A(i, 0) = ti;
            A(i, 1) = -std::log(ti);
            A(i, 2) = 1.0;
            b(i) = ri;
        } else {
            if (mode == FitMode::fixed_speed) A(i, 0) = std::log(ti);
            A(i, cols - 1) = 1.0;
            b(i) = *c_star * ti - ri;
        }
    }
    // Unit-norm columns so that the rank threshold measures collinearity, not scale.
    Eigen::VectorXd scale = A.colwise().norm().transpose();
    Eigen::MatrixXd As = A * scale.cwiseInverse().asDiagonal();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(As);
    qr.setThreshold(1e-10);
    if (qr.rank() < cols) {
        throw NumericalError(NumericalError::Kind::fit,
                             "rank-deficient design on [" + std::to_string(fit.window_lo) + ", " +
                                 std::to_string(fit.window_hi) + "]; widen the window");
    }
    const Eigen::VectorXd coef = qr.solve(b).cwiseQuotient(scale);
    fit.residual_rms = std::sqrt((A * coef - b).squaredNorm() / static_cast<double>(n));
    switch (mode) {
        case FitMode::full:
            fit.c_fit = coef(0);
            fit.k_fit = coef(1);
            fit.s_fit = coef(2);
            break;
        case FitMode::fixed_speed:
            fit.c_fit = *c_star;
            fit.k_fit = coef(0);
            fit.s_fit = -coef(1);
            break;
        case FitMode::offset_only:
            fit.c_fit = *c_star;
            fit.k_fit = 0.0;
            fit.s_fit = -coef(0);
            break;
    }
    return fit;
}

FrontHistory to_moving_frame(const FrontHistory& lab, double c_star, double k) {
    FrontHistory out = lab;
    for (std::size_t i = 0; i < out.size(); ++i) out.positions[i] -= frame_offset(c_star, k, out.times[i]);
    return out;
}

namespace {

double interpolate_history(const FrontHistory& h, double t) {
    if (t <= h.times.front()) return h.positions.front();
    if (t >= h.times.back()) return h.positions.back();
    const auto it = std::lower_bound(h.times.begin(), h.times.end(), t);
    const std::size_t j = static_cast<std::size_t>(it - h.times.begin());
    if (h.times[j] == t) return h.positions[j];
    const double w = (t - h.times[j - 1]) / (h.times[j] - h.times[j - 1]);
    return (1.0 - w) * h.positions[j - 1] + w * h.positions[j];
}

}  // namespace

DriftReport moving_frame_drift(const FrontHistory& moving, std::optional<double> t_lo, std::optional<double> t_hi) {
    if (moving.size() == 0) throw ParameterError("empty front history");
    DriftReport rep;
    rep.t_hi = t_hi.value_or(moving.times.back());
    rep.t_lo = t_lo.value_or(rep.t_hi / 2.0);
    if (!(rep.t_lo < rep.t_hi)) throw ParameterError("drift window needs t_lo < t_hi");
    rep.x_lo = interpolate_history(moving, rep.t_lo);
    rep.x_hi = interpolate_history(moving, rep.t_hi);
    rep.drift = rep.x_hi - rep.x_lo;

    double sl = 0, sx = 0, sll = 0, slx = 0;
    int n = 0;
    for (std::size_t i = 0; i < moving.size(); ++i) {
        const double t = moving.times[i];
        if (t < rep.t_lo || t > rep.t_hi) continue;
        const double l = std::log(t), x = moving.positions[i];
        sl += l;
        sx += x;
        sll += l * l;
        slx += l * x;
        ++n;
    }
    const double denom = n * sll - sl * sl;
    rep.log_slope = (n >= 2 && denom > 0.0) ? (n * slx - sl * sx) / denom : 0.0;
    return rep;
}

namespace {

constexpr double kLevelFloor = 1e-6;

struct Shifts {
    double plus;
    double minus;
    double half;  // moving-frame crossing of 1/2
};

struct SnapshotView {
    double t;
    std::vector<double> rho;
    const std::vector<double>* u;
};

// Minimal s_plus and maximal s_minus for slack eps. Constraints whose level falls outside
// [1e-6, 1 - 1e-6] are clamped to that range (a relaxation of at most 1e-6 in value).
Shifts squeeze_shifts(const SnapshotView& s, const WaveProfile& p, double eps, double search) {
    const auto& u = *s.u;
    Shifts out;
    out.half = track_level_set(s.rho, u, 0.5);
    double plus = -std::numeric_limits<double>::infinity();
    double minus = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double up = u[i] - eps;
        if (up > kLevelFloor) plus = std::max(plus, s.rho[i] - profile_inverse(p, std::min(up, 1.0 - kLevelFloor)));
        const double lo = u[i] + eps;
        if (lo < 1.0 - kLevelFloor) minus = std::min(minus, s.rho[i] - profile_inverse(p, std::max(lo, kLevelFloor)));
    }
    out.plus = std::max(plus, out.half - search);
    out.minus = std::min(minus, out.half + search);
    if (out.plus > out.half + search || out.minus < out.half - search) {
        throw NumericalError(NumericalError::Kind::sandwich,
                             "no squeeze shift within +-" + std::to_string(search) + " of the front at t = " + std::to_string(s.t));
    }
    return out;
}

double squeeze_excess(const SnapshotView& s, const WaveProfile& p, double S_plus, double S_minus) {
    double e = 0.0;
    for (std::size_t i = 0; i < s.u->size(); ++i) {
        const double v = (*s.u)[i];
        e = std::max({e, v - profile_eval(p, s.rho[i] - S_plus).u, profile_eval(p, s.rho[i] - S_minus).u - v});
    }
    return e;
}

double slack(double C, double t) { return C * std::log(t) / t; }

}  // namespace

SandwichReport verify_radial_sandwich(const std::vector<RadialState>& snapshots, const WaveProfile& profile,
                                      const SandwichOptions& opt) {
    std::vector<SnapshotView> views;
    for (const auto& s : snapshots) {
        if (s.t < opt.t0) continue;
        SnapshotView v;
        v.t = s.t;
        v.u = &s.u;
        const double offset = frame_offset(s.c_star, (s.dim - 1) / s.c_star, s.t);
        v.rho.resize(s.r.size());
        for (std::size_t i = 0; i < s.r.size(); ++i) v.rho[i] = s.physical_radius(i) - offset;
        views.push_back(std::move(v));
    }
    if (views.size() < 4) {
        throw NumericalError(NumericalError::Kind::sandwich, "fewer than 4 snapshots at t >= t0");
    }
    SandwichReport rep;
    rep.t0 = opt.t0;
    rep.fit_count = views.size() / 2;

    auto common_shift_exists = [&](double C) {
        double sup_plus = -std::numeric_limits<double>::infinity();
        double inf_minus = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < rep.fit_count; ++j) {
            const Shifts sh = squeeze_shifts(views[j], profile, slack(C, views[j].t), opt.search);
            sup_plus = std::max(sup_plus, sh.plus);
            inf_minus = std::min(inf_minus, sh.minus);
        }
        return sup_plus <= inf_minus;
    };

    if (opt.C) {
        rep.C = *opt.C;
    } else if (common_shift_exists(0.0)) {
        rep.C = 0.0;
    } else {
        double lo = 0.0, hi = 1.0;
        while (!common_shift_exists(hi)) {
            lo = hi;
            hi *= 2.0;
            if (hi > 1e6) throw NumericalError(NumericalError::Kind::sandwich, "no slack constant C up to 1e6 gives a squeeze");
        }
        while (hi - lo > 1e-4 * hi) {
            const double mid = 0.5 * (lo + hi);
            (common_shift_exists(mid) ? hi : lo) = mid;
        }
        rep.C = hi;
    }

    for (const auto& v : views) {
        const Shifts sh = squeeze_shifts(v, profile, slack(rep.C, v.t), opt.search);
        rep.times.push_back(v.t);
        rep.s_plus.push_back(sh.plus);
        rep.s_minus.push_back(sh.minus);
    }
    rep.S_plus = *std::max_element(rep.s_plus.begin(), rep.s_plus.end());
    rep.S_minus = *std::min_element(rep.s_minus.begin(), rep.s_minus.end());

    rep.excess_bounded = true;
    for (const auto& v : views) {
        rep.excess.push_back(squeeze_excess(v, profile, rep.S_plus, rep.S_minus));
        if (rep.excess.back() > slack(rep.C, v.t) + kLevelFloor) rep.excess_bounded = false;
    }

    // Running sup / inf over the last half of the run.
    const double t_mid = 0.5 * rep.times.back();
    double run_plus = -std::numeric_limits<double>::infinity(), run_minus = std::numeric_limits<double>::infinity();
    double plus_at_mid = run_plus, minus_at_mid = run_minus;
    for (std::size_t j = 0; j < rep.times.size(); ++j) {
        run_plus = std::max(run_plus, rep.s_plus[j]);
        run_minus = std::min(run_minus, rep.s_minus[j]);
        if (rep.times[j] <= t_mid) {
            plus_at_mid = run_plus;
            minus_at_mid = run_minus;
        }
    }
    if (!std::isfinite(plus_at_mid)) plus_at_mid = rep.s_plus.front();
    if (!std::isfinite(minus_at_mid)) minus_at_mid = rep.s_minus.front();
    rep.plus_variation = run_plus - plus_at_mid;
    rep.minus_variation = minus_at_mid - run_minus;
    rep.stabilized = rep.plus_variation < opt.stabilization_tol && rep.minus_variation < opt.stabilization_tol;
    return rep;
}

}  // namespace frontlab
