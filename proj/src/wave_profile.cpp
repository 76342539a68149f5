#include "frontlab/wave_profile.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "frontlab/errors.hpp"
#include "frontlab/ode.hpp"

namespace frontlab {

namespace {

using Phase = ode::State<2>;  // (U, W = U')

// Unstable eigenvalue at (1, 0) and stable eigenvalue at (0, 0) of the phase-plane system.
double rate_at_one(const BistableNonlinearity& f, double c) {
    return 0.5 * (-c + std::sqrt(c * c - 4.0 * f.deriv(1.0)));
}
double rate_at_zero(const BistableNonlinearity& f, double c) {
    return 0.5 * (-c - std::sqrt(c * c - 4.0 * f.deriv(0.0)));
}

struct Branch {
    std::vector<ode::Sample<2>> samples;
    double crossing = 0.0;  // parameter value where U = 1/2
};

// Quintic Hermite interpolation on [0, 1] with values, first and second derivatives.
double hermite5(double h, double s, double y0, double d0, double dd0, double y1, double d1, double dd1) {
    const double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
    const double h0 = 1 - 10 * s3 + 15 * s4 - 6 * s5;
    const double h1 = s - 6 * s3 + 8 * s4 - 3 * s5;
    const double h2 = 0.5 * (s2 - 3 * s3 + 3 * s4 - s5);
    const double h3 = 10 * s3 - 15 * s4 + 6 * s5;
    const double h4 = -4 * s3 + 7 * s4 - 3 * s5;
    const double h5 = 0.5 * (s3 - 2 * s4 + s5);
    return h0 * y0 + h1 * h * d0 + h2 * h * h * dd0 + h3 * y1 + h4 * h * d1 + h5 * h * h * dd1;
}

// Evaluates (U, W) on a branch at parameter x using quintic Hermite on the step containing x.
Phase branch_eval(const Branch& br, const BistableNonlinearity& f, double c, double x) {
    const auto& s = br.samples;
    const bool forward = s.back().t > s.front().t;
    std::size_t lo = 0, hi = s.size() - 1;
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        const bool before = forward ? s[mid].t <= x : s[mid].t >= x;
        (before ? lo : hi) = mid;
    }
    const auto& a = s[lo];
    const auto& b = s[hi];
    const double h = b.t - a.t;
    const double t = (x - a.t) / h;
    auto second = [&](const Phase& y, const Phase& dy) {
        // U'' = W', W'' = -c W' - f'(U) W
        return Phase{dy[1], -c * dy[1] - f.deriv(y[0]) * y[1]};
    };
    const Phase da2 = second(a.y, a.dydt);
    const Phase db2 = second(b.y, b.dydt);
    Phase out{};
    for (int i = 0; i < 2; ++i) {
        out[i] = hermite5(h, t, a.y[i], a.dydt[i], da2[i], b.y[i], b.dydt[i], db2[i]);
    }
    return out;
}

// Integrates from (start) until U crosses 1/2 and locates the crossing parameter.
Branch integrate_branch(const BistableNonlinearity& f, double c, const Phase& start, double direction) {
    auto rhs = [&](double, const Phase& y) { return Phase{y[1], -c * y[1] - f.eval(y[0])}; };
    ode::Options opt;
    opt.rtol = 1e-13;
    opt.atol = 1e-15;
    opt.h_init = 1e-3;
    opt.h_max = 1e-2;
    Branch br;
    const bool from_one = start[0] > 0.5;
    ode::integrate<2>(rhs, 0.0, start, direction * 500.0, opt, [&](const ode::Sample<2>& s) {
        br.samples.push_back(s);
        if (!(s.y[1] < 0.0)) {
            throw NumericalError(NumericalError::Kind::integration,
                                 "profile branch is not monotone (U' >= 0 before reaching 1/2)");
        }
        return from_one ? s.y[0] > 0.5 : s.y[0] < 0.5;
    });
    const auto& last = br.samples.back();
    if (from_one ? last.y[0] > 0.5 : last.y[0] < 0.5) {
        throw NumericalError(NumericalError::Kind::integration, "profile branch never reached U = 1/2");
    }
    double lo = br.samples[br.samples.size() - 2].t;
    double hi = last.t;
    for (int it = 0; it < 200 && std::abs(hi - lo) > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double u = branch_eval(br, f, c, mid)[0];
        const bool before = from_one ? u > 0.5 : u < 0.5;
        (before ? lo : hi) = mid;
    }
    br.crossing = 0.5 * (lo + hi);
    return br;
}

}  // namespace

ShotOutcome classify_shot(const BistableNonlinearity& f, double c, double tol, double offset) {
    const double lambda = rate_at_one(f, c);
    auto rhs = [&](double, const Phase& y) { return Phase{y[1], -c * y[1] - f.eval(y[0])}; };
    ode::Options opt;
    opt.rtol = tol / 100.0;
    opt.atol = tol / 100.0;
    opt.h_init = 1e-2;
    opt.h_max = 1.0;
    std::optional<ShotOutcome> outcome;
    ode::integrate<2>(rhs, 0.0, Phase{1.0 - offset, -lambda * offset}, 5000.0, opt,
                      [&](const ode::Sample<2>& s) {
                          if (s.y[0] < 0.0 && s.y[1] < 0.0) {
                              outcome = ShotOutcome::overshoot;
                          } else if (s.y[1] >= 0.0) {
                              outcome = ShotOutcome::undershoot;
                          } else if (!std::isfinite(s.y[0]) || s.y[0] > 1.0) {
                              throw NumericalError(NumericalError::Kind::integration,
                                                   "shooting trajectory left the phase strip");
                          }
                          return !outcome.has_value();
                      });
    // A trajectory that settles onto the interior equilibrium never reaches 0: too much damping.
    return outcome.value_or(ShotOutcome::undershoot);
}

WaveProfile solve_profile(const BistableNonlinearity& f, double tol, const ProfileOptions& opt) {
    if (!(tol > 1e-12 && tol < 1e-4)) {
        throw ParameterError("profile tolerance must lie in (1e-12, 1e-4); got " + std::to_string(tol));
    }
    double lo = opt.c_lo, hi = opt.c_hi;
    if (classify_shot(f, lo, tol, opt.manifold_offset) != ShotOutcome::overshoot ||
        classify_shot(f, hi, tol, opt.manifold_offset) != ShotOutcome::undershoot) {
        throw NumericalError(NumericalError::Kind::no_wave,
                             "no traveling wave: speeds in [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                 "] do not bracket a heteroclinic orbit");
    }
    while (hi - lo >= tol) {
        const double mid = 0.5 * (lo + hi);
        if (classify_shot(f, mid, tol, opt.manifold_offset) == ShotOutcome::overshoot) {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    WaveProfile p;
    p.f = f;
    p.c_star = 0.5 * (lo + hi);
    p.c_bracket_width = hi - lo;
    p.rate_left = rate_at_one(f, p.c_star);
    p.rate_right = rate_at_zero(f, p.c_star);

    const double eps = opt.manifold_offset;
    const Branch left =
        integrate_branch(f, p.c_star, Phase{1.0 - eps, -p.rate_left * eps}, +1.0);
    const Branch right =
        integrate_branch(f, p.c_star, Phase{eps, p.rate_right * eps}, -1.0);

    const auto half = static_cast<long>(std::llround(opt.half_width / opt.spacing));
    const std::size_t n = static_cast<std::size_t>(2 * half + 1);
    p.xi_grid.resize(n);
    p.u_values.resize(n);
    p.du_values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = static_cast<double>(static_cast<long>(i) - half) * opt.spacing;
        p.xi_grid[i] = xi;
        double u = 0.0, du = 0.0;
        if (xi < 0.0) {
            const double x = xi + left.crossing;
            if (x >= 0.0) {
                const Phase y = branch_eval(left, f, p.c_star, x);
                u = y[0];
                du = y[1];
            } else {
                const double gap = eps * std::exp(p.rate_left * x);
                u = 1.0 - gap;
                du = -p.rate_left * gap;
            }
        } else if (xi > 0.0) {
            const double x = xi + right.crossing;
            if (x <= 0.0) {
                const Phase y = branch_eval(right, f, p.c_star, x);
                u = y[0];
                du = y[1];
            } else {
                u = eps * std::exp(p.rate_right * x);
                du = p.rate_right * u;
            }
        } else {
            u = 0.5;
            const double dl = branch_eval(left, f, p.c_star, left.crossing)[1];
            const double dr = branch_eval(right, f, p.c_star, right.crossing)[1];
            du = 0.5 * (dl + dr);
        }
        p.u_values[i] = u;
        p.du_values[i] = du;
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (!(p.du_values[i] < 0.0) || (i > 0 && !(p.u_values[i] < p.u_values[i - 1]))) {
            throw NumericalError(NumericalError::Kind::integration,
                                 "tabulated profile is not strictly decreasing at xi=" +
                                     std::to_string(p.xi_grid[i]));
        }
    }
    return p;
}

ProfileValue profile_eval(const WaveProfile& p, double xi) {
    const double c = p.c_star;
    double u = 0.0, du = 0.0;
    if (xi <= p.xi_min()) {
        const double gap = (1.0 - p.u_values.front()) * std::exp(p.rate_left * (xi - p.xi_min()));
        u = 1.0 - gap;
        du = -p.rate_left * gap;
    } else if (xi >= p.xi_max()) {
        u = p.u_values.back() * std::exp(p.rate_right * (xi - p.xi_max()));
        du = p.rate_right * u;
    } else {
        const double h = p.spacing();
        const double pos = (xi - p.xi_min()) / h;
        std::size_t i = static_cast<std::size_t>(pos);
        i = std::min(i, p.xi_grid.size() - 2);
        const double s = pos - static_cast<double>(i);
        const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
        const double h10 = s * (1 - s) * (1 - s);
        const double h01 = s * s * (3 - 2 * s);
        const double h11 = s * s * (s - 1);
        const double u0 = p.u_values[i], u1 = p.u_values[i + 1];
        const double d0 = p.du_values[i], d1 = p.du_values[i + 1];
        u = h00 * u0 + h10 * h * d0 + h01 * u1 + h11 * h * d1;
        // derivative of the same cubic
        const double g00 = 6 * s * s - 6 * s;
        const double g10 = 3 * s * s - 4 * s + 1;
        const double g01 = -6 * s * s + 6 * s;
        const double g11 = 3 * s * s - 2 * s;
        du = (g00 * u0 + g01 * u1) / h + g10 * d0 + g11 * d1;
    }
    return {u, du, -c * du - p.f.eval(u)};
}

double profile_inverse(const WaveProfile& p, double level) {
    if (!(level >= 1e-6 && level <= 1.0 - 1e-6)) {
        throw NumericalError(NumericalError::Kind::domain,
                             "profile_inverse level must lie in [1e-6, 1-1e-6]; got " + std::to_string(level));
    }
    const auto& u = p.u_values;
    if (level > u.front()) {
        return p.xi_min() + std::log((1.0 - level) / (1.0 - u.front())) / p.rate_left;
    }
    if (level < u.back()) {
        return p.xi_max() + std::log(level / u.back()) / p.rate_right;
    }
    // u is decreasing: find the cell with u[i] >= level >= u[i + 1], then safeguarded Newton.
    const auto it = std::lower_bound(u.begin(), u.end(), level, [](double a, double b) { return a > b; });
    std::size_t i = static_cast<std::size_t>(it - u.begin());
    i = std::clamp<std::size_t>(i, 1, u.size() - 1) - 1;
    double lo = p.xi_grid[i], hi = p.xi_grid[i + 1];
    double x = lo + (hi - lo) * (u[i] - level) / (u[i] - u[i + 1]);
    for (int iter = 0; iter < 100; ++iter) {
        const ProfileValue v = profile_eval(p, x);
        const double g = v.u - level;
        if (g == 0.0) return x;
        (g > 0.0 ? lo : hi) = x;
        if (hi - lo <= 1e-15 * std::max(1.0, std::abs(x))) break;
        double next = x - g / v.du;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= 1e-15 * std::max(1.0, std::abs(x))) {
            x = next;
            break;
        }
        x = next;
    }
    return x;
}

double profile_ode_residual(const WaveProfile& p) {
    const double h = p.spacing();
    const auto& du = p.du_values;
    double worst = 0.0;
    for (std::size_t i = 2; i + 2 < du.size(); ++i) {
        const double ddu = (-du[i + 2] + 8.0 * du[i + 1] - 8.0 * du[i - 1] + du[i - 2]) / (12.0 * h);
        worst = std::max(worst, std::abs(ddu + p.c_star * du[i] + p.f.eval(p.u_values[i])));
    }
    return worst;
}

}  // namespace frontlab
