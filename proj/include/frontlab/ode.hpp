#pragma once

// Dormand-Prince 5(4) integrator with embedded error control, plus
// Hermite dense output over the accepted steps.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "frontlab/errors.hpp"

namespace frontlab::ode {

template <std::size_t N>
using State = std::array<double, N>;

struct Options {
    double rtol = 1e-10;
    double atol = 1e-12;
    double h_init = 1e-3;
    double h_max = std::numeric_limits<double>::infinity();
    double h_min = 1e-14;
    std::size_t max_steps = 10'000'000;
};

/// One accepted point of a trajectory: time, state, and right-hand side.
template <std::size_t N>
struct Sample {
    double t;
    State<N> y;
    State<N> dydt;
};

namespace detail {

template <std::size_t N>
State<N> axpy(const State<N>& y, double h, std::initializer_list<std::pair<double, const State<N>*>> terms) {
    State<N> out = y;
    for (const auto& [coef, k] : terms) {
        if (coef == 0.0) continue;
        for (std::size_t i = 0; i < N; ++i) out[i] += h * coef * (*k)[i];
    }
    return out;
}

}  // namespace detail

/// Integrates y' = rhs(t, y) from t0 to t1 (t1 < t0 integrates backward).
///
/// `observer(const Sample<N>&)` is called on the initial point and after every
/// accepted step; returning false stops the integration early. The final
/// accepted sample is returned.
template <std::size_t N, class Rhs, class Observer>
Sample<N> integrate(Rhs&& rhs, double t0, const State<N>& y0, double t1, const Options& opt,
                    Observer&& observer) {
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                     a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                     a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                     b6 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                     e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    const double dir = (t1 >= t0) ? 1.0 : -1.0;
    Sample<N> cur{t0, y0, rhs(t0, y0)};
    if (!observer(cur)) return cur;
    if (t0 == t1) return cur;

    double h = std::min(std::abs(opt.h_init), std::abs(t1 - t0));
    std::size_t steps = 0;
    while (dir * (t1 - cur.t) > 0.0) {
        if (++steps > opt.max_steps) {
            throw NumericalError(NumericalError::Kind::integration, "ODE integration exceeded max_steps");
        }
        h = std::min({h, opt.h_max, std::abs(t1 - cur.t)});
        const double hs = dir * h;
        const auto& y = cur.y;
        const auto& k1 = cur.dydt;
        const State<N> k2 = rhs(cur.t + c2 * hs, detail::axpy<N>(y, hs, {{a21, &k1}}));
        const State<N> k3 = rhs(cur.t + c3 * hs, detail::axpy<N>(y, hs, {{a31, &k1}, {a32, &k2}}));
        const State<N> k4 =
            rhs(cur.t + c4 * hs, detail::axpy<N>(y, hs, {{a41, &k1}, {a42, &k2}, {a43, &k3}}));
        const State<N> k5 = rhs(cur.t + c5 * hs,
                                detail::axpy<N>(y, hs, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
        const State<N> k6 = rhs(
            cur.t + hs, detail::axpy<N>(y, hs, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
        const State<N> y_new =
            detail::axpy<N>(y, hs, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
        const double t_new = (h == std::abs(t1 - cur.t)) ? t1 : cur.t + hs;
        const State<N> k7 = rhs(t_new, y_new);

        double err = 0.0;
        bool finite = true;
        for (std::size_t i = 0; i < N; ++i) {
            const double ei =
                hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
            err += (ei / sc) * (ei / sc);
            finite = finite && std::isfinite(y_new[i]);
        }
        err = std::sqrt(err / static_cast<double>(N));
        if (!finite || !std::isfinite(err)) err = 1e10;

        if (err <= 1.0) {
            cur = Sample<N>{t_new, y_new, k7};
            if (!observer(cur)) return cur;
            const double fac = (err == 0.0) ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
            h *= fac;
        } else {
            h *= std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
            if (h < opt.h_min) {
                throw NumericalError(NumericalError::Kind::integration,
                                     "ODE step size underflow at t=" + std::to_string(cur.t));
            }
        }
    }
    return cur;
}

/// Convenience overload that keeps every accepted sample.
template <std::size_t N, class Rhs>
std::vector<Sample<N>> trajectory(Rhs&& rhs, double t0, const State<N>& y0, double t1, const Options& opt) {
    std::vector<Sample<N>> out;
    integrate<N>(rhs, t0, y0, t1, opt, [&](const Sample<N>& s) {
        out.push_back(s);
        return true;
    });
    return out;
}

/// Cubic Hermite interpolation of a trajectory at time t (t inside the sampled range).
template <std::size_t N>
State<N> interpolate(const std::vector<Sample<N>>& traj, double t) {
    if (traj.empty()) throw NumericalError(NumericalError::Kind::domain, "empty trajectory");
    if (traj.size() == 1) return traj.front().y;
    const bool forward = traj.back().t > traj.front().t;
    auto cmp = [forward](const Sample<N>& s, double v) { return forward ? s.t < v : s.t > v; };
    auto it = std::lower_bound(traj.begin(), traj.end(), t, cmp);
    if (it == traj.begin()) return traj.front().y;
    if (it == traj.end()) return traj.back().y;
    const Sample<N>& b = *it;
    const Sample<N>& a = *(it - 1);
    const double h = b.t - a.t;
    const double s = (t - a.t) / h;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
    const double h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s);
    const double h11 = s * s * (s - 1);
    State<N> out{};
    for (std::size_t i = 0; i < N; ++i) {
        out[i] = h00 * a.y[i] + h10 * h * a.dydt[i] + h01 * b.y[i] + h11 * h * b.dydt[i];
    }
    return out;
}

}  // namespace frontlab::ode
