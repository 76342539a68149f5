#include "frontlab/gap_constants.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "frontlab/errors.hpp"

namespace frontlab {

namespace {
constexpr int kBandSamples = 400;
constexpr double kMu0Floor = 1e-3;
constexpr double kMu0Resolution = 1e-6;
}  // namespace

double max_derivative_on_bands(const BistableNonlinearity& f, double mu0) {
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kBandSamples; ++i) {
        const double s = mu0 * i / kBandSamples;
        worst = std::max({worst, f.deriv(s), f.deriv(1.0 - s)});
    }
    return worst;
}

GapConstants derive_gap_constants(const BistableNonlinearity& f, const WaveProfile& profile) {
    for (std::size_t i = 0; i < profile.du_values.size(); ++i) {
        if (!(profile.du_values[i] < 0.0)) {
            throw NumericalError(NumericalError::Kind::invariant, "profile is not strictly decreasing");
        }
    }
    GapConstants g;
    g.delta = 0.5 * std::min(-f.deriv(0.0), -f.deriv(1.0));
    if (!(g.delta > 0.0)) {
        throw NumericalError(NumericalError::Kind::invariant, "f'(0) and f'(1) must be negative");
    }

    const double cap = 0.5 * std::min(f.theta(), 1.0 - f.theta());
    if (max_derivative_on_bands(f, cap) <= -g.delta) {
        g.mu0 = cap;
    } else {
        double lo = 0.0, hi = cap;
        while (hi - lo > kMu0Resolution) {
            const double mid = 0.5 * (lo + hi);
            (max_derivative_on_bands(f, mid) <= -g.delta ? lo : hi) = mid;
        }
        g.mu0 = lo;
    }
    if (g.mu0 < kMu0Floor) {
        throw NumericalError(NumericalError::Kind::invariant,
                             "end-band width mu0 fell below the 1e-3 floor; the profile window would be unbounded");
    }

    const double left = profile_inverse(profile, 1.0 - g.mu0);
    const double right = profile_inverse(profile, g.mu0);
    g.M = std::max(std::abs(left), std::abs(right));

    double min_slope = std::numeric_limits<double>::infinity();
    const double h = profile.spacing();
    const int n = static_cast<int>(std::ceil(2.0 * g.M / h));
    for (int i = 0; i <= n; ++i) {
        const double rho = -g.M + 2.0 * g.M * i / n;
        min_slope = std::min(min_slope, -profile_eval(profile, rho).du);
    }
    g.delta_M = min_slope;
    if (!(g.delta_M > 0.0)) {
        throw NumericalError(NumericalError::Kind::invariant, "profile slope vanishes inside [-M, M]");
    }
    return g;
}

}  // namespace frontlab
