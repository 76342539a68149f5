#pragma once

#include <vector>

#include "frontlab/nonlinearity.hpp"

namespace frontlab {

/// Tabulated traveling-wave profile U* solving U'' + c U' + f(U) = 0 with U(-inf) = 1,
/// U(+inf) = 0, pinned so that U*(0) = 1/2.
///
/// Inside the grid, values come from cubic Hermite interpolation of (u, du); outside,
/// from the exponential tails of the linearizations at 1 (left) and 0 (right).
struct WaveProfile {
    BistableNonlinearity f = BistableNonlinearity::cubic(0.25);
    double c_star = 0.0;
    double c_bracket_width = 0.0;
    std::vector<double> xi_grid;
    std::vector<double> u_values;
    std::vector<double> du_values;
    double rate_left = 0.0;   // 1 - U ~ exp(rate_left * xi) as xi -> -inf (rate_left > 0)
    double rate_right = 0.0;  // U ~ exp(rate_right * xi) as xi -> +inf (rate_right < 0)

    double xi_min() const { return xi_grid.front(); }
    double xi_max() const { return xi_grid.back(); }
    double spacing() const { return xi_grid[1] - xi_grid[0]; }
};

struct ProfileValue {
    double u;
    double du;
    double ddu;
};

struct ProfileOptions {
    double half_width = 40.0;
    double spacing = 1e-2;
    double manifold_offset = 1e-8;
    double c_lo = 1e-6;
    double c_hi = 10.0;
};

/// Shooting on the wave speed followed by two-sided tabulation of the profile.
/// Throws NumericalError(no_wave) if [c_lo, c_hi] does not bracket a wave.
WaveProfile solve_profile(const BistableNonlinearity& f, double tol, const ProfileOptions& opt = {});

/// Outcome of one shot from the unstable manifold of (1, 0).
enum class ShotOutcome { overshoot, undershoot };

/// Classifies the trajectory leaving (1, 0) for a trial speed c. Exposed for tests.
ShotOutcome classify_shot(const BistableNonlinearity& f, double c, double tol, double offset = 1e-8);

ProfileValue profile_eval(const WaveProfile& p, double xi);

/// Unique xi with U*(xi) = level, for level in [1e-6, 1 - 1e-6].
double profile_inverse(const WaveProfile& p, double level);

/// max over interior nodes of |U'' + c U' + f(U)| with U'' from fourth-order differences of du.
double profile_ode_residual(const WaveProfile& p);

}  // namespace frontlab
