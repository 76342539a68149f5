#pragma once

#include <optional>
#include <string>
#include <vector>

#include "frontlab/front_history.hpp"
#include "frontlab/radial_solver.hpp"
#include "frontlab/wave_profile.hpp"

namespace frontlab {

/// full: r = c t - k ln t + s on {t, -ln t, 1}.
/// fixed_speed: delay d = c* t - r regressed on {ln t, 1}, so d = k ln t - s.
/// offset_only: the delay regressed on {1} alone (control without the logarithm).
enum class FitMode { full, fixed_speed, offset_only };

std::string to_string(FitMode mode);
FitMode fit_mode_from_string(const std::string& name);

struct FrontFit {
    double c_fit = 0.0;
    double k_fit = 0.0;
    double s_fit = 0.0;
    double residual_rms = 0.0;
    double window_lo = 0.0;
    double window_hi = 0.0;
    std::size_t samples = 0;
    FitMode mode = FitMode::fixed_speed;
};

/// Least squares over the samples with window_lo <= t <= window_hi (default [t_last/4, t_last]).
/// c_star is required for fixed_speed and offset_only. Throws NumericalError(fit) with fewer
/// than 10 samples or a rank-deficient design.
FrontFit fit_log_shift(const FrontHistory& h, FitMode mode, std::optional<double> c_star = std::nullopt,
                       std::optional<double> window_lo = std::nullopt, std::optional<double> window_hi = std::nullopt);

/// Positions r - c t + k ln t.
FrontHistory to_moving_frame(const FrontHistory& lab, double c_star, double k);

struct DriftReport {
    double t_lo = 0.0;
    double t_hi = 0.0;
    double x_lo = 0.0;
    double x_hi = 0.0;
    double drift = 0.0;      // x(t_hi) - x(t_lo)
    double log_slope = 0.0;  // least-squares slope of x against ln t over [t_lo, t_hi]
};

/// Drift of moving-frame positions between t_lo (default t_hi / 2) and t_hi (default the
/// last time); positions are linearly interpolated in t.
DriftReport moving_frame_drift(const FrontHistory& moving, std::optional<double> t_lo = std::nullopt,
                               std::optional<double> t_hi = std::nullopt);

struct SandwichOptions {
    double t0 = 10.0;
    double search = 20.0;  // |s - x_{1/2}(t)| allowed before declaring failure
    std::optional<double> C;
    double stabilization_tol = 0.1;
};

/// Two-sided squeeze U*(rho - s_minus) - C ln t / t <= u <= U*(rho - s_plus) + C ln t / t in the
/// moving coordinate rho = r - c t + ((N-1)/c) ln t.
struct SandwichReport {
    double t0 = 0.0;
    double C = 0.0;
    std::vector<double> times;
    std::vector<double> s_plus;   // minimal upper shift per snapshot
    std::vector<double> s_minus;  // maximal lower shift per snapshot
    std::vector<double> excess;   // violation of the squeeze with the fixed S+, S- and no slack
    double S_plus = 0.0;          // sup of s_plus over t >= t0
    double S_minus = 0.0;         // inf of s_minus over t >= t0
    double plus_variation = 0.0;  // change of the running sup over the last half of the run
    double minus_variation = 0.0;
    bool stabilized = false;
    std::size_t fit_count = 0;     // snapshots used to fit C (the earlier half)
    bool excess_bounded = false;   // excess(t) <= C ln t / t (+1e-6 level clamp) at every snapshot
};

/// C is the smallest constant for which one shift works for every snapshot of the earlier
/// half (unless given). Throws NumericalError(sandwich) with fewer than 4 snapshots past t0
/// or when a shift leaves the search window.
SandwichReport verify_radial_sandwich(const std::vector<RadialState>& snapshots, const WaveProfile& profile,
                                      const SandwichOptions& opt = {});

}  // namespace frontlab
