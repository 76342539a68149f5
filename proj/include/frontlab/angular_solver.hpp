#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "frontlab/gap_constants.hpp"
#include "frontlab/nonlinearity.hpp"
#include "frontlab/radial_solver.hpp"
#include "frontlab/wave_profile.hpp"

namespace frontlab {

/// Planar (N = 2) field on moving-frame radius x times J uniform angles. Storage is
/// angle-major: u[j * nr + i] is the value at (r[i], theta[j]).
struct PolarField {
    double t = 1.0;
    std::vector<double> r;
    std::vector<double> theta;
    std::vector<double> u;
    double c_star = 0.0;
    double k_shift = 0.0;
    // Derived by update_diagnostics; never evolved.
    std::vector<double> V;             // -du/dr
    std::vector<double> u_theta;       // du/dTheta
    std::vector<double> u_thetatheta;  // d2u/dTheta2

    std::size_t nr() const { return r.size(); }
    std::size_t J() const { return theta.size(); }
    double dr() const { return r[1] - r[0]; }
    double dtheta() const { return theta[1] - theta[0]; }
    double frame_offset() const;
    double& at(std::size_t j, std::size_t i) { return u[j * r.size() + i]; }
    double at(std::size_t j, std::size_t i) const { return u[j * r.size() + i]; }
};

/// Recomputes V (centered in r, one-sided at the window ends), u_theta and u_thetatheta
/// (centered, periodic in Theta).
void update_diagnostics(PolarField& field);

enum class ShapeKind { ellipse, star };

/// Ellipse x^2/a^2 + y^2/b^2 <= 1 or star R(Theta) = R_bar (1 + eps cos(m Theta)), rotated
/// by `rotation`. `smoothing` > 0 replaces the indicator by a tanh step of that width,
/// forced to 1 inside the inner and 0 outside the outer bounding ball.
struct SupportShape {
    ShapeKind kind = ShapeKind::ellipse;
    double a = 30.0;
    double b = 20.0;
    double R_bar = 25.0;
    double eps = 0.1;
    int m = 3;
    double rotation = 0.0;
    double smoothing = 0.0;
};

/// Boundary radius in direction theta.
double support_radius(const SupportShape& shape, double theta);

/// Radii (R1, R2) of the largest inscribed and smallest enclosing centred balls.
std::pair<double, double> support_bounds(const SupportShape& shape);

struct PolarGrid {
    double lo = 10.0;
    double hi = 70.0;
    double dr = 0.05;
    int J = 256;
};

/// Field at t = 1 in the moving frame. `declared` bounds, when given, are checked to
/// sandwich the support. Throws ParameterError on bad shape parameters, a violated
/// sandwich, or a window that does not contain the support with u = 1 at its left edge.
PolarField build_initial_2d(const SupportShape& shape, const PolarGrid& grid, double c_star,
                            std::optional<double> k = std::nullopt,
                            std::optional<std::pair<double, double>> declared = std::nullopt);

/// Largest monotone dt over [t, t + horizon]: 1 / (F + 2 kappa_max / dTheta^2) with
/// kappa_max = 1 / (smallest lab radius of the window)^2.
double max_stable_dt_2d(const BistableNonlinearity& f, const PolarField& field, double horizon);

/// One IMEX step: per angle, radial diffusion and drift implicit (one shared factorization,
/// drift at the step midpoint); angular diffusion and reaction explicit; u = 1 / 0 at the
/// window edges. Angles are processed by parallel_for. Diagnostics are refreshed.
PolarField step_2d(const BistableNonlinearity& f, const PolarField& field, double dt);

/// max |u_theta| over nodes with x >= -c t / 2.
double angular_gradient_max(const PolarField& field);

struct AngularShift {
    std::vector<double> theta;
    std::vector<double> s_values;
    double lipschitz_estimate = 0.0;
    double level = 0.5;
    double band_center = 0.0;
};

/// Per-angle crossing x(Theta) of `level` within |x - c| <= band of the crossing c of the
/// angle-averaged field; s(Theta) = U*^{-1}(level) - x(Theta).
/// Throws NumericalError(tracking) naming the angle on zero or multiple crossings.
AngularShift extract_angular_shift(const PolarField& field, double level, const WaveProfile& profile,
                                   double band = 20.0);

/// sup over the window of |u - U*(x + s(Theta))|.
double shifted_wave_error(const PolarField& field, const AngularShift& shift, const WaveProfile& profile);

/// min of V over nodes with |x + s(Theta)| <= M (the slope floor region around the front).
double min_slope_near_front(const PolarField& field, const AngularShift& shift, double M);

struct PolarSimulation {
    SupportShape shape;
    double dr = 0.05;
    int J = 256;
    std::optional<double> window_lo;  // default R1/2 - R(1)
    std::optional<double> window_hi;  // default max(60, R2 - R(1) + 40)
    std::optional<double> k;
    double dt_max = 0.05;
    double t_final = 400.0;
    std::vector<double> snapshot_times;
    // Called at every snapshot (diagnostics current). With keep_snapshots false only the
    // final field is stored in the run.
    std::function<void(const PolarField&)> on_snapshot;
    bool keep_snapshots = true;
};

struct PolarRun {
    std::vector<PolarField> snapshots;  // requested times plus t_final, diagnostics current
    std::size_t steps = 0;
};

/// Advances with dt = min(dt_max, 0.9 max_stable_dt_2d), landing exactly on snapshot times.
PolarRun simulate_polar(const BistableNonlinearity& f, const WaveProfile& profile, const PolarSimulation& sim);

/// The window used by simulate_polar.
PolarGrid polar_window(const PolarSimulation& sim, double c_star);

}  // namespace frontlab
