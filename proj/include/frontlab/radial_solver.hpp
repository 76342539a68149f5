#pragma once

#include <optional>
#include <vector>

#include "frontlab/front_history.hpp"
#include "frontlab/nonlinearity.hpp"
#include "frontlab/wave_profile.hpp"

namespace frontlab {

enum class Frame { lab, moving };

enum class DatumKind { ball_indicator, smoothed_ball, profile_cap };

/// Radially symmetric initial datum squeezed between the indicators of B_r1 and B_r2.
/// ball_indicator uses the radius (r1 + r2) / 2; smoothed_ball a tanh step of the given
/// width centred there; profile_cap the traveling wave U*(r - (r1 + r2)/2) capped to 1
/// inside B_r1 and 0 outside B_r2.
struct InitialDatum {
    DatumKind kind = DatumKind::ball_indicator;
    double r1 = 20.0;
    double r2 = 20.0;
    double width = 1.0;
};

/// Uniform grid lo + i * dr, i = 0..n-1. In the lab frame lo = 0.
struct RadialGrid {
    double lo = 0.0;
    double hi = 100.0;
    double dr = 0.05;

    std::vector<double> nodes() const;
};

/// Frame constants. k defaults to (dim - 1) / c_star; control runs may override it.
struct FrameSpec {
    Frame frame = Frame::lab;
    int dim = 2;
    double c_star = 0.0;
    std::optional<double> k;

    double k_shift() const { return k ? *k : (dim - 1) / c_star; }
};

struct RadialState {
    Frame frame = Frame::lab;
    double t = 1.0;
    std::vector<double> r;  // lab radius, or moving coordinate r - R(t)
    std::vector<double> u;
    int dim = 2;
    double c_star = 0.0;
    double k_shift = 0.0;

    /// R(t) = c t - k ln t; the moving coordinate is the lab radius minus this.
    double frame_offset() const;
    double dr() const { return r[1] - r[0]; }
    /// Lab radius of node i.
    double physical_radius(std::size_t i) const { return frame == Frame::moving ? r[i] + frame_offset() : r[i]; }
};

/// R(t) = c t - k ln t.
double frame_offset(double c_star, double k, double t);

/// (dim - 1) / (x + R(t)) - k / t: the curvature part of the moving-frame drift.
double curvature_drift(double x, double t, int dim, double c_star, double k);

/// c* plus curvature_drift.
double moving_drift(double x, double t, int dim, double c_star, double k);

/// State at t = 1 on the given grid. The profile is needed for profile_cap only.
/// Throws ParameterError when r1 > r2 (or r1 == r2 for the smooth kinds), r1 <= 0, or the
/// grid does not contain the outer radius.
RadialState build_initial(const InitialDatum& datum, const RadialGrid& grid, const FrameSpec& frame,
                          const WaveProfile* profile = nullptr);

/// Largest dt for which the step is monotone (discrete comparison principle): dt * F <= 1
/// with F = sup|f'|. Diffusion and drift are implicit and impose no restriction.
double max_stable_dt(const BistableNonlinearity& f);

/// One IMEX step in the lab frame: diffusion and the (dim-1)/r drift implicit, reaction
/// explicit. Symmetry (ghost reflection) at r = 0, u = 0 at the outer node.
RadialState step_lab(const BistableNonlinearity& f, const RadialState& state, double dt);

/// One IMEX step in the moving frame with the drift at the step midpoint; u = 1 at the
/// left window edge and u = 0 at the right edge.
/// Throws NumericalError(domain) if the left edge has non-positive lab radius during the step.
RadialState step_moving(const BistableNonlinearity& f, const RadialState& state, double dt);

struct RadialRun {
    std::vector<RadialState> snapshots;
    FrontHistory history;  // lab-frame positions at every snapshot
};

/// Advances with fixed dt (the last step before each snapshot is shortened to land on it).
/// Snapshot times outside (state.t, t_final] are ignored; t_final itself is always emitted.
RadialRun run(const BistableNonlinearity& f, const RadialState& state, double t_final,
              const std::vector<double>& snapshot_times, double dt, double level = 0.5);

/// Full 1D simulation recipe. In the moving frame the window must stay at positive lab
/// radius; when it does not at t = 1, the run starts in the lab frame and is remapped into
/// the window at the first time R(t) is a grid multiple with lo + R(t) >= min_radius
/// (lab radii are kept continuous across the switch).
struct RadialSimulation {
    FrameSpec frame;
    InitialDatum datum;
    double dr = 0.05;
    double dt = 0.01;
    double window_lo = -60.0;
    double window_hi = 60.0;
    double lab_margin = 40.0;  // lab domain extends this far beyond the furthest front
    double min_radius = 1.0;
    double t_final = 400.0;
    std::vector<double> snapshot_times;
    double level = 0.5;
};

struct RadialSimulationResult {
    RadialRun run;
    double switch_time = 1.0;  // time the solver entered the moving frame (== t_final if never)
};

RadialSimulationResult simulate_radial(const BistableNonlinearity& f, const RadialSimulation& sim,
                                       const WaveProfile* profile = nullptr);

/// Copies a lab-frame state onto a moving-frame window by linear interpolation.
RadialState remap_to_moving(const RadialState& lab, double window_lo, double window_hi, double dr, double k);

}  // namespace frontlab
