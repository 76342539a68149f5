#pragma once

#include "frontlab/nonlinearity.hpp"
#include "frontlab/wave_profile.hpp"

namespace frontlab {

/// Constants derived from f and U* that the comparison arguments need.
struct GapConstants {
    double mu0 = 0.0;      // end-band width: f' <= -delta on [0, mu0] and [1 - mu0, 1]
    double delta = 0.0;    // spectral gap
    double M = 0.0;        // U*(rho) lies in the end bands for |rho| >= M
    double delta_M = 0.0;  // min of -U*' over [-M, M]
};

/// delta = min(-f'(0), -f'(1)) / 2; mu0 is the widest band (bisection, 1e-6 resolution,
/// capped at min(theta, 1 - theta) / 2) on which f' <= -delta; M and delta_M follow from
/// the profile. Throws NumericalError(invariant) if the profile is not monotone or if mu0
/// would fall below 1e-3.
GapConstants derive_gap_constants(const BistableNonlinearity& f, const WaveProfile& profile);

/// Largest sampled f' over the two end bands of width mu0.
double max_derivative_on_bands(const BistableNonlinearity& f, double mu0);

}  // namespace frontlab
