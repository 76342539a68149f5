#pragma once

// Shared pieces of the radial and polar steppers.

#include <cstddef>
#include <span>

#include "frontlab/nonlinearity.hpp"
#include "frontlab/tridiagonal.hpp"

namespace frontlab::detail {

/// Factorized I - dt (d_rr + a d_r) on the unknown nodes [first, n - 2]; node n - 1 and,
/// when first == 1, node 0 carry Dirichlet values.
struct ColumnOperator {
    TridiagonalFactor lu;
    std::size_t first = 1;
    std::size_t n = 0;
    double left_coupling = 0.0;   // coefficient of u[0] in the row of node 1
    double right_coupling = 0.0;  // coefficient of u[n - 1] in the row of node n - 2
};

/// Lab frame: drift (dim - 1)/r, ghost reflection at r = 0.
ColumnOperator lab_operator(int dim, double dr, std::size_t n, double dt);

/// Moving frame: drift[i] given at every node (ends unused).
ColumnOperator moving_operator(std::span<const double> drift, double dr, double dt);

/// u_new = op^{-1} (u + dt (f(u) + extra)) with boundary values applied. `extra` may be
/// empty. `work` needs op.n entries.
void column_step(const ColumnOperator& op, const BistableNonlinearity& f, std::span<const double> u_old,
                 std::span<const double> extra, double dt, double left_value, double right_value,
                 std::span<double> u_new, std::span<double> work);

/// Smallest lab radius lo + R(t) over t in [t0, t1], R(t) = c t - k ln t.
double min_window_radius(double lo, double c, double k, double t0, double t1);

/// Throws NumericalError(invariant) if a value leaves [-1e-6, 1 + 1e-6]; otherwise clamps
/// to [-1e-8, 1 + 1e-8].
void clamp_and_check(std::span<double> u);

}  // namespace frontlab::detail
