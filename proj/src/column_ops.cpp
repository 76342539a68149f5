#include "column_ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "frontlab/errors.hpp"

namespace frontlab::detail {

namespace {

struct Row {
    double lower, diag, upper;
};

// Central differences while the cell Peclet number |a| dr / 2 stays <= 1 (the matrix is
// then an M-matrix); upwind beyond.
Row interior_row(double a, double dr, double dt) {
    const double diff = dt / (dr * dr);
    Row row{-diff, 1.0 + 2.0 * diff, -diff};
    if (std::abs(a) * dr <= 2.0) {
        const double adv = dt * a / (2.0 * dr);
        row.lower += adv;
        row.upper -= adv;
    } else if (a > 0.0) {
        row.diag += dt * a / dr;
        row.upper -= dt * a / dr;
    } else {
        row.diag -= dt * a / dr;
        row.lower += dt * a / dr;
    }
    return row;
}

}  // namespace

ColumnOperator lab_operator(int dim, double dr, std::size_t n, double dt) {
    ColumnOperator op;
    op.first = 0;
    op.n = n;
    const std::size_t m = n - 1;
    std::vector<double> lower(m), diag(m), upper(m);
    const double diff = dt / (dr * dr);
    lower[0] = 0.0;
    diag[0] = 1.0 + 2.0 * dim * diff;
    upper[0] = -2.0 * dim * diff;
    for (std::size_t i = 1; i < m; ++i) {
        const Row row = interior_row((dim - 1) / (i * dr), dr, dt);
        lower[i] = row.lower;
        diag[i] = row.diag;
        upper[i] = row.upper;
    }
    op.right_coupling = upper[m - 1];
    upper[m - 1] = 0.0;
    op.lu.factor(lower, diag, upper);
    return op;
}

ColumnOperator moving_operator(std::span<const double> drift, double dr, double dt) {
    ColumnOperator op;
    op.first = 1;
    op.n = drift.size();
    const std::size_t m = op.n - 2;
    std::vector<double> lower(m), diag(m), upper(m);
    for (std::size_t j = 0; j < m; ++j) {
        const Row row = interior_row(drift[j + 1], dr, dt);
        lower[j] = row.lower;
        diag[j] = row.diag;
        upper[j] = row.upper;
    }
    op.left_coupling = lower[0];
    op.right_coupling = upper[m - 1];
    lower[0] = 0.0;
    upper[m - 1] = 0.0;
    op.lu.factor(lower, diag, upper);
    return op;
}

void column_step(const ColumnOperator& op, const BistableNonlinearity& f, std::span<const double> u_old,
                 std::span<const double> extra, double dt, double left_value, double right_value,
                 std::span<double> u_new, std::span<double> work) {
    const std::size_t first = op.first;
    const std::size_t last = op.n - 1;  // exclusive end of the unknowns
    const std::size_t m = last - first;
    std::span<double> rhs = work.subspan(0, m);
    for (std::size_t i = first; i < last; ++i) {
        const double e = extra.empty() ? 0.0 : extra[i];
        rhs[i - first] = u_old[i] + dt * (f.eval(u_old[i]) + e);
    }
    if (first == 1) rhs[0] -= op.left_coupling * left_value;
    rhs[m - 1] -= op.right_coupling * right_value;
    op.lu.solve(rhs);
    if (first == 1) u_new[0] = left_value;
    std::copy(rhs.begin(), rhs.end(), u_new.begin() + static_cast<std::ptrdiff_t>(first));
    u_new[last] = right_value;
}

double min_window_radius(double lo, double c, double k, double t0, double t1) {
    // R is convex with its minimum at t = k / c.
    auto R = [&](double t) { return c * t - k * std::log(t); };
    double m = std::min(R(t0), R(t1));
    if (k > 0.0 && k / c > t0 && k / c < t1) m = std::min(m, R(k / c));
    return lo + m;
}

void clamp_and_check(std::span<double> u) {
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double v = u[i];
        if (!(v >= -1e-6 && v <= 1.0 + 1e-6)) {
            throw NumericalError(NumericalError::Kind::invariant,
                                 "solution left [0, 1] at node " + std::to_string(i) + " (value " + std::to_string(v) + ")");
        }
        u[i] = std::clamp(v, -1e-8, 1.0 + 1e-8);
    }
}

}  // namespace frontlab::detail
