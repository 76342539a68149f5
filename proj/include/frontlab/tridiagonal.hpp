#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace frontlab {

/// LU factorization of a tridiagonal matrix (Thomas algorithm), reusable for many
/// right-hand sides. Row i reads sub[i] * x[i-1] + diag[i] * x[i] + sup[i] * x[i+1].
class TridiagonalFactor {
public:
    TridiagonalFactor() = default;

    void factor(std::span<const double> sub, std::span<const double> diag, std::span<const double> sup) {
        const std::size_t n = diag.size();
        sub_.assign(sub.begin(), sub.end());
        sup_prime_.resize(n);
        inv_pivot_.resize(n);
        double prev = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double pivot = diag[i] - (i > 0 ? sub[i] * prev : 0.0);
            inv_pivot_[i] = 1.0 / pivot;
            prev = (i + 1 < n) ? sup[i] * inv_pivot_[i] : 0.0;
            sup_prime_[i] = prev;
        }
    }

    /// Solves in place: on entry `rhs` holds the right-hand side, on exit the solution.
    void solve(std::span<double> rhs) const {
        const std::size_t n = inv_pivot_.size();
        rhs[0] *= inv_pivot_[0];
        for (std::size_t i = 1; i < n; ++i) rhs[i] = (rhs[i] - sub_[i] * rhs[i - 1]) * inv_pivot_[i];
        for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= sup_prime_[i] * rhs[i + 1];
    }

    std::size_t size() const { return inv_pivot_.size(); }

private:
    std::vector<double> sub_;
    std::vector<double> sup_prime_;
    std::vector<double> inv_pivot_;
};

}  // namespace frontlab
