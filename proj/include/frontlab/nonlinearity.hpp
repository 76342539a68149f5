#pragma once

#include <optional>
#include <string>
#include <vector>

namespace frontlab {

enum class NonlinearityKind { cubic, tabulated };

/// Bistable reaction term f on [0, 1] with stable zeros 0, 1 and an unstable zero theta.
///
/// Two representations are supported: the cubic u(u - theta)(1 - u), and a natural cubic
/// spline through user samples (derivatives are those of the spline). Instances are
/// immutable after construction.
class BistableNonlinearity {
public:
    static BistableNonlinearity cubic(double theta);

    /// Spline through (u, f) samples. `theta` defaults to the interior sign change of the
    /// samples (or, failing that, the interior sample with the smallest |f|).
    static BistableNonlinearity tabulated(std::vector<double> u, std::vector<double> f,
                                          std::optional<double> theta = std::nullopt);

    double eval(double u) const;
    double deriv(double u) const;
    double deriv2(double u) const;

    double theta() const { return theta_; }
    /// sup |f'| over [0, 1].
    double f_lipschitz() const { return f_lipschitz_; }
    NonlinearityKind kind() const { return kind_; }

private:
    BistableNonlinearity() = default;
    std::size_t segment(double u) const;

    NonlinearityKind kind_ = NonlinearityKind::cubic;
    double theta_ = 0.0;
    double f_lipschitz_ = 0.0;
    // Spline data (tabulated kind only).
    std::vector<double> nodes_;
    std::vector<double> values_;
    std::vector<double> second_;
};

/// The cubic f(u) = u (u - theta)(1 - u); theta must lie in (0, 1/2).
BistableNonlinearity make_cubic(double theta);

/// Reads a CSV file with header `u,f` and builds a tabulated nonlinearity.
BistableNonlinearity load_tabulated(const std::string& csv_path, std::optional<double> theta = std::nullopt);

struct ConditionResult {
    std::string name;
    bool pass = false;
    double margin = 0.0;  // positive when the condition holds
};

struct ValidationReport {
    std::vector<ConditionResult> conditions;

    bool all_pass() const;
    const ConditionResult& at(const std::string& name) const;
};

inline constexpr const char* kCondNegativeBelowTheta = "f<0 on (0,theta)";
inline constexpr const char* kCondPositiveAboveTheta = "f>0 on (theta,1)";
inline constexpr const char* kCondStableEndpoints = "f'(0)<0 and f'(1)<0";
inline constexpr const char* kCondPositiveMass = "integral f > 0";

/// Checks the four bistability conditions. Never throws; failures are in the report.
ValidationReport validate(const BistableNonlinearity& f);

/// Composite Simpson quadrature of f over [0, 1].
double integrate_unit(const BistableNonlinearity& f, int intervals = 2000);

}  // namespace frontlab
