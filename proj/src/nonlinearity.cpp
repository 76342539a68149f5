#include "frontlab/nonlinearity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "frontlab/errors.hpp"

namespace frontlab {

namespace {

constexpr int kSignSamples = 1000;

// Natural cubic spline second derivatives (Thomas algorithm on the interior nodes).
std::vector<double> spline_second_derivatives(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    std::vector<double> m(n, 0.0);
    if (n < 3) return m;
    const std::size_t k = n - 2;
    std::vector<double> a(k), b(k), c(k), d(k);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double h0 = x[i] - x[i - 1];
        const double h1 = x[i + 1] - x[i];
        a[i - 1] = h0 / 6.0;
        b[i - 1] = (h0 + h1) / 3.0;
        c[i - 1] = h1 / 6.0;
        d[i - 1] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
    }
    for (std::size_t i = 1; i < k; ++i) {
        const double w = a[i] / b[i - 1];
        b[i] -= w * c[i - 1];
        d[i] -= w * d[i - 1];
    }
    m[k] = d[k - 1] / b[k - 1];
    for (std::size_t i = k - 1; i-- > 0;) {
        m[i + 1] = (d[i] - c[i] * m[i + 2]) / b[i];
    }
    return m;
}

}  // namespace

BistableNonlinearity BistableNonlinearity::cubic(double theta) {
    BistableNonlinearity f;
    f.kind_ = NonlinearityKind::cubic;
    f.theta_ = theta;
    const double vertex = (1.0 + theta) / 3.0;
    const double fp_vertex = -3.0 * vertex * vertex + 2.0 * (1.0 + theta) * vertex - theta;
    f.f_lipschitz_ = std::max({std::abs(theta), std::abs(theta - 1.0), std::abs(fp_vertex)});
    return f;
}

BistableNonlinearity BistableNonlinearity::tabulated(std::vector<double> u, std::vector<double> fv,
                                                     std::optional<double> theta) {
    if (u.size() != fv.size() || u.size() < 4) {
        throw ParameterError("tabulated nonlinearity needs at least 4 (u, f) samples of equal length");
    }
    for (std::size_t i = 1; i < u.size(); ++i) {
        if (!(u[i] > u[i - 1])) throw ParameterError("tabulated nonlinearity: u samples must increase");
    }
    BistableNonlinearity f;
    f.kind_ = NonlinearityKind::tabulated;
    f.nodes_ = std::move(u);
    f.values_ = std::move(fv);
    f.second_ = spline_second_derivatives(f.nodes_, f.values_);

    if (theta) {
        f.theta_ = *theta;
    } else {
        // First - to + sign change of the spline on a fine sampling, refined by bisection.
        std::optional<double> root;
        const int n = 20 * kSignSamples;
        double prev_u = 1.0 / n;
        double prev_f = f.eval(prev_u);
        for (int i = 2; i < n && !root; ++i) {
            const double ui = static_cast<double>(i) / n;
            const double fi = f.eval(ui);
            if (prev_f < 0.0 && fi >= 0.0) {
                double lo = prev_u, hi = ui;
                for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (f.eval(mid) < 0.0 ? lo : hi) = mid;
                }
                root = 0.5 * (lo + hi);
            }
            prev_u = ui;
            prev_f = fi;
        }
        if (root) {
            f.theta_ = *root;
        } else {
            std::size_t best = 1;
            for (std::size_t i = 1; i + 1 < f.nodes_.size(); ++i) {
                if (std::abs(f.values_[i]) < std::abs(f.values_[best])) best = i;
            }
            f.theta_ = f.nodes_[best];
        }
    }

    double lip = 0.0;
    for (int i = 0; i <= 10 * kSignSamples; ++i) {
        lip = std::max(lip, std::abs(f.deriv(static_cast<double>(i) / (10 * kSignSamples))));
    }
    f.f_lipschitz_ = lip;
    return f;
}

std::size_t BistableNonlinearity::segment(double u) const {
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), u);
    std::size_t i = (it == nodes_.begin()) ? 0 : static_cast<std::size_t>(it - nodes_.begin()) - 1;
    return std::min(i, nodes_.size() - 2);
}

double BistableNonlinearity::eval(double u) const {
    if (kind_ == NonlinearityKind::cubic) return u * (u - theta_) * (1.0 - u);
    const std::size_t i = segment(u);
    const double h = nodes_[i + 1] - nodes_[i];
    const double a = (nodes_[i + 1] - u) / h;
    const double b = (u - nodes_[i]) / h;
    return a * values_[i] + b * values_[i + 1] +
           ((a * a * a - a) * second_[i] + (b * b * b - b) * second_[i + 1]) * h * h / 6.0;
}

double BistableNonlinearity::deriv(double u) const {
    if (kind_ == NonlinearityKind::cubic) return -3.0 * u * u + 2.0 * (1.0 + theta_) * u - theta_;
    const std::size_t i = segment(u);
    const double h = nodes_[i + 1] - nodes_[i];
    const double a = (nodes_[i + 1] - u) / h;
    const double b = (u - nodes_[i]) / h;
    return (values_[i + 1] - values_[i]) / h +
           ((1.0 - 3.0 * a * a) * second_[i] + (3.0 * b * b - 1.0) * second_[i + 1]) * h / 6.0;
}

double BistableNonlinearity::deriv2(double u) const {
    if (kind_ == NonlinearityKind::cubic) return -6.0 * u + 2.0 * (1.0 + theta_);
    const std::size_t i = segment(u);
    const double h = nodes_[i + 1] - nodes_[i];
    const double a = (nodes_[i + 1] - u) / h;
    const double b = (u - nodes_[i]) / h;
    return a * second_[i] + b * second_[i + 1];
}

BistableNonlinearity make_cubic(double theta) {
    if (!(theta > 0.0 && theta < 0.5)) {
        throw ParameterError("cubic nonlinearity requires theta in (0, 1/2) (positive mass of f); got " +
                             std::to_string(theta));
    }
    return BistableNonlinearity::cubic(theta);
}

BistableNonlinearity load_tabulated(const std::string& csv_path, std::optional<double> theta) {
    std::ifstream in(csv_path);
    if (!in) throw ParameterError("cannot open nonlinearity table '" + csv_path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParameterError("empty nonlinearity table '" + csv_path + "'");
    line.erase(std::remove_if(line.begin(), line.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); }),
               line.end());
    if (line != "u,f") throw ParameterError("nonlinearity table header must be 'u,f'");
    std::vector<double> u, f;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        double a = 0, b = 0;
        char comma = 0;
        if (!(ss >> a >> comma >> b) || comma != ',') {
            throw ParameterError("malformed nonlinearity table row: '" + line + "'");
        }
        u.push_back(a);
        f.push_back(b);
    }
    return BistableNonlinearity::tabulated(std::move(u), std::move(f), theta);
}

bool ValidationReport::all_pass() const {
    return std::all_of(conditions.begin(), conditions.end(), [](const ConditionResult& c) { return c.pass; });
}

const ConditionResult& ValidationReport::at(const std::string& name) const {
    for (const auto& c : conditions) {
        if (c.name == name) return c;
    }
    throw ParameterError("no validation condition named '" + name + "'");
}

double integrate_unit(const BistableNonlinearity& f, int intervals) {
    if (intervals % 2 != 0) ++intervals;
    const double h = 1.0 / intervals;
    double sum = f.eval(0.0) + f.eval(1.0);
    for (int i = 1; i < intervals; ++i) sum += (i % 2 ? 4.0 : 2.0) * f.eval(i * h);
    return sum * h / 3.0;
}

ValidationReport validate(const BistableNonlinearity& f) {
    ValidationReport report;
    const double theta = f.theta();

    // Interior samples of (0, theta) and (theta, 1), endpoints excluded.
    double max_below = -std::numeric_limits<double>::infinity();
    double min_above = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= kSignSamples; ++i) {
        const double s = static_cast<double>(i) / (kSignSamples + 1);
        max_below = std::max(max_below, f.eval(theta * s));
        min_above = std::min(min_above, f.eval(theta + (1.0 - theta) * s));
    }
    const bool theta_interior = theta > 0.0 && theta < 1.0;
    report.conditions.push_back({kCondNegativeBelowTheta, theta_interior && max_below < 0.0, -max_below});
    report.conditions.push_back({kCondPositiveAboveTheta, theta_interior && min_above > 0.0, min_above});

    const double slope = std::max(f.deriv(0.0), f.deriv(1.0));
    report.conditions.push_back({kCondStableEndpoints, slope < 0.0, -slope});

    const double mass = integrate_unit(f);
    report.conditions.push_back({kCondPositiveMass, mass > 1e-10, mass});
    return report;
}

}  // namespace frontlab
