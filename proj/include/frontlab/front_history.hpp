#pragma once

#include <optional>
#include <span>
#include <vector>

namespace frontlab {

/// Level-set positions over time. Positions are lab-frame radii.
struct FrontHistory {
    std::vector<double> times;
    std::vector<double> positions;
    double level = 0.5;
    std::optional<int> angle_index;

    std::size_t size() const { return times.size(); }
    void push(double t, double r) {
        times.push_back(t);
        positions.push_back(r);
    }
};

/// Position where u crosses `level`, by linear interpolation between the bracketing nodes.
/// The crossing is searched over nodes with index in [first, last] (default: all).
/// Throws NumericalError(tracking) on zero or multiple crossings.
double track_level_set(std::span<const double> grid, std::span<const double> u, double level);
double track_level_set(std::span<const double> grid, std::span<const double> u, double level,
                       std::size_t first, std::size_t last);

}  // namespace frontlab
