#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>

#include "flatband/errors.hpp"

namespace flatband {

struct QuadratureOptions {
    std::size_t points = 4096;  ///< uniform grid size over one period
    double tolerance = 1e-10;   ///< allowed change when the grid is doubled
};

struct QuadratureResult {
    double value = 0.0;
    double refinement_delta = 0.0;  ///< |I(2n) - I(n)|
    std::size_t points = 0;         ///< grid size of the returned value
};

namespace quad {

/// (1/2pi) * integral over [-pi, pi) of a 2pi-periodic integrand, composite trapezoid on n points.
/// The grid contains k = -pi and k = 0 and is symmetric under k -> -k (mod 2pi).
template <class F>
double periodic_mean(F&& f, std::size_t n) {
    const double h = 2.0 * std::numbers::pi / static_cast<double>(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sum += f(-std::numbers::pi + h * static_cast<double>(i));
    }
    return sum / static_cast<double>(n);
}

/// Periodic mean with a grid-doubling convergence check. For smooth periodic integrands the
/// trapezoid rule converges geometrically, so the doubled-grid value is returned.
template <class F>
QuadratureResult periodic_mean_checked(F&& f, const QuadratureOptions& opts, const std::string& what) {
    const double coarse = periodic_mean(f, opts.points);
    const double fine = periodic_mean(f, 2 * opts.points);
    const double delta = std::abs(fine - coarse);
    if (!(delta <= opts.tolerance)) {
        throw QuadratureNotConverged(what + ": grid doubling " + std::to_string(opts.points) +
                                     " -> " + std::to_string(2 * opts.points) + " changed value by " +
                                     std::to_string(delta));
    }
    return {fine, delta, 2 * opts.points};
}

} // namespace quad
} // namespace flatband
