#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace lpp::detail {

struct ScalarMinimum {
    double x = 0.0;
    double value = 0.0;
};

/// Minimizes f on [lo, hi]: a uniform scan of `coarse` points picks the
/// bracket, golden-section search refines it to an absolute tolerance.
ScalarMinimum bounded_minimize(const std::function<double(double)>& f, double lo, double hi,
                               std::size_t coarse, double tolerance);

struct SimplexMinimum {
    std::vector<double> x;
    double value = 0.0;
    std::size_t evaluations = 0;
    bool converged = false;
};

/// Nelder-Mead simplex. Stops when the spread of simplex values falls below
/// rel_tolerance * |best value| (or an absolute floor) or after max_evaluations.
SimplexMinimum simplex_minimize(const std::function<double(const std::vector<double>&)>& f,
                                std::vector<double> start, std::vector<double> steps,
                                double rel_tolerance, std::size_t max_evaluations);

struct LeastSquaresFit {
    std::vector<double> x;
    double cost = 0.0;  ///< sum of squared residuals
    bool converged = false;
};

/// Trust-region Levenberg-Marquardt on m residuals with a finite-difference
/// Jacobian. `scales` sets the typical size of each parameter.
LeastSquaresFit least_squares(
    const std::function<void(const std::vector<double>&, std::vector<double>&)>& residuals,
    std::size_t m, std::vector<double> start, std::vector<double> scales, std::size_t max_iterations = 200);

}  // namespace lpp::detail
