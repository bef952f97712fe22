#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "detail/optimize.hpp"
#include "detail/summation.hpp"
#include "lpp/errors.hpp"
#include "lpp/estimation.hpp"

namespace lpp {

using constants::pi;

namespace {

// Fraction of variance explained by offset + cos + sin at frequency nu.
double sinusoid_power(std::span<const double> x, std::span<const double> y, double nu, double rss0)
{
    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    Eigen::Vector3d aty = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const Eigen::Vector3d row(1.0, std::cos(2 * pi * nu * x[i]), std::sin(2 * pi * nu * x[i]));
        ata += row * row.transpose();
        aty += row * y[i];
    }
    const Eigen::Vector3d coef = ata.ldlt().solve(aty);
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - coef(0) - coef(1) * std::cos(2 * pi * nu * x[i]) -
                         coef(2) * std::sin(2 * pi * nu * x[i]);
        rss += r * r;
    }
    return 1.0 - rss / rss0;
}

}  // namespace

PhaseScanResult analyze_phase_scan(std::span<const double> positions, std::span<const double> phases)
{
    const std::size_t n = positions.size();
    detail::require(n == phases.size(), "positions and phases differ in length");
    detail::require(n >= 8, "phase scans need at least 8 positions");
    for (std::size_t i = 0; i < n; ++i)
        detail::require(std::isfinite(positions[i]) && std::isfinite(phases[i]),
                        "phase scan values must be finite");

    PhaseScanResult out;
    out.positions.assign(positions.begin(), positions.end());
    out.phases.assign(phases.begin(), phases.end());

    detail::CompensatedSum sum;
    for (double c : phases)
        sum.add(c);
    const double mean = sum.value() / static_cast<double>(n);
    detail::CompensatedSum ss;
    for (double c : phases)
        ss.add((c - mean) * (c - mean));
    const double rss0 = ss.value();
    out.peak_to_peak = std::sqrt(rss0 / static_cast<double>(n)) * std::pow(2.0, 1.5);

    const auto [lo_it, hi_it] = std::minmax_element(positions.begin(), positions.end());
    const double span = (*hi_it - *lo_it) * static_cast<double>(n) / static_cast<double>(n - 1);
    detail::require(span > 0.0, "phase scan positions must not all coincide");
    if (!(rss0 > 0.0))
        throw EstimationError("phase scan has no variation; the period is undefined");

    const double nu_lo = 0.5 / span;
    const double nu_hi = 0.5 * static_cast<double>(n) / span;
    const double dnu = 1.0 / (8.0 * span);
    auto negative_power = [&](double nu) { return -sinusoid_power(positions, phases, nu, rss0); };
    double best_nu = nu_lo;
    double best = negative_power(nu_lo);
    for (double nu = nu_lo + dnu; nu <= nu_hi; nu += dnu) {
        const double v = negative_power(nu);
        if (v < best) {
            best = v;
            best_nu = nu;
        }
    }
    const auto refined = detail::bounded_minimize(negative_power, std::max(nu_lo, best_nu - dnu),
                                                  best_nu + dnu, 9, dnu * 1e-9);
    out.period = 1.0 / refined.x;
    if (out.period > 1.05 * span) {
        std::ostringstream msg;
        msg << "estimated period " << out.period << " m exceeds the scan span " << span
            << " m; scan at least one full period";
        throw EstimationError(msg.str());
    }
    return out;
}

PhaseScanResult analyze_phase_scan(std::span<const std::pair<double, CtfFit>> scan)
{
    std::vector<double> positions;
    std::vector<double> phases;
    for (const auto& [x, fit] : scan) {
        positions.push_back(x);
        phases.push_back(fit.c);
    }
    return analyze_phase_scan(positions, phases);
}

}  // namespace lpp
