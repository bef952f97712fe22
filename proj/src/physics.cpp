#include "lpp/physics.hpp"

#include <cmath>
#include <string>

#include "lpp/errors.hpp"

namespace lpp {

using namespace constants;

ElectronBeam electron_beam_from_voltage(double voltage)
{
    detail::require(std::isfinite(voltage) && voltage > 0.0,
                    "electron beam voltage must be positive, got " + std::to_string(voltage) + " V");
    ElectronBeam beam;
    beam.voltage = voltage;
    const double energy = e * voltage;
    // p c = sqrt(E (E + 2 m c^2))
    const double momentum_c = std::sqrt(energy * (energy + 2.0 * electron_rest_energy));
    beam.wavelength = h * c / momentum_c;
    beam.wavenumber = 2.0 * pi / beam.wavelength;
    const double gamma = beam.lorentz_factor();
    beam.speed = c * std::sqrt(1.0 - 1.0 / (gamma * gamma));
    return beam;
}

double LaserMode::waist() const noexcept { return wavelength_ / (pi * numerical_aperture_); }

double LaserMode::rayleigh_range() const noexcept
{
    return wavelength_ / (pi * numerical_aperture_ * numerical_aperture_);
}

double LaserMode::kappa() const noexcept
{
    return 2.0 / (numerical_aperture_ * numerical_aperture_);
}

double LaserMode::wavenumber() const noexcept { return 2.0 * pi / wavelength_; }

LaserMode LaserMode::with_peak_phase(double peak_phase) const
{
    return laser_mode_geometry(wavelength_, numerical_aperture_, tilt_, peak_phase);
}

LaserMode LaserMode::with_numerical_aperture(double numerical_aperture) const
{
    return laser_mode_geometry(wavelength_, numerical_aperture, tilt_, peak_phase_);
}

LaserMode LaserMode::with_tilt(double tilt) const
{
    return laser_mode_geometry(wavelength_, numerical_aperture_, tilt, peak_phase_);
}

LaserMode laser_mode_geometry(double wavelength, double numerical_aperture, double tilt,
                              double peak_phase)
{
    detail::require(std::isfinite(wavelength) && wavelength > 0.0,
                    "laser wavelength must be positive");
    detail::require(std::isfinite(numerical_aperture) && numerical_aperture > 0.0 &&
                        numerical_aperture <= 0.1,
                    "numerical aperture must lie in (0, 0.1] for the paraxial mode model, got " +
                        std::to_string(numerical_aperture));
    detail::require(std::isfinite(tilt), "laser tilt must be finite");
    detail::require(std::isfinite(peak_phase) && peak_phase >= 0.0,
                    "peak phase must be non-negative");
    LaserMode mode;
    mode.wavelength_ = wavelength;
    mode.numerical_aperture_ = numerical_aperture;
    mode.tilt_ = tilt;
    mode.peak_phase_ = peak_phase;
    return mode;
}

bool LaserField::is_consistent(double rel_tol) const noexcept
{
    const double w0 = mode.waist();
    const double expected = 8.0 * circulating_power / (pi * w0 * w0);
    const double scale = std::max(std::abs(expected), std::abs(antinode_intensity));
    if (scale == 0.0)
        return true;
    return std::abs(expected - antinode_intensity) <= rel_tol * scale;
}

LaserField laser_field_from_power(const LaserMode& mode, double circulating_power)
{
    detail::require(std::isfinite(circulating_power) && circulating_power >= 0.0,
                    "circulating power must be non-negative");
    const double w0 = mode.waist();
    return {mode, 8.0 * circulating_power / (pi * w0 * w0), circulating_power};
}

LaserField laser_field_from_intensity(const LaserMode& mode, double antinode_intensity)
{
    detail::require(std::isfinite(antinode_intensity) && antinode_intensity >= 0.0,
                    "antinode intensity must be non-negative");
    const double w0 = mode.waist();
    return {mode, antinode_intensity, antinode_intensity * pi * w0 * w0 / 8.0};
}

double field_amplitude_from_intensity(double intensity)
{
    detail::require(std::isfinite(intensity) && intensity >= 0.0,
                    "intensity must be non-negative");
    return std::sqrt(2.0 * intensity / (epsilon0 * c));
}

double ponderomotive_potential(double field_amplitude, double wavelength)
{
    detail::require(std::isfinite(field_amplitude) && field_amplitude >= 0.0,
                    "field amplitude must be non-negative");
    detail::require(std::isfinite(wavelength) && wavelength > 0.0,
                    "laser wavelength must be positive");
    return e * e * field_amplitude * field_amplitude * wavelength * wavelength /
           (16.0 * pi * pi * electron_mass * c * c);
}

double peak_phase_from_intensity(double antinode_intensity, const LaserMode& mode,
                                 const ElectronBeam& beam)
{
    detail::require(std::isfinite(antinode_intensity) && antinode_intensity >= 0.0,
                    "antinode intensity must be non-negative");
    // U is linear in I, so evaluate the per-unit-intensity potential and scale.
    const double u_per_intensity =
        e * e * (2.0 / (epsilon0 * c)) * mode.wavelength() * mode.wavelength() /
        (16.0 * pi * pi * electron_mass * c * c);
    const double path_integral = mode.waist() * std::sqrt(pi / 2.0);
    return antinode_intensity * (u_per_intensity * path_integral / (hbar * beam.speed));
}

double phase_profile(double x, double y, const LaserMode& mode) noexcept
{
    const double X = x / mode.rayleigh_range();
    const double Y = y / mode.waist();
    const double q = 1.0 + X * X;
    const double kappa = mode.kappa();
    const double theta = mode.tilt();
    const double envelope = 0.5 * std::exp(-2.0 * Y * Y / q) / std::sqrt(q);
    const double damping = std::exp(-theta * theta * kappa * q) * std::pow(q, -0.25);
    const double argument = 2.0 * X / q * Y * Y + 2.0 * kappa * X - 1.5 * std::atan(X);
    return mode.peak_phase() * envelope * (1.0 + damping * std::cos(argument));
}

}  // namespace lpp
