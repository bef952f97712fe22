#pragma once

#include "lpp/constants.hpp"

namespace lpp {

/// Electron beam kinematics for a given accelerating voltage. SI units.
struct ElectronBeam {
    double voltage = 0.0;     ///< V
    double wavelength = 0.0;  ///< relativistic de Broglie wavelength, m
    double wavenumber = 0.0;  ///< 2 pi / wavelength, rad/m
    double speed = 0.0;       ///< m/s

    double kinetic_energy() const noexcept { return constants::e * voltage; }
    double lorentz_factor() const noexcept
    {
        return 1.0 + kinetic_energy() / constants::electron_rest_energy;
    }
};

/// Builds the beam from the accelerating voltage in volts (use `units::kV`).
/// Throws ValidationError for non-positive voltage.
ElectronBeam electron_beam_from_voltage(double voltage);

/// Paraxial standing-wave Gaussian mode crossing the electron beam.
///
/// Waist, Rayleigh range and kappa are derived from wavelength and NA on
/// every call so they can never drift out of sync with them.
class LaserMode {
public:
    LaserMode() = default;

    double wavelength() const noexcept { return wavelength_; }
    double numerical_aperture() const noexcept { return numerical_aperture_; }
    /// angle between the laser axis and the plane normal to the electron beam, rad
    double tilt() const noexcept { return tilt_; }
    /// phase at the antinode on axis for zero tilt, rad
    double peak_phase() const noexcept { return peak_phase_; }

    double waist() const noexcept;           ///< lambda_L / (pi NA)
    double rayleigh_range() const noexcept;  ///< lambda_L / (pi NA^2)
    double kappa() const noexcept;           ///< 2 / NA^2
    double wavenumber() const noexcept;      ///< 2 pi / lambda_L

    LaserMode with_peak_phase(double peak_phase) const;
    LaserMode with_numerical_aperture(double numerical_aperture) const;
    LaserMode with_tilt(double tilt) const;

    friend LaserMode laser_mode_geometry(double, double, double, double);

private:
    double wavelength_ = 1064e-9;
    double numerical_aperture_ = 0.026;
    double tilt_ = 0.0;
    double peak_phase_ = 0.0;
};

/// Validates and builds a LaserMode. Requires 0 < NA <= 0.1, wavelength > 0,
/// peak_phase >= 0.
LaserMode laser_mode_geometry(double wavelength, double numerical_aperture, double tilt,
                              double peak_phase);

/// Intensity and power of the cavity field.
///
/// "Antinode intensity" is the standing-wave intensity at an antinode on the
/// mode axis. Two counter-propagating Gaussian beams of power P each double
/// the field at the antinode, so I = 4 * (2P / (pi w0^2)) = 8P / (pi w0^2).
struct LaserField {
    LaserMode mode;
    double antinode_intensity = 0.0;  ///< W/m^2
    double circulating_power = 0.0;   ///< W, one direction

    /// True when intensity and power satisfy the standing-wave relation to
    /// the given relative tolerance.
    bool is_consistent(double rel_tol = 1e-9) const noexcept;
};

LaserField laser_field_from_power(const LaserMode& mode, double circulating_power);
LaserField laser_field_from_intensity(const LaserMode& mode, double antinode_intensity);

/// Field amplitude of a traveling wave with the given intensity,
/// E = sqrt(2 I / (eps0 c)).
double field_amplitude_from_intensity(double intensity);

/// U = e^2 E^2 lambda^2 / (16 pi^2 m c^2), joules.
double ponderomotive_potential(double field_amplitude, double wavelength);

/// Phase accumulated at the antinode, eta0 = (1 / hbar v) * integral U dl.
///
/// The transverse Gaussian profile exp(-2 z^2 / w0^2) along the electron
/// path integrates to w0 sqrt(pi/2). The electron speed is the relativistic
/// beam speed; no further relativistic correction is applied.
double peak_phase_from_intensity(double antinode_intensity, const LaserMode& mode,
                                 const ElectronBeam& beam);

/// Laser-induced electron phase at plate-plane position (x, y), with x along
/// the laser axis and y transverse to it, both measured from the focus.
double phase_profile(double x, double y, const LaserMode& mode) noexcept;

}  // namespace lpp
