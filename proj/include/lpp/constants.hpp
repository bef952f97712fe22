#pragma once

#include <numbers>

namespace lpp {

/// CODATA 2018 values, SI units.
namespace constants {
inline constexpr double pi = std::numbers::pi;
/// speed of light in vacuum, m/s (exact)
inline constexpr double c = 299792458.0;
/// Planck constant, J s (exact)
inline constexpr double h = 6.62607015e-34;
/// reduced Planck constant, J s
inline constexpr double hbar = h / (2.0 * pi);
/// elementary charge, C (exact)
inline constexpr double e = 1.602176634e-19;
/// electron rest mass, kg
inline constexpr double electron_mass = 9.1093837015e-31;
/// vacuum electric permittivity, F/m
inline constexpr double epsilon0 = 8.8541878128e-12;
/// electron rest energy, J
inline constexpr double electron_rest_energy = electron_mass * c * c;
}  // namespace constants

/// Multiply a value by one of these to convert it to SI; divide to convert back.
namespace units {
inline constexpr double kV = 1e3;
inline constexpr double mm = 1e-3;
inline constexpr double um = 1e-6;
inline constexpr double nm = 1e-9;
inline constexpr double pm = 1e-12;
inline constexpr double per_nm = 1e9;
inline constexpr double deg = std::numbers::pi / 180.0;
inline constexpr double mrad = 1e-3;
/// GW/cm^2 in W/m^2
inline constexpr double GW_per_cm2 = 1e13;
inline constexpr double meV = 1e-3 * constants::e;
}  // namespace units

}  // namespace lpp
