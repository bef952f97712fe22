#pragma once

#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "lpp/physics.hpp"
#include "lpp/raster.hpp"

namespace lpp {

/// Objective-lens and coherence parameters.
struct OpticsConfig {
    double focal_length = 20e-3;  ///< effective focal length f, m
    /// defocus, m. Positive = underfocus, negative = overfocus.
    double defocus = 0.0;
    double spherical_aberration = 0.0;  ///< C_s, m
    /// half-maximum radius of the Gaussian envelope, 1/m (+inf disables it)
    double envelope_halfmax_radius = 1.0 / 0.51e-9;
    /// defocus difference between the two principal directions, m; the
    /// defocus at azimuth phi is defocus + (astigmatism / 2) cos 2(phi - angle)
    double defocus_astigmatism = 0.0;
    double astigmatism_angle = 0.0;  ///< rad
};

void validate(const OpticsConfig& config);

/// Position of the unscattered beam relative to the laser mode.
struct PlateAlignment {
    double axial_offset = 0.0;    ///< along the laser propagation axis, m
    double lateral_offset = 0.0;  ///< transverse to the laser axis, m
    /// orientation of the laser axis in the frequency plane, rad in [0, pi)
    double rotation = 0.0;
};

void validate(const PlateAlignment& align);

/// gamma(s) = pi/2 (-2 dZ lambda s^2 + C_s lambda^3 s^4) for radial frequency s.
double aberration_phase(double s, const OpticsConfig& config, const ElectronBeam& beam);

/// Same, at (s_x, s_y), including defocus astigmatism.
double aberration_phase(double sx, double sy, const OpticsConfig& config,
                        const ElectronBeam& beam);

/// Gaussian in |s| equal to 1/2 at the configured half-maximum radius.
double envelope(double s, const OpticsConfig& config) noexcept;

/// Laser phase seen by frequency (s_x, s_y): the diffraction-plane point
/// s lambda_e f, rotated into the laser frame and shifted by the alignment
/// offsets, fed to phase_profile.
double laser_phase_of_frequency(double sx, double sy, const LaserMode& mode,
                                const PlateAlignment& align, double focal_length,
                                const ElectronBeam& beam) noexcept;

/// Square or rectangular frequency grid with DC at (nx/2, ny/2).
struct FrequencyGrid {
    std::size_t nx = 512;
    std::size_t ny = 512;
    double step = 1e7;  ///< 1/m

    /// Grid matching the DFT of an nx x ny image with the given pixel size.
    static FrequencyGrid for_image(std::size_t width, std::size_t height, double pixel_size);
};

/// Contrast transfer function sampled on a FrequencyGrid.
///
/// Values are complex. The inversion-symmetric form is real; the general
/// form is Hermitian, CTF(-s) = conj(CTF(s)), and reduces to the symmetric
/// one whenever eta(s) = eta(-s).
class CtfMap {
public:
    CtfMap(FrequencyGrid grid, bool symmetric);

    std::size_t nx() const noexcept { return grid_.nx; }
    std::size_t ny() const noexcept { return grid_.ny; }
    double step() const noexcept { return grid_.step; }
    const FrequencyGrid& grid() const noexcept { return grid_; }
    bool symmetric() const noexcept { return symmetric_; }

    double frequency_x(std::size_t ix) const noexcept;
    double frequency_y(std::size_t iy) const noexcept;

    std::complex<double>& at(std::size_t ix, std::size_t iy) { return values_[iy * grid_.nx + ix]; }
    const std::complex<double>& at(std::size_t ix, std::size_t iy) const
    {
        return values_[iy * grid_.nx + ix];
    }
    std::span<const std::complex<double>> values() const noexcept { return values_; }

    RasterImage real_part() const;
    RasterImage magnitude() const;

private:
    FrequencyGrid grid_;
    bool symmetric_;
    std::vector<std::complex<double>> values_;
};

/// CTF over the grid. `symmetric` selects sin(eta(s) - eta(0) + gamma(s)) E(s);
/// otherwise the general form
/// (i/2)(e^{i zeta(0)} e^{-i zeta(-s)} - e^{-i zeta(0)} e^{i zeta(s)}) E(s).
/// Requires step <= lambda_L / (8 lambda_e f) whenever the laser phase is nonzero.
CtfMap ctf_map(const FrequencyGrid& grid, const OpticsConfig& config, const LaserMode& mode,
               const PlateAlignment& align, const ElectronBeam& beam, bool symmetric);

/// Largest frequency step that resolves the standing-wave structure.
double max_ctf_step(const LaserMode& mode, double focal_length, const ElectronBeam& beam) noexcept;

/// Weak-phase-object image: 1 + IFT(-2 FT(phi) CTF). The object must be
/// square and its DFT grid must match the CTF grid.
RasterImage simulate_weak_phase_image(const RasterImage& object_phase, const CtfMap& ctf);

/// |FT(image - mean)| with DC at the grid center, in the frequency plane.
RasterImage amplitude_spectrum(const RasterImage& image);

struct RadialProfile {
    std::vector<double> frequency;  ///< bin centers, 1/m
    std::vector<double> value;
    std::vector<std::size_t> count;  ///< pixels per bin

    std::size_t size() const noexcept { return frequency.size(); }
};

/// Wedge of angles excluded from angular averages: |angle - axis| < half_angle
/// (mod pi), i.e. both sides of the laser axis.
struct WedgeExclusion {
    double half_angle = 0.0;
    double axis_angle = 0.0;
};

/// Per-radius RMS over retained angles of a frequency-plane raster. Bins are
/// one frequency step wide and cover complete circles inside the grid.
RadialProfile rms_angular_average(const RasterImage& map, WedgeExclusion wedge = {});
RadialProfile rms_angular_average(const CtfMap& map, WedgeExclusion wedge = {});

/// Stripes of strong laser phase in the frequency plane.
struct StripeSignature {
    std::size_t count = 0;
    /// stripe centers along the direction transverse to the laser axis, 1/m
    std::vector<double> centers;
    std::vector<double> half_widths;
    double axis_angle = 0.0;
};

/// Locates the stripes where max(eta(s), eta(-s)) exceeds
/// `threshold_fraction * eta0`. Zero lateral offset gives one stripe through
/// the origin; offsets beyond about w0 split it into two at +-offset/(lambda_e f).
StripeSignature misalignment_signature(const PlateAlignment& align, const LaserMode& mode,
                                       double focal_length, const ElectronBeam& beam,
                                       double threshold_fraction = 0.1353352832366127);

}  // namespace lpp
