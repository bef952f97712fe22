#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "lpp/ctf.hpp"
#include "lpp/physics.hpp"
#include "lpp/raster.hpp"

namespace lpp {

/// Fringe wavevector on the detector, cycles per meter.
struct Wavevector {
    double qx = 0.0;
    double qy = 0.0;

    double magnitude() const noexcept;
    double angle() const noexcept;  ///< direction of the laser axis, rad
    double period() const noexcept { return 1.0 / magnitude(); }
};

/// Dominant fringe wavevector of an image: DFT peak, then continuous
/// refinement of |sum I(r) exp(-2 pi i q.r)|. Returned in the half plane
/// qy > 0 (or qy = 0, qx > 0).
Wavevector estimate_standing_wave_vector(const RasterImage& image);

/// Replaces pixels deviating by more than `mad_factor` median absolute
/// deviations from a 5x5 median filter with the filtered value. Returns the
/// number of pixels replaced.
std::size_t remove_dead_pixels(RasterImage& image, double mad_factor = 6.0);

struct RonchigramHints {
    ElectronBeam beam;
    double laser_wavelength = 1064e-9;
    double focal_length = 20e-3;
    double magnification = 1.0;
    /// plate offset; defaults to -(pi/4) k / k_L^2
    std::optional<double> delta;
    /// starting values
    double peak_phase = 0.5235987755982988;
    double numerical_aperture = 0.026;
    double theta_cl = 0.0;
    /// used when the image has no detectable fringes (e.g. laser off)
    std::optional<Wavevector> wavevector;
    std::size_t outer_iterations = 5;
};

struct RonchigramFit {
    Wavevector wavevector;
    double center_x = 0.0;  ///< pixels, image coordinates
    double center_y = 0.0;
    double peak_phase = 0.0;
    double numerical_aperture = 0.0;
    double theta_cl = 0.0;
    double residual_norm = 0.0;  ///< RMS of (image - model) / background
    double delta = 0.0;          ///< plate offset assumed by the model, m
    double background = 0.0;     ///< recorded counts far from the laser
    std::size_t dead_pixels = 0;
    /// objective after initialization and after each outer repetition
    std::vector<double> objective_history;
};

/// Fits a recorded Ronchigram (counts) for the laser phase, mode NA and
/// coincidence-loss parameter.
RonchigramFit fit_ronchigram(const RasterImage& image, const RonchigramHints& hints);

/// Synthetic Ronchigram in recorded counts for the given fit parameters, on
/// the grid of `like`.
RasterImage ronchigram_model(const RonchigramFit& fit, const RonchigramHints& hints,
                             const RasterImage& like);

/// Profiles across the fringes, averaged over adjacent crests and troughs.
struct FringeProfiles {
    std::vector<double> position;  ///< transverse coordinate on the detector, m
    std::vector<double> crest;
    std::vector<double> trough;
    std::size_t crest_count = 0;
    std::size_t trough_count = 0;
};

/// Samples `crests` crest lines and `troughs` trough lines nearest the fitted
/// center, each along the fringe direction, and averages them.
FringeProfiles extract_fringe_profiles(const RasterImage& image, const RonchigramFit& fit,
                                       std::size_t crests = 62, std::size_t troughs = 61);

/// Elliptical distortion of Thon rings: ring radius at azimuth phi is
/// proportional to (1 + p cos 2phi + q sin 2phi)^(-1/2).
struct Ellipse {
    double ratio = 1.0;  ///< major / minor axis, >= 1
    double angle = 0.0;  ///< major-axis azimuth in [0, pi)
    double p = 0.0;
    double q = 0.0;

    /// Relative ring radius at azimuth phi, normalized to unit angular mean.
    double relative_radius(double phi) const;
};

struct AstigmatismOptions {
    WedgeExclusion wedge{};
    double min_frequency = 0.0;  ///< 1/m
    double max_frequency = 0.0;  ///< 1/m, 0 = grid limit
    std::size_t sectors = 36;
    double smoothing_sigma = 1.0;  ///< bins
};

struct AstigmatismCorrection {
    RasterImage spectrum;
    Ellipse ellipse;
    /// ring radii averaged over angle in the input, 1/m
    std::vector<double> ring_radii;
};

/// Estimates the ring ellipse from per-sector minima and resamples the
/// spectrum so rings become circles with unchanged mean radii.
AstigmatismCorrection correct_astigmatism(const RasterImage& spectrum,
                                          const AstigmatismOptions& options = {});

/// Resamples a centered frequency-plane raster: out(s, phi) = in(s r(phi)).
RasterImage circularize(const RasterImage& spectrum, const Ellipse& ellipse);

struct ZeroSearchOptions {
    double smoothing_sigma = 1.0;  ///< Gaussian pre-smoothing, bins
    double min_frequency = 0.0;    ///< 1/m
    double max_frequency = 0.0;    ///< 1/m, 0 = profile end
    /// a minimum must lie this fraction below the lower of its neighboring maxima
    double min_prominence = 0.05;
};

/// Minima of a radial profile, refined by local quadratic interpolation.
std::vector<double> locate_ctf_zeros(const RadialProfile& profile,
                                     const ZeroSearchOptions& options = {});

/// CTF zero with its assigned phase, n pi.
struct PhasedZero {
    double frequency = 0.0;
    double phase = 0.0;
};

/// Assigns consecutive multiples of pi to increasing zero frequencies,
/// starting at `first_index` pi. The phase zeta = eta - gamma decreases with
/// s in overfocus (defocus < 0) and increases in underfocus.
std::vector<PhasedZero> assign_zero_phases(std::span<const double> zeros, double defocus_sign,
                                           long first_index = 0);

/// zeta(s) = a s^4 + b s^2 + c with linearized covariance.
struct DefocusPolynomial {
    double a = 0.0;  ///< rad m^4
    double b = 0.0;  ///< rad m^2
    double c = 0.0;  ///< rad
    double covariance[3][3] = {};
    double residual_rms = 0.0;  ///< rad
    bool quartic_fixed = false;
};

/// Least-squares fit through the phased zeros. Needs 3 zeros, or 2 with
/// `fixed_a` set.
DefocusPolynomial fit_defocus_polynomial(std::span<const PhasedZero> zeros,
                                         std::optional<double> fixed_a = std::nullopt);

/// Defocus and spherical aberration implied by the polynomial coefficients:
/// b = pi dZ lambda, a = -(pi/2) C_s lambda^3.
double defocus_from_quadratic(double b, const ElectronBeam& beam);
double spherical_aberration_from_quartic(double a, const ElectronBeam& beam);
double quartic_from_spherical_aberration(double cs, const ElectronBeam& beam);

struct CtfFit {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;  ///< effective phase of the unscattered beam, wrapped to (-pi/2, pi/2]
    double defocus = 0.0;
    double spherical_aberration = 0.0;
    double covariance[3][3] = {};
    Ellipse ellipse;
    std::vector<double> zero_locations;
    RadialProfile profile;
};

struct CtfFitOptions {
    ElectronBeam beam;
    double defocus_sign = -1.0;  ///< sign of the true defocus; not observable from |FT|
    WedgeExclusion wedge{0.2617993877991494, 0.0};
    bool correct_astigmatism = true;
    ZeroSearchOptions zeros;
    std::optional<double> known_spherical_aberration;  ///< fixes a when set
};

/// Thon-ring fit of an amplitude spectrum.
CtfFit fit_ctf(const RasterImage& spectrum, const CtfFitOptions& options);

struct PhaseScanResult {
    std::vector<double> positions;  ///< m
    std::vector<double> phases;     ///< rad
    double peak_to_peak = 0.0;      ///< rad
    double period = 0.0;            ///< m
};

/// Peak-to-peak from the population standard deviation times 2^(3/2); period
/// from a least-squares sinusoid periodogram refined in continuous frequency.
PhaseScanResult analyze_phase_scan(std::span<const double> positions, std::span<const double> phases);
PhaseScanResult analyze_phase_scan(std::span<const std::pair<double, CtfFit>> scan);

}  // namespace lpp
