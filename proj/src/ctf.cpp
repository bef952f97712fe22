#include "lpp/ctf.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "detail/summation.hpp"
#include "lpp/errors.hpp"
#include "lpp/fft.hpp"
#include "lpp/log.hpp"

namespace lpp {

using constants::pi;
using cplx = std::complex<double>;

void validate(const OpticsConfig& config)
{
    detail::require(std::isfinite(config.focal_length) && config.focal_length > 0.0,
                    "focal length must be positive");
    detail::require(std::isfinite(config.defocus), "defocus must be finite");
    detail::require(std::isfinite(config.spherical_aberration) &&
                        config.spherical_aberration >= 0.0,
                    "spherical aberration must be non-negative");
    detail::require(!std::isnan(config.envelope_halfmax_radius) &&
                        config.envelope_halfmax_radius > 0.0,
                    "envelope half-maximum radius must be positive");
    detail::require(std::isfinite(config.defocus_astigmatism) &&
                        std::isfinite(config.astigmatism_angle),
                    "astigmatism parameters must be finite");
}

void validate(const PlateAlignment& align)
{
    detail::require(std::isfinite(align.axial_offset) && std::isfinite(align.lateral_offset),
                    "plate alignment offsets must be finite");
    detail::require(std::isfinite(align.rotation) && align.rotation >= 0.0 &&
                        align.rotation < pi,
                    "plate rotation must lie in [0, pi)");
}

double aberration_phase(double s, const OpticsConfig& config, const ElectronBeam& beam)
{
    detail::require(s >= 0.0, "radial spatial frequency must be non-negative");
    const double lam = beam.wavelength;
    const double s2 = s * s;
    return pi / 2.0 *
           (-2.0 * config.defocus * lam * s2 + config.spherical_aberration * lam * lam * lam * s2 * s2);
}

double aberration_phase(double sx, double sy, const OpticsConfig& config,
                        const ElectronBeam& beam)
{
    const double lam = beam.wavelength;
    const double s2 = sx * sx + sy * sy;
    double dz = config.defocus;
    if (config.defocus_astigmatism != 0.0 && s2 > 0.0) {
        const double phi = std::atan2(sy, sx);
        dz += 0.5 * config.defocus_astigmatism * std::cos(2.0 * (phi - config.astigmatism_angle));
    }
    return pi / 2.0 * (-2.0 * dz * lam * s2 + config.spherical_aberration * lam * lam * lam * s2 * s2);
}

double envelope(double s, const OpticsConfig& config) noexcept
{
    if (std::isinf(config.envelope_halfmax_radius))
        return 1.0;
    const double u = s / config.envelope_halfmax_radius;
    return std::exp(-std::log(2.0) * u * u);
}

double laser_phase_of_frequency(double sx, double sy, const LaserMode& mode,
                                const PlateAlignment& align, double focal_length,
                                const ElectronBeam& beam) noexcept
{
    const double scale = beam.wavelength * focal_length;
    const double px = sx * scale;
    const double py = sy * scale;
    const double c = std::cos(align.rotation);
    const double s = std::sin(align.rotation);
    const double x = px * c + py * s + align.axial_offset;
    const double y = -px * s + py * c + align.lateral_offset;
    return phase_profile(x, y, mode);
}

FrequencyGrid FrequencyGrid::for_image(std::size_t width, std::size_t height, double pixel_size)
{
    detail::require(width == height, "frequency grids with a single step need square images");
    detail::require(pixel_size > 0.0, "pixel size must be positive");
    return FrequencyGrid{width, height, 1.0 / (static_cast<double>(width) * pixel_size)};
}

CtfMap::CtfMap(FrequencyGrid grid, bool symmetric)
    : grid_(grid), symmetric_(symmetric), values_(grid.nx * grid.ny)
{
    detail::require(grid.nx >= 2 && grid.ny >= 2 && grid.nx % 2 == 0 && grid.ny % 2 == 0,
                    "frequency grid dimensions must be even and >= 2");
    detail::require(std::isfinite(grid.step) && grid.step > 0.0,
                    "frequency step must be positive");
}

double CtfMap::frequency_x(std::size_t ix) const noexcept
{
    return (static_cast<double>(ix) - static_cast<double>(grid_.nx / 2)) * grid_.step;
}

double CtfMap::frequency_y(std::size_t iy) const noexcept
{
    return (static_cast<double>(iy) - static_cast<double>(grid_.ny / 2)) * grid_.step;
}

RasterImage CtfMap::real_part() const
{
    RasterImage out(grid_.nx, grid_.ny, grid_.step, PlaneTag::frequency, ValueKind::ctf);
    auto dst = out.values();
    for (std::size_t i = 0; i < values_.size(); ++i)
        dst[i] = values_[i].real();
    return out;
}

RasterImage CtfMap::magnitude() const
{
    RasterImage out(grid_.nx, grid_.ny, grid_.step, PlaneTag::frequency, ValueKind::ctf);
    auto dst = out.values();
    for (std::size_t i = 0; i < values_.size(); ++i)
        dst[i] = std::abs(values_[i]);
    return out;
}

double max_ctf_step(const LaserMode& mode, double focal_length, const ElectronBeam& beam) noexcept
{
    return mode.wavelength() / (8.0 * beam.wavelength * focal_length);
}

CtfMap ctf_map(const FrequencyGrid& grid, const OpticsConfig& config, const LaserMode& mode,
               const PlateAlignment& align, const ElectronBeam& beam, bool symmetric)
{
    validate(config);
    validate(align);
    CtfMap map(grid, symmetric);
    const double f = config.focal_length;
    if (mode.peak_phase() > 0.0) {
        const double limit = max_ctf_step(mode, f, beam);
        if (grid.step > limit * (1.0 + 1e-12)) {
            std::ostringstream msg;
            msg << "sampling violation: frequency step " << grid.step
                << " 1/m does not resolve the standing wave; need <= " << limit << " 1/m";
            throw ValidationError(msg.str());
        }
    }

    const double eta_center = laser_phase_of_frequency(0.0, 0.0, mode, align, f, beam);
    const cplx w0 = std::polar(1.0, eta_center);
    const auto ny = static_cast<long>(grid.ny);
#pragma omp parallel for num_threads(fft::thread_count()) schedule(static)
    for (long iy = 0; iy < ny; ++iy) {
        const double sy = map.frequency_y(static_cast<std::size_t>(iy));
        for (std::size_t ix = 0; ix < grid.nx; ++ix) {
            const double sx = map.frequency_x(ix);
            const double gamma = aberration_phase(sx, sy, config, beam);
            const double env = envelope(std::hypot(sx, sy), config);
            const double eta = laser_phase_of_frequency(sx, sy, mode, align, f, beam);
            cplx value;
            if (symmetric) {
                value = std::sin(eta - eta_center + gamma) * env;
            } else {
                // gamma is even in s, so zeta(-s) only differs through eta
                const double eta_m = laser_phase_of_frequency(-sx, -sy, mode, align, f, beam);
                const cplx a = w0 * std::polar(1.0, -(eta_m + gamma));
                const cplx b = std::conj(w0) * std::polar(1.0, eta + gamma);
                value = cplx{0.0, 0.5} * (a - b) * env;
            }
            map.at(ix, static_cast<std::size_t>(iy)) = value;
        }
    }
    return map;
}

RasterImage simulate_weak_phase_image(const RasterImage& object_phase, const CtfMap& ctf)
{
    const std::size_t n = object_phase.width();
    detail::require(object_phase.width() == ctf.nx() && object_phase.height() == ctf.ny(),
                    "object and CTF grids differ in size");
    detail::require(object_phase.width() == object_phase.height(),
                    "weak-phase synthesis needs a square object");
    const double expected_step = 1.0 / (static_cast<double>(n) * object_phase.pixel_size());
    if (std::abs(ctf.step() - expected_step) > 1e-9 * expected_step) {
        std::ostringstream msg;
        msg << "CTF frequency step " << ctf.step() << " 1/m does not match the object grid ("
            << expected_step << " 1/m)";
        throw ValidationError(msg.str());
    }

    double peak_phase = 0.0;
    for (double v : object_phase.values())
        peak_phase = std::max(peak_phase, std::abs(v));
    if (peak_phase > 0.2)
        warn("simulate_weak_phase_image: max |phase| = " + std::to_string(peak_phase) +
             " rad exceeds the weak-phase range (0.2 rad)");

    const std::size_t w = n;
    const std::size_t h = n;
    std::vector<cplx> buffer(w * h);
    auto src = object_phase.values();
    for (std::size_t i = 0; i < buffer.size(); ++i)
        buffer[i] = src[i];
    fft::transform_2d(buffer, w, h, fft::Direction::forward);

    // The Nyquist row and column have no partner at +n/2 on the centered grid,
    // so they carry no transfer; this keeps the product Hermitian.
    const double norm = 1.0 / static_cast<double>(w * h);
    for (std::size_t y = 0; y < h; ++y) {
        const long ky = fft::signed_index(y, h);
        for (std::size_t x = 0; x < w; ++x) {
            const long kx = fft::signed_index(x, w);
            cplx& v = buffer[y * w + x];
            if (kx == -static_cast<long>(w / 2) || ky == -static_cast<long>(h / 2)) {
                v = 0.0;
                continue;
            }
            const auto cx = static_cast<std::size_t>(kx + static_cast<long>(w / 2));
            const auto cy = static_cast<std::size_t>(ky + static_cast<long>(h / 2));
            v *= -2.0 * ctf.at(cx, cy) * norm;
        }
    }
    fft::transform_2d(buffer, w, h, fft::Direction::backward);

    double peak = 0.0;
    double residue = 0.0;
    for (const auto& v : buffer) {
        peak = std::max(peak, std::abs(v.real()));
        residue = std::max(residue, std::abs(v.imag()));
    }
    if (residue > 1e-8 * std::max(peak, 1e-300) && residue > 1e-300)
        warn("simulate_weak_phase_image: imaginary residue " + std::to_string(residue) +
             " exceeds 1e-8 of the peak modulation");

    RasterImage out(w, h, object_phase.pixel_size(), PlaneTag::image, ValueKind::intensity);
    auto dst = out.values();
    for (std::size_t i = 0; i < buffer.size(); ++i)
        dst[i] = 1.0 + buffer[i].real();
    return out;
}

RasterImage amplitude_spectrum(const RasterImage& image)
{
    const std::size_t w = image.width();
    const std::size_t h = image.height();
    detail::require(w % 2 == 0 && h % 2 == 0, "amplitude spectrum needs even dimensions");
    detail::require(w == h, "amplitude spectrum needs a square image");
    detail::CompensatedSum total;
    for (double v : image.values())
        total.add(v);
    const double mean = total.value() / static_cast<double>(image.size());
    std::vector<cplx> buffer(w * h);
    auto src = image.values();
    for (std::size_t i = 0; i < buffer.size(); ++i)
        buffer[i] = src[i] - mean;
    fft::transform_2d(buffer, w, h, fft::Direction::forward);

    RasterImage out(w, h, 1.0 / (static_cast<double>(w) * image.pixel_size()),
                    PlaneTag::frequency, ValueKind::intensity);
    for (std::size_t y = 0; y < h; ++y) {
        const std::size_t cy = (y + h / 2) % h;
        for (std::size_t x = 0; x < w; ++x)
            out((x + w / 2) % w, cy) = std::abs(buffer[y * w + x]);
    }
    return out;
}

namespace {

template <typename ValueAt>
RadialProfile radial_rms(std::size_t w, std::size_t h, double step, WedgeExclusion wedge,
                         ValueAt value_at)
{
    detail::require(std::isfinite(wedge.half_angle) && wedge.half_angle >= 0.0 &&
                        wedge.half_angle < pi / 2.0,
                    "wedge half-angle must lie in [0, pi/2)");
    detail::require(std::isfinite(wedge.axis_angle), "wedge axis angle must be finite");
    const long cx = static_cast<long>(w / 2);
    const long cy = static_cast<long>(h / 2);
    const std::size_t bins = std::min(w, h) / 2;
    std::vector<detail::CompensatedSum> sums(bins);
    std::vector<std::size_t> counts(bins, 0);

    for (std::size_t y = 0; y < h; ++y) {
        const double dy = static_cast<double>(static_cast<long>(y) - cy);
        for (std::size_t x = 0; x < w; ++x) {
            const double dx = static_cast<double>(static_cast<long>(x) - cx);
            const double r = std::hypot(dx, dy);
            const auto bin = static_cast<std::size_t>(std::lround(r));
            if (bin >= bins)
                continue;
            if (bin > 0 && wedge.half_angle > 0.0) {
                // angular distance to the axis line, folded into [0, pi/2]
                double d = std::remainder(std::atan2(dy, dx) - wedge.axis_angle, pi);
                if (std::abs(d) < wedge.half_angle)
                    continue;
            }
            const double v = value_at(x, y);
            sums[bin].add(v * v);
            ++counts[bin];
        }
    }

    RadialProfile profile;
    profile.frequency.resize(bins);
    profile.value.resize(bins);
    profile.count = counts;
    for (std::size_t b = 0; b < bins; ++b) {
        if (counts[b] == 0)
            throw ValidationError("radial bin " + std::to_string(b) +
                                  " is empty after wedge exclusion");
        profile.frequency[b] = static_cast<double>(b) * step;
        profile.value[b] = std::sqrt(sums[b].value() / static_cast<double>(counts[b]));
    }
    return profile;
}

}  // namespace

RadialProfile rms_angular_average(const RasterImage& map, WedgeExclusion wedge)
{
    detail::require(map.plane() == PlaneTag::frequency,
                    "angular averages need a frequency-plane raster");
    return radial_rms(map.width(), map.height(), map.pixel_size(), wedge,
                      [&](std::size_t x, std::size_t y) { return map(x, y); });
}

RadialProfile rms_angular_average(const CtfMap& map, WedgeExclusion wedge)
{
    return radial_rms(map.nx(), map.ny(), map.step(), wedge,
                      [&](std::size_t x, std::size_t y) { return std::abs(map.at(x, y)); });
}

StripeSignature misalignment_signature(const PlateAlignment& align, const LaserMode& mode,
                                       double focal_length, const ElectronBeam& beam,
                                       double threshold_fraction)
{
    validate(align);
    detail::require(focal_length > 0.0, "focal length must be positive");
    detail::require(threshold_fraction > 0.0 && threshold_fraction < 1.0,
                    "threshold fraction must lie in (0, 1)");
    StripeSignature sig;
    sig.axis_angle = align.rotation;
    if (mode.peak_phase() <= 0.0)
        return sig;

    const double scale = beam.wavelength * focal_length;
    const double extent = (std::abs(align.lateral_offset) + 4.0 * mode.waist()) / scale;
    const double period = mode.wavelength() / (2.0 * scale);
    const double threshold = threshold_fraction * mode.peak_phase();
    const double ca = std::cos(align.rotation);
    const double sa = std::sin(align.rotation);
    constexpr int samples = 4001;
    constexpr int axial_samples = 16;
    const double dt = 2.0 * extent / (samples - 1);

    std::vector<double> level(samples);
    for (int i = 0; i < samples; ++i) {
        const double t = -extent + dt * i;
        double best = 0.0;
        for (int j = 0; j < axial_samples; ++j) {
            const double a = period * j / axial_samples;
            const double sx = a * ca - t * sa;
            const double sy = a * sa + t * ca;
            const double eta = std::max(
                laser_phase_of_frequency(sx, sy, mode, align, focal_length, beam),
                laser_phase_of_frequency(-sx, -sy, mode, align, focal_length, beam));
            best = std::max(best, eta);
        }
        level[i] = best - threshold;
    }

    // linear interpolation of the threshold crossing between samples i and i+1
    auto crossing = [&](int i) {
        const double a = level[i];
        const double b = level[i + 1];
        return -extent + dt * (i + a / (a - b));
    };
    int i = 0;
    while (i < samples) {
        if (level[i] <= 0.0) {
            ++i;
            continue;
        }
        const double lo = i == 0 ? -extent : crossing(i - 1);
        int j = i;
        while (j + 1 < samples && level[j + 1] > 0.0)
            ++j;
        const double hi = j + 1 == samples ? extent : crossing(j);
        sig.centers.push_back(0.5 * (lo + hi));
        sig.half_widths.push_back(0.5 * (hi - lo));
        i = j + 1;
    }
    sig.count = sig.centers.size();
    return sig;
}

}  // namespace lpp
