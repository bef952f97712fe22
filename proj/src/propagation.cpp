#include "lpp/propagation.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "lpp/errors.hpp"
#include "lpp/fft.hpp"
#include "lpp/log.hpp"

namespace lpp {

using constants::pi;
using cplx = std::complex<double>;

ComplexField::ComplexField(std::size_t width, std::size_t height, double pixel_size,
                           PlaneTag plane, std::complex<double> fill)
    : width_(width), height_(height), pixel_size_(pixel_size), plane_(plane),
      data_(width * height, fill)
{
    detail::require(width >= 16 && height >= 16 && width % 2 == 0 && height % 2 == 0,
                    "complex field dimensions must be even and >= 16, got " +
                        std::to_string(width) + "x" + std::to_string(height));
    detail::require(pixel_size > 0.0 && std::isfinite(pixel_size),
                    "complex field pixel_size must be positive");
}

double ComplexField::total_intensity() const noexcept
{
    double sum = 0.0;
    for (const auto& v : data_)
        sum += std::norm(v);
    return sum * pixel_size_ * pixel_size_;
}

RasterImage ComplexField::intensity() const
{
    RasterImage out(width_, height_, pixel_size_, plane_, ValueKind::intensity);
    auto dst = out.values();
    for (std::size_t i = 0; i < data_.size(); ++i)
        dst[i] = std::norm(data_[i]);
    return out;
}

std::size_t required_grid_size(double distance, double wavenumber, double pixel_size) noexcept
{
    const double wavelength = 2.0 * pi / wavenumber;
    auto n = static_cast<std::size_t>(std::ceil(wavelength * std::abs(distance) /
                                                (pixel_size * pixel_size)));
    n = std::max<std::size_t>(n, 16);
    return n + (n % 2);
}

namespace {

// Multiplies an unshifted spectrum of a width x height grid with spacing dx by
// exp(-i pi lambda z |f|^2), and applies the 1/(W H) normalization.
void apply_transfer_function(std::span<cplx> spectrum, std::size_t width, std::size_t height,
                             double dx, double distance, double wavelength)
{
    const double dfx = 1.0 / (static_cast<double>(width) * dx);
    const double dfy = 1.0 / (static_cast<double>(height) * dx);
    const double norm = 1.0 / static_cast<double>(width * height);
    const double chirp = -pi * wavelength * distance;
    const auto h = static_cast<long>(height);
#pragma omp parallel for num_threads(fft::thread_count()) schedule(static)
    for (long iy = 0; iy < h; ++iy) {
        const double fy = static_cast<double>(fft::signed_index(static_cast<std::size_t>(iy), height)) * dfy;
        for (std::size_t ix = 0; ix < width; ++ix) {
            const double fx = static_cast<double>(fft::signed_index(ix, width)) * dfx;
            const double phase = chirp * (fx * fx + fy * fy);
            spectrum[static_cast<std::size_t>(iy) * width + ix] *= std::polar(norm, phase);
        }
    }
}

}  // namespace

ComplexField fresnel_propagate(const ComplexField& field, double distance, double wavenumber,
                               Boundary boundary)
{
    detail::require(std::isfinite(distance) && distance != 0.0,
                    "propagation distance must be nonzero");
    detail::require(std::isfinite(wavenumber) && wavenumber > 0.0,
                    "wavenumber must be positive");
    const double wavelength = 2.0 * pi / wavenumber;
    const double dx = field.pixel_size();
    const std::size_t w = field.width();
    const std::size_t h = field.height();
    const cplx global_phase = std::polar(1.0, std::fmod(wavenumber * distance, 2.0 * pi));

    ComplexField out(w, h, dx, field.plane());
    if (boundary == Boundary::periodic) {
        std::vector<cplx> buffer(field.values().begin(), field.values().end());
        fft::transform_2d(buffer, w, h, fft::Direction::forward);
        apply_transfer_function(buffer, w, h, dx, distance, wavelength);
        fft::transform_2d(buffer, w, h, fft::Direction::backward);
        auto dst = out.values();
        for (std::size_t i = 0; i < buffer.size(); ++i)
            dst[i] = buffer[i] * global_phase;
        return out;
    }

    const std::size_t needed = required_grid_size(distance, wavenumber, dx);
    if (std::min(w, h) < needed) {
        std::ostringstream msg;
        msg << "sampling violation: zero-padded Fresnel propagation by " << distance
            << " m at pixel size " << dx << " m needs at least " << needed << "x" << needed
            << " samples (grid is " << w << "x" << h << ")";
        throw ValidationError(msg.str());
    }

    const std::size_t pw = 2 * w;
    const std::size_t ph = 2 * h;
    std::vector<cplx> buffer(pw * ph, cplx{0.0, 0.0});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            buffer[y * pw + x] = field(x, y);
    fft::transform_2d(buffer, pw, ph, fft::Direction::forward);
    apply_transfer_function(buffer, pw, ph, dx, distance, wavelength);
    fft::transform_2d(buffer, pw, ph, fft::Direction::backward);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            out(x, y) = buffer[y * pw + x] * global_phase;
    return out;
}

double plate_pixel_size(const RonchigramSetup& setup, const DetectorGrid& grid)
{
    return std::abs(setup.delta) / (setup.magnification * setup.focal_length) * grid.pixel_size;
}

double detector_fringe_period(const RonchigramSetup& setup)
{
    return setup.magnification * setup.focal_length / std::abs(setup.delta) *
           setup.mode.wavelength() / 2.0;
}

namespace {

void validate_ronchigram(const RonchigramSetup& setup, const DetectorGrid& grid)
{
    detail::require(std::isfinite(setup.delta),
                    "Ronchigram plate offset delta must be finite");
    detail::require(setup.delta != 0.0,
                    "delta = 0 is the phase-plate imaging condition; use the CTF engine "
                    "(ctf_map / simulate_weak_phase_image) instead of Ronchigram synthesis");
    detail::require(setup.focal_length > 0.0, "focal length must be positive");
    detail::require(setup.magnification > 0.0, "magnification must be positive");
    detail::require(grid.width >= 16 && grid.height >= 16 && grid.width % 2 == 0 &&
                        grid.height % 2 == 0,
                    "detector grid dimensions must be even and >= 16");
    detail::require(grid.pixel_size > 0.0, "detector pixel size must be positive");

    const double period_px = detector_fringe_period(setup) / grid.pixel_size;
    if (period_px < 4.0) {
        std::ostringstream msg;
        msg << "sampling violation: the standing-wave fringe period maps to " << period_px
            << " detector pixels; at least 4 are required (reduce |delta|/(M f) or the pixel size)";
        throw ValidationError(msg.str());
    }
    const double dp = plate_pixel_size(setup, grid);
    const std::size_t needed = required_grid_size(setup.delta, setup.beam.wavenumber, dp);
    if (std::min(grid.width, grid.height) < needed) {
        std::ostringstream msg;
        msg << "sampling violation: Fresnel propagation over delta = " << setup.delta
            << " m at plate pixel " << dp << " m needs at least " << needed << "x" << needed
            << " detector pixels";
        throw ValidationError(msg.str());
    }
}

}  // namespace

RasterImage synthesize_ronchigram(const RonchigramSetup& setup, const DetectorGrid& grid)
{
    validate_ronchigram(setup, grid);

    const std::size_t w = grid.width;
    const std::size_t h = grid.height;
    const double scale = setup.delta / (setup.magnification * setup.focal_length);
    const double dp = std::abs(scale) * grid.pixel_size;
    // The padding carries the analytic phase object, so it only keeps the
    // periodic wrap-around off the detector area. The kernel reaches
    // lambda |delta| / (2 dp^2) pixels; its ringing decays slowly beyond that,
    // and a quarter-grid margin holds it near 1e-4 of the background.
    const std::size_t margin =
        required_grid_size(setup.delta, setup.beam.wavenumber, dp) / 2 + std::max(w, h) / 4;
    const std::size_t pw = fft::good_size(w + 2 * margin);
    const std::size_t ph = fft::good_size(h + 2 * margin);
    const std::size_t ox = (pw - w) / 2;
    const std::size_t oy = (ph - h) / 2;
    const double ca = std::cos(setup.axis_angle);
    const double sa = std::sin(setup.axis_angle);
    const LaserMode& mode = setup.mode;

    // Padded index i covers detector index i - ox.
    std::vector<cplx> buffer(pw * ph);
    const auto ph_l = static_cast<long>(ph);
#pragma omp parallel for num_threads(fft::thread_count()) schedule(static)
    for (long iy = 0; iy < ph_l; ++iy) {
        const double ry = (static_cast<double>(iy) - static_cast<double>(oy + h / 2)) * grid.pixel_size -
                          setup.center_y;
        for (std::size_t ix = 0; ix < pw; ++ix) {
            const double rx =
                (static_cast<double>(ix) - static_cast<double>(ox + w / 2)) * grid.pixel_size -
                setup.center_x;
            const double xl = scale * (rx * ca + ry * sa);
            const double yl = scale * (-rx * sa + ry * ca);
            const double eta = phase_profile(xl, yl, mode);
            // exp(-i eta) - 1 without cancellation for small eta
            const double half = 0.5 * eta;
            const double s = std::sin(half);
            buffer[static_cast<std::size_t>(iy) * pw + ix] =
                cplx{-2.0 * s * s, -std::sin(eta)};
        }
    }

    fft::transform_2d(buffer, pw, ph, fft::Direction::forward);
    apply_transfer_function(buffer, pw, ph, dp, setup.delta, setup.beam.wavelength);
    fft::transform_2d(buffer, pw, ph, fft::Direction::backward);

    RasterImage out(w, h, grid.pixel_size, PlaneTag::image, ValueKind::intensity);
    for (std::size_t y = 0; y < h; ++y) {
        const cplx* row = &buffer[(y + oy) * pw + ox];
        for (std::size_t x = 0; x < w; ++x)
            out(x, y) = std::norm(1.0 + row[x]);
    }
    return out;
}

double analytic_fringe_contrast(double peak_phase, double delta, double wavenumber,
                                double laser_wavenumber)
{
    detail::require(std::isfinite(peak_phase) && peak_phase >= 0.0 && peak_phase < pi,
                    "two-term Jacobi-Anger contrast requires 0 <= eta0 < pi");
    detail::require(wavenumber > 0.0 && laser_wavenumber > 0.0, "wavenumbers must be positive");
    if (peak_phase > 1.5)
        warn("analytic_fringe_contrast: eta0 = " + std::to_string(peak_phase) +
             " rad is outside the accurate range of the two-term expansion");
    const double j0 = std::cyl_bessel_j(0.0, peak_phase / 2.0);
    const double j1 = std::cyl_bessel_j(1.0, peak_phase / 2.0);
    if (std::abs(j0) < 1e-12)
        throw DomainError("J0(eta0/2) vanishes; the two-term contrast ratio is undefined");
    return 4.0 * j1 / j0 *
           std::sin(2.0 * delta * laser_wavenumber * laser_wavenumber / wavenumber);
}

std::vector<double> contrast_maximizing_offsets(const ElectronBeam& beam, double laser_wavelength,
                                                std::size_t count)
{
    detail::require(count >= 1, "count must be at least 1");
    detail::require(laser_wavelength > 0.0, "laser wavelength must be positive");
    const double kl = 2.0 * pi / laser_wavelength;
    const double base = pi / 2.0 * beam.wavenumber / (kl * kl);
    std::vector<double> out(count);
    for (std::size_t j = 0; j < count; ++j)
        out[j] = base * (static_cast<double>(j) + 0.5);
    return out;
}

}  // namespace lpp
