#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "lpp/physics.hpp"
#include "lpp/raster.hpp"

namespace lpp {

/// Complex electron wave function sampled on a regular grid.
class ComplexField {
public:
    /// Width and height must be even and at least 16.
    ComplexField(std::size_t width, std::size_t height, double pixel_size,
                 PlaneTag plane = PlaneTag::generic, std::complex<double> fill = {0.0, 0.0});

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    double pixel_size() const noexcept { return pixel_size_; }
    PlaneTag plane() const noexcept { return plane_; }

    std::complex<double>& operator()(std::size_t x, std::size_t y) { return data_[y * width_ + x]; }
    const std::complex<double>& operator()(std::size_t x, std::size_t y) const
    {
        return data_[y * width_ + x];
    }
    std::span<std::complex<double>> values() noexcept { return data_; }
    std::span<const std::complex<double>> values() const noexcept { return data_; }

    /// sum |psi|^2 * pixel area
    double total_intensity() const noexcept;
    RasterImage intensity() const;

private:
    std::size_t width_;
    std::size_t height_;
    double pixel_size_;
    PlaneTag plane_;
    std::vector<std::complex<double>> data_;
};

enum class Boundary {
    /// Field is zero outside the grid; linear convolution on a 2x padded grid.
    zero_padded,
    /// Field repeats periodically; circular convolution on the grid itself.
    periodic,
};

/// Smallest square grid (samples per axis) for which zero-padded propagation
/// by `distance` at `pixel_size` is free of wrap-around: N dx^2 >= lambda |z|.
std::size_t required_grid_size(double distance, double wavenumber, double pixel_size) noexcept;

/// Paraxial propagation by `distance` (signed), multiplying the spectrum by
/// the exact Fresnel transfer function exp(ikz) exp(-i pi lambda z |f|^2).
/// Throws ValidationError when the zero-padded grid is too small.
ComplexField fresnel_propagate(const ComplexField& field, double distance, double wavenumber,
                               Boundary boundary = Boundary::zero_padded);

struct RonchigramSetup {
    ElectronBeam beam;
    LaserMode mode;
    /// plate offset downstream of the diffraction plane, m (nonzero)
    double delta = 0.0;
    double focal_length = 20e-3;
    double magnification = 1.0;
    /// laser focus position on the detector relative to the grid center, m
    double center_x = 0.0;
    double center_y = 0.0;
    /// direction of the laser axis on the detector, rad
    double axis_angle = 0.0;
};

/// Detector sampling. Pixel (W/2, H/2) is the grid center.
struct DetectorGrid {
    std::size_t width = 2048;
    std::size_t height = 2048;
    double pixel_size = 5e-6;
};

/// Plate-plane distance covered by one detector pixel, |delta| / (M f) * pixel.
double plate_pixel_size(const RonchigramSetup& setup, const DetectorGrid& grid);

/// Fringe period of the standing-wave image on the detector, (M f / |delta|) * lambda_L / 2.
double detector_fringe_period(const RonchigramSetup& setup);

/// Normalized Ronchigram |psi_im|^2 on the detector (background = 1).
///
/// The image is the Fresnel convolution of exp(-i eta) over the plate plane,
/// sampled at plate positions (delta / (M f)) * x. The deviation exp(-i eta) - 1
/// is evaluated analytically on the 2x padded grid, so the padding carries the
/// true phase object rather than zeros.
RasterImage synthesize_ronchigram(const RonchigramSetup& setup, const DetectorGrid& grid);

/// Signed amplitude C of the two-term Jacobi-Anger approximation
/// |psi|^2 ~ 1 - C cos(2 k_L x), C = 4 J1(eta0/2)/J0(eta0/2) sin(2 delta k_L^2 / k).
double analytic_fringe_contrast(double peak_phase, double delta, double wavenumber,
                                double laser_wavenumber);

/// Offsets (pi/2)(k / k_L^2)(j + 1/2), j = 0..count-1, that maximize the
/// fringe contrast.
std::vector<double> contrast_maximizing_offsets(const ElectronBeam& beam, double laser_wavelength,
                                                std::size_t count);

}  // namespace lpp
