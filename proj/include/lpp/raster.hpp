#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace lpp {

/// Which physical plane a raster samples. Frequency-plane rasters keep DC at
/// index (width/2, height/2) and store the frequency step in `pixel_size`.
enum class PlaneTag : unsigned char {
    generic = 0,
    image = 1,
    diffraction = 2,
    frequency = 3,
    phase_plate = 4,
};

enum class ValueKind : unsigned char {
    intensity = 0,
    phase = 1,
    ctf = 2,
};

/// Row-major 2-D scalar grid. `pixel_size` is in meters, or 1/meters for
/// frequency-plane rasters.
class RasterImage {
public:
    RasterImage() = default;
    RasterImage(std::size_t width, std::size_t height, double pixel_size,
                PlaneTag plane = PlaneTag::image, ValueKind kind = ValueKind::intensity,
                double fill = 0.0);

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    double pixel_size() const noexcept { return pixel_size_; }
    PlaneTag plane() const noexcept { return plane_; }
    ValueKind kind() const noexcept { return kind_; }
    void set_plane(PlaneTag plane) noexcept { plane_ = plane; }
    void set_kind(ValueKind kind) noexcept { kind_ = kind; }

    double& operator()(std::size_t x, std::size_t y) { return data_[y * width_ + x]; }
    double operator()(std::size_t x, std::size_t y) const { return data_[y * width_ + x]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    bool same_grid(const RasterImage& other) const noexcept;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    double pixel_size_ = 1.0;
    PlaneTag plane_ = PlaneTag::generic;
    ValueKind kind_ = ValueKind::intensity;
    std::vector<double> data_;
};

}  // namespace lpp
