#include "lpp/raster.hpp"

#include <cmath>

#include "lpp/errors.hpp"

namespace lpp {

RasterImage::RasterImage(std::size_t width, std::size_t height, double pixel_size,
                         PlaneTag plane, ValueKind kind, double fill)
    : width_(width), height_(height), pixel_size_(pixel_size), plane_(plane), kind_(kind),
      data_(width * height, fill)
{
    detail::require(width > 0 && height > 0, "raster dimensions must be positive");
    detail::require(pixel_size > 0.0 && std::isfinite(pixel_size),
                    "raster pixel_size must be positive and finite");
}

bool RasterImage::same_grid(const RasterImage& other) const noexcept
{
    return width_ == other.width_ && height_ == other.height_ &&
           std::abs(pixel_size_ - other.pixel_size_) <= 1e-12 * pixel_size_;
}

}  // namespace lpp
