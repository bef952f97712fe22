#pragma once

#include <cstdint>
#include <limits>

#include "lpp/raster.hpp"

namespace lpp {

/// Coincidence-loss strength Theta = (tau / T)(A / a), one scalar per image.
struct CoincidenceParams {
    double theta = 0.0;
};

/// I_det = (1 - exp(-I_act Theta)) / Theta; identity for Theta = 0.
double apply_coincidence_loss(double actual_counts, CoincidenceParams params);

/// I_act = -ln(1 - I_det Theta) / Theta. Throws SaturationError when
/// I_det Theta >= 1.
double invert_coincidence_loss(double detected_counts, CoincidenceParams params);

RasterImage apply_coincidence_loss(const RasterImage& actual, CoincidenceParams params);
RasterImage invert_coincidence_loss(const RasterImage& detected, CoincidenceParams params);

/// Independent Poisson draw per pixel. Pixel i uses a generator keyed on
/// (seed, i) only, so the output does not depend on iteration order or
/// thread count.
RasterImage sample_poisson_counts(const RasterImage& expected, std::uint64_t seed);

/// Zero-mean unit-variance normal draw per pixel keyed on (seed, i).
RasterImage sample_standard_normal(std::size_t width, std::size_t height, double pixel_size,
                                   std::uint64_t seed);

/// Counter-based 64-bit generator (SplitMix64 finalizer over a keyed counter).
/// Satisfies UniformRandomBitGenerator.
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, std::uint64_t index) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }
    result_type operator()() noexcept;

private:
    std::uint64_t state_;
};

}  // namespace lpp
