#include "lpp/detector.hpp"

#include <cmath>
#include <random>
#include <string>

#include "lpp/errors.hpp"
#include "lpp/fft.hpp"

namespace lpp {

namespace {

void validate_theta(CoincidenceParams params)
{
    detail::require(std::isfinite(params.theta) && params.theta >= 0.0,
                    "coincidence-loss Theta must be non-negative");
}

std::uint64_t mix(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

double apply_coincidence_loss(double actual_counts, CoincidenceParams params)
{
    validate_theta(params);
    detail::require(std::isfinite(actual_counts) && actual_counts >= 0.0,
                    "actual counts must be non-negative, got " + std::to_string(actual_counts));
    if (params.theta == 0.0)
        return actual_counts;
    return -std::expm1(-actual_counts * params.theta) / params.theta;
}

double invert_coincidence_loss(double detected_counts, CoincidenceParams params)
{
    validate_theta(params);
    detail::require(std::isfinite(detected_counts) && detected_counts >= 0.0,
                    "detected counts must be non-negative");
    if (params.theta == 0.0)
        return detected_counts;
    const double loss = detected_counts * params.theta;
    if (loss >= 1.0)
        throw SaturationError("detected counts * Theta = " + std::to_string(loss) +
                              " >= 1: the coincidence-loss model has no preimage");
    return -std::log1p(-loss) / params.theta;
}

RasterImage apply_coincidence_loss(const RasterImage& actual, CoincidenceParams params)
{
    RasterImage out = actual;
    for (double& v : out.values())
        v = apply_coincidence_loss(v, params);
    return out;
}

RasterImage invert_coincidence_loss(const RasterImage& detected, CoincidenceParams params)
{
    RasterImage out = detected;
    for (double& v : out.values())
        v = invert_coincidence_loss(v, params);
    return out;
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t index) noexcept
    : state_(mix(seed ^ mix(index + 0x9e3779b97f4a7c15ULL)))
{
}

CounterRng::result_type CounterRng::operator()() noexcept
{
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
}

RasterImage sample_poisson_counts(const RasterImage& expected, std::uint64_t seed)
{
    for (double v : expected.values())
        detail::require(std::isfinite(v) && v >= 0.0,
                        "Poisson expectation must be non-negative and finite");
    RasterImage out = expected;
    auto src = expected.values();
    auto dst = out.values();
    const auto n = static_cast<long>(src.size());
#pragma omp parallel for num_threads(fft::thread_count()) schedule(static)
    for (long i = 0; i < n; ++i) {
        const double mean = src[static_cast<std::size_t>(i)];
        if (mean == 0.0) {
            dst[static_cast<std::size_t>(i)] = 0.0;
            continue;
        }
        CounterRng rng(seed, static_cast<std::uint64_t>(i));
        std::poisson_distribution<long long> draw(mean);
        dst[static_cast<std::size_t>(i)] = static_cast<double>(draw(rng));
    }
    return out;
}

RasterImage sample_standard_normal(std::size_t width, std::size_t height, double pixel_size,
                                   std::uint64_t seed)
{
    RasterImage out(width, height, pixel_size, PlaneTag::image, ValueKind::phase);
    auto dst = out.values();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        CounterRng rng(seed, i);
        std::normal_distribution<double> draw(0.0, 1.0);
        dst[i] = draw(rng);
    }
    return out;
}

}  // namespace lpp
