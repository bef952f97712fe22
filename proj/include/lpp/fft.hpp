#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace lpp::fft {

enum class Direction { forward, backward };

/// In-place 2-D complex DFT of a row-major `width` x `height` array.
/// Unnormalized in both directions (backward(forward(x)) = width*height*x).
void transform_2d(std::span<std::complex<double>> data, std::size_t width, std::size_t height,
                  Direction direction);

/// Signed frequency index of DFT bin `i` on an axis of length `n`
/// (0, 1, ..., n/2-1, -n/2, ..., -1).
inline long signed_index(std::size_t i, std::size_t n) noexcept
{
    const long ii = static_cast<long>(i);
    const long nn = static_cast<long>(n);
    return ii < (nn + 1) / 2 ? ii : ii - nn;
}

/// Smallest even length >= n whose only prime factors are 2, 3, 5 and 7.
std::size_t good_size(std::size_t n) noexcept;

/// Number of worker threads for FFTs and per-pixel loops, from LPP_THREADS
/// (0 or unset = hardware concurrency).
int thread_count() noexcept;
/// Overrides the thread count for the rest of the process (0 restores the default).
void set_thread_count(int count) noexcept;

}  // namespace lpp::fft
