#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

#include "detail/optimize.hpp"
#include "detail/summation.hpp"
#include "lpp/errors.hpp"
#include "lpp/estimation.hpp"
#include "lpp/fft.hpp"

namespace lpp {

using constants::pi;
using cplx = std::complex<double>;

double Wavevector::magnitude() const noexcept { return std::hypot(qx, qy); }

double Wavevector::angle() const noexcept { return std::atan2(qy, qx); }

namespace {

// |sum d(x,y) exp(-2 pi i (fx x + fy y))| with f in cycles per pixel.
double fourier_magnitude(const std::vector<double>& d, std::size_t w, std::size_t h, double fx,
                         double fy)
{
    std::vector<cplx> ex(w);
    for (std::size_t x = 0; x < w; ++x)
        ex[x] = std::polar(1.0, -2.0 * pi * fx * static_cast<double>(x));
    cplx total{0.0, 0.0};
    for (std::size_t y = 0; y < h; ++y) {
        cplx row{0.0, 0.0};
        const double* line = &d[y * w];
        for (std::size_t x = 0; x < w; ++x)
            row += line[x] * ex[x];
        total += row * std::polar(1.0, -2.0 * pi * fy * static_cast<double>(y));
    }
    return std::abs(total);
}

}  // namespace

Wavevector estimate_standing_wave_vector(const RasterImage& image)
{
    const std::size_t w = image.width();
    const std::size_t h = image.height();
    detail::require(w >= 16 && h >= 16, "wavevector estimation needs at least a 16x16 image");

    detail::CompensatedSum total;
    for (double v : image.values())
        total.add(v);
    const double mean = total.value() / static_cast<double>(image.size());
    std::vector<double> d(image.size());
    std::vector<cplx> buffer(image.size());
    auto src = image.values();
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = src[i] - mean;
        buffer[i] = d[i];
    }
    fft::transform_2d(buffer, w, h, fft::Direction::forward);

    // Half plane ky > 0, or ky = 0 and kx > 0, away from DC.
    std::vector<double> powers;
    powers.reserve(buffer.size() / 2);
    double peak = -1.0;
    long peak_kx = 0;
    long peak_ky = 0;
    for (std::size_t y = 0; y < h; ++y) {
        const long ky = fft::signed_index(y, h);
        for (std::size_t x = 0; x < w; ++x) {
            const long kx = fft::signed_index(x, w);
            if (ky < 0 || (ky == 0 && kx <= 0))
                continue;
            if (std::abs(kx) <= 2 && std::abs(ky) <= 2)
                continue;
            const double p = std::norm(buffer[y * w + x]);
            powers.push_back(p);
            if (p > peak) {
                peak = p;
                peak_kx = kx;
                peak_ky = ky;
            }
        }
    }
    const auto mid = powers.begin() + static_cast<long>(powers.size() / 2);
    std::nth_element(powers.begin(), mid, powers.end());
    const double robust_mean = *mid / std::log(2.0);
    if (!(peak > 0.0) || peak < 30.0 * robust_mean) {
        std::ostringstream msg;
        msg << "no significant fringe peak in the image spectrum (peak/robust mean power = "
            << (robust_mean > 0.0 ? peak / robust_mean : 0.0) << ", need >= 30)";
        throw EstimationError(msg.str());
    }

    const double fx0 = static_cast<double>(peak_kx) / static_cast<double>(w);
    const double fy0 = static_cast<double>(peak_ky) / static_cast<double>(h);
    const double periods = std::hypot(fx0 * static_cast<double>(w), fy0 * static_cast<double>(h));
    if (periods < 8.0) {
        std::ostringstream msg;
        msg << "image contains about " << periods << " fringe periods; at least 8 are required";
        throw ValidationError(msg.str());
    }

    auto objective = [&](const std::vector<double>& f) {
        return -fourier_magnitude(d, w, h, f[0], f[1]);
    };
    const auto best = detail::simplex_minimize(
        objective, {fx0, fy0},
        {0.25 / static_cast<double>(w), 0.25 / static_cast<double>(h)}, 1e-12, 400);

    Wavevector q{best.x[0] / image.pixel_size(), best.x[1] / image.pixel_size()};
    if (q.qy < 0.0 || (q.qy == 0.0 && q.qx < 0.0))
        q = {-q.qx, -q.qy};
    return q;
}

std::size_t remove_dead_pixels(RasterImage& image, double mad_factor)
{
    detail::require(mad_factor > 0.0, "dead-pixel threshold must be positive");
    const auto w = static_cast<long>(image.width());
    const auto h = static_cast<long>(image.height());
    const RasterImage input = image;
    std::size_t replaced = 0;
    std::vector<double> window;
    std::vector<double> deviation;
    window.reserve(25);
    deviation.reserve(25);
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            window.clear();
            for (long dy = -2; dy <= 2; ++dy) {
                const long yy = std::clamp(y + dy, 0L, h - 1);
                for (long dx = -2; dx <= 2; ++dx) {
                    const long xx = std::clamp(x + dx, 0L, w - 1);
                    window.push_back(input(static_cast<std::size_t>(xx), static_cast<std::size_t>(yy)));
                }
            }
            auto mid = window.begin() + 12;
            std::nth_element(window.begin(), mid, window.end());
            const double median = *mid;
            deviation.clear();
            for (double v : window)
                deviation.push_back(std::abs(v - median));
            auto dmid = deviation.begin() + 12;
            std::nth_element(deviation.begin(), dmid, deviation.end());
            const double mad = *dmid;
            const double v = input(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
            if (std::abs(v - median) > mad_factor * mad) {
                image(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) = median;
                ++replaced;
            }
        }
    }
    return replaced;
}

}  // namespace lpp
