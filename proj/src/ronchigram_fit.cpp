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
#include "lpp/log.hpp"
#include "lpp/propagation.hpp"

namespace lpp {

using constants::pi;
using cplx = std::complex<double>;

namespace {

double median_of(std::vector<double> values)
{
    auto mid = values.begin() + static_cast<long>(values.size() / 2);
    std::nth_element(values.begin(), mid, values.end());
    return *mid;
}

// Normalized model parameters. `dose` is u = I_act Theta in the background.
struct ModelParams {
    double center_x = 0.0;  // m, relative to grid center
    double center_y = 0.0;
    double peak_phase = 0.0;
    double numerical_aperture = 0.026;
    double dose = 0.0;
};

class RonchigramModel {
public:
    RonchigramModel(const RasterImage& normalized, const RonchigramHints& hints, Wavevector q,
                    double delta)
        : data_(normalized), hints_(hints), q_(q), delta_(delta)
    {
        grid_.width = normalized.width();
        grid_.height = normalized.height();
        grid_.pixel_size = normalized.pixel_size();
        setup_.beam = hints.beam;
        setup_.delta = delta;
        setup_.magnification = 1.0;
        // |delta| / (M f) = (lambda_L / 2) |q|
        setup_.focal_length = std::abs(delta) / (0.5 * hints.laser_wavelength * q.magnitude());
        setup_.axis_angle = q.angle();
    }

    RasterImage predict(const ModelParams& p) const
    {
        RonchigramSetup setup = setup_;
        setup.mode = laser_mode_geometry(hints_.laser_wavelength, p.numerical_aperture, 0.0,
                                         p.peak_phase);
        setup.center_x = p.center_x;
        setup.center_y = p.center_y;
        RasterImage r = synthesize_ronchigram(setup, grid_);
        if (p.dose > 0.0) {
            const double norm = -std::expm1(-p.dose);
            for (double& v : r.values())
                v = -std::expm1(-p.dose * v) / norm;
        }
        return r;
    }

    // Mean squared residual with the background scale profiled out.
    double objective(const ModelParams& p, double* scale = nullptr) const
    {
        if (!(p.peak_phase >= 0.0) || !(p.numerical_aperture > 0.002) ||
            !(p.numerical_aperture <= 0.1) || !(p.dose >= 0.0) || p.dose > 50.0)
            return penalty(p);
        const RasterImage m = predict(p);
        detail::CompensatedSum im;
        detail::CompensatedSum mm;
        auto dv = data_.values();
        auto mv = m.values();
        for (std::size_t i = 0; i < dv.size(); ++i) {
            im.add(dv[i] * mv[i]);
            mm.add(mv[i] * mv[i]);
        }
        const double s = im.value() / mm.value();
        detail::CompensatedSum rss;
        for (std::size_t i = 0; i < dv.size(); ++i) {
            const double r = dv[i] - s * mv[i];
            rss.add(r * r);
        }
        if (scale)
            *scale = s;
        return rss.value() / static_cast<double>(dv.size());
    }

    const Wavevector& wavevector() const noexcept { return q_; }
    double delta() const noexcept { return delta_; }

private:
    static double penalty(const ModelParams& p)
    {
        double v = 0.0;
        if (!(p.peak_phase >= 0.0))
            v += std::abs(p.peak_phase);
        if (!(p.numerical_aperture > 0.002))
            v += 0.002 - p.numerical_aperture;
        if (!(p.numerical_aperture <= 0.1))
            v += p.numerical_aperture - 0.1;
        if (!(p.dose >= 0.0))
            v += -p.dose;
        if (p.dose > 50.0)
            v += p.dose - 50.0;
        return 1e6 * (1.0 + v);
    }

    const RasterImage& data_;
    const RonchigramHints& hints_;
    Wavevector q_;
    double delta_;
    RonchigramSetup setup_;
    DetectorGrid grid_;
};

// Shift d maximizing the circular cross-correlation of a with b(r - d), in pixels.
std::pair<long, long> correlation_shift(const RasterImage& a, const RasterImage& b)
{
    const std::size_t w = a.width();
    const std::size_t h = a.height();
    auto mean_of = [](std::span<const double> v) {
        detail::CompensatedSum s;
        for (double x : v)
            s.add(x);
        return s.value() / static_cast<double>(v.size());
    };
    const double ma = mean_of(a.values());
    const double mb = mean_of(b.values());
    std::vector<cplx> fa(w * h);
    std::vector<cplx> fb(w * h);
    for (std::size_t i = 0; i < fa.size(); ++i) {
        fa[i] = a.values()[i] - ma;
        fb[i] = b.values()[i] - mb;
    }
    fft::transform_2d(fa, w, h, fft::Direction::forward);
    fft::transform_2d(fb, w, h, fft::Direction::forward);
    for (std::size_t i = 0; i < fa.size(); ++i)
        fa[i] *= std::conj(fb[i]);
    fft::transform_2d(fa, w, h, fft::Direction::backward);
    std::size_t best = 0;
    for (std::size_t i = 1; i < fa.size(); ++i)
        if (fa[i].real() > fa[best].real())
            best = i;
    return {fft::signed_index(best % w, w), fft::signed_index(best / w, h)};
}

void check_hints(const RonchigramHints& hints)
{
    detail::require(hints.beam.wavelength > 0.0, "hints need a valid electron beam");
    detail::require(hints.laser_wavelength > 0.0, "laser wavelength must be positive");
    detail::require(hints.outer_iterations >= 1, "at least one outer repetition is required");
    detail::require(hints.peak_phase >= 0.0, "starting peak phase must be non-negative");
    detail::require(hints.numerical_aperture > 0.0 && hints.numerical_aperture <= 0.1,
                    "starting NA must lie in (0, 0.1]");
    detail::require(hints.theta_cl >= 0.0, "starting coincidence parameter must be non-negative");
    if (hints.delta)
        detail::require(std::isfinite(*hints.delta) && *hints.delta != 0.0,
                        "plate offset hint must be finite and nonzero");
}

double default_delta(const RonchigramHints& hints)
{
    const double kl = 2.0 * pi / hints.laser_wavelength;
    return -(pi / 4.0) * hints.beam.wavenumber / (kl * kl);
}

}  // namespace

RonchigramFit fit_ronchigram(const RasterImage& image, const RonchigramHints& hints)
{
    check_hints(hints);
    detail::require(image.width() >= 16 && image.height() >= 16 && image.width() % 2 == 0 &&
                        image.height() % 2 == 0,
                    "Ronchigram fits need even image dimensions >= 16");
    for (double v : image.values())
        detail::require(std::isfinite(v), "Ronchigram image contains non-finite values");

    RonchigramFit fit;

    // 1. dead pixels and background normalization
    RasterImage work = image;
    fit.dead_pixels = remove_dead_pixels(work);
    const double background0 =
        median_of(std::vector<double>(work.values().begin(), work.values().end()));
    if (!(background0 > 0.0))
        throw EstimationError("Ronchigram background is not positive; cannot normalize");
    for (double& v : work.values())
        v /= background0;

    // 2. wavevector
    Wavevector q;
    try {
        q = estimate_standing_wave_vector(work);
    } catch (const EstimationError& err) {
        if (!hints.wavevector)
            throw;
        warn(std::string("fit_ronchigram: ") + err.what() + "; using the wavevector hint");
        q = *hints.wavevector;
    }
    const double delta = hints.delta.value_or(default_delta(hints));
    RonchigramModel model(work, hints, q, delta);

    // 3. starting model, 4. center from cross-correlation
    ModelParams p;
    p.peak_phase = hints.peak_phase;
    p.numerical_aperture = hints.numerical_aperture;
    const double t0 = std::min(hints.theta_cl * background0, 0.99);
    p.dose = -std::log1p(-t0);
    {
        ModelParams start = p;
        if (start.peak_phase <= 0.0)
            start.peak_phase = 0.5;
        const auto [dx, dy] = correlation_shift(work, model.predict(start));
        p.center_x = static_cast<double>(dx) * work.pixel_size();
        p.center_y = static_cast<double>(dy) * work.pixel_size();
    }

    const double period = q.period();
    const double ux = std::cos(q.angle());
    const double uy = std::sin(q.angle());
    double current = model.objective(p);

    auto line_search = [&](double dirx, double diry) {
        const ModelParams base = p;
        auto f = [&](double t) {
            ModelParams trial = base;
            trial.center_x += t * dirx;
            trial.center_y += t * diry;
            return model.objective(trial);
        };
        const auto best = detail::bounded_minimize(f, -period, period, 9, period * 1e-3);
        if (best.value < current) {
            p.center_x = base.center_x + best.x * dirx;
            p.center_y = base.center_y + best.x * diry;
            current = best.value;
        }
    };
    auto joint = [&]() {
        auto f = [&](const std::vector<double>& x) {
            ModelParams trial = p;
            trial.peak_phase = x[0];
            trial.numerical_aperture = x[1];
            trial.dose = x[2];
            return model.objective(trial);
        };
        const auto best = detail::simplex_minimize(
            f, {p.peak_phase, p.numerical_aperture, p.dose},
            {0.1, 0.1 * p.numerical_aperture, 0.1 + 0.1 * p.dose}, 1e-6, 300);
        if (best.value < current) {
            p.peak_phase = best.x[0];
            p.numerical_aperture = best.x[1];
            p.dose = best.x[2];
            current = best.value;
        }
    };

    // 5. longitudinal position, then 6-7 repeated
    line_search(ux, uy);
    fit.objective_history.push_back(current);
    for (std::size_t rep = 0; rep < hints.outer_iterations; ++rep) {
        line_search(-uy, ux);
        joint();
        fit.objective_history.push_back(current);
    }

    double scale = 1.0;
    current = model.objective(p, &scale);
    fit.wavevector = q;
    fit.center_x = static_cast<double>(work.width() / 2) + p.center_x / work.pixel_size();
    fit.center_y = static_cast<double>(work.height() / 2) + p.center_y / work.pixel_size();
    fit.peak_phase = p.peak_phase;
    fit.numerical_aperture = p.numerical_aperture;
    fit.background = background0 * scale;
    fit.theta_cl = -std::expm1(-p.dose) / fit.background;
    fit.residual_norm = std::sqrt(current) / scale;
    fit.delta = delta;

    if (!(fit.peak_phase >= 0.0) || !(fit.numerical_aperture > 0.0) ||
        !(fit.numerical_aperture <= 0.1) || !std::isfinite(fit.residual_norm) ||
        !(fit.theta_cl >= 0.0)) {
        std::ostringstream msg;
        msg << "Ronchigram fit ended outside the valid region: eta0 = " << fit.peak_phase
            << " rad, NA = " << fit.numerical_aperture << ", Theta = " << fit.theta_cl
            << ", residual = " << fit.residual_norm;
        throw FitError(msg.str());
    }
    return fit;
}

RasterImage ronchigram_model(const RonchigramFit& fit, const RonchigramHints& hints,
                             const RasterImage& like)
{
    check_hints(hints);
    RonchigramModel model(like, hints, fit.wavevector, fit.delta);
    ModelParams p;
    p.center_x = (fit.center_x - static_cast<double>(like.width() / 2)) * like.pixel_size();
    p.center_y = (fit.center_y - static_cast<double>(like.height() / 2)) * like.pixel_size();
    p.peak_phase = fit.peak_phase;
    p.numerical_aperture = fit.numerical_aperture;
    const double t = fit.theta_cl * fit.background;
    if (t >= 1.0)
        throw SaturationError("fitted Theta * background >= 1");
    p.dose = -std::log1p(-t);
    RasterImage m = model.predict(p);
    for (double& v : m.values())
        v *= fit.background;
    return m;
}

FringeProfiles extract_fringe_profiles(const RasterImage& image, const RonchigramFit& fit,
                                       std::size_t crests, std::size_t troughs)
{
    const std::size_t w = image.width();
    const std::size_t h = image.height();
    const double px = image.pixel_size();
    const Wavevector q = fit.wavevector;
    detail::require(q.magnitude() > 0.0, "fit has no fringe wavevector");
    const double ux = std::cos(q.angle());
    const double uy = std::sin(q.angle());

    // fringe phase relative to the fitted center
    detail::CompensatedSum total;
    for (double v : image.values())
        total.add(v);
    const double mean = total.value() / static_cast<double>(image.size());
    cplx amp{0.0, 0.0};
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const double rx = (static_cast<double>(x) - fit.center_x) * px;
            const double ry = (static_cast<double>(y) - fit.center_y) * px;
            amp += (image(x, y) - mean) * std::polar(1.0, -2.0 * pi * (q.qx * rx + q.qy * ry));
        }
    const double phase0 = -std::arg(amp);
    const double period = q.period();

    auto sample = [&](double fx, double fy, double& out) {
        if (fx < 0.0 || fy < 0.0 || fx > static_cast<double>(w - 1) || fy > static_cast<double>(h - 1))
            return false;
        const auto x0 = std::min(static_cast<std::size_t>(fx), w - 2);
        const auto y0 = std::min(static_cast<std::size_t>(fy), h - 2);
        const double tx = fx - static_cast<double>(x0);
        const double ty = fy - static_cast<double>(y0);
        out = (1 - tx) * (1 - ty) * image(x0, y0) + tx * (1 - ty) * image(x0 + 1, y0) +
              (1 - tx) * ty * image(x0, y0 + 1) + tx * ty * image(x0 + 1, y0 + 1);
        return true;
    };

    const long half = static_cast<long>(std::min(w, h) / 2);
    FringeProfiles out;
    out.position.resize(static_cast<std::size_t>(2 * half + 1));
    for (long i = -half; i <= half; ++i)
        out.position[static_cast<std::size_t>(i + half)] = static_cast<double>(i) * px;

    auto average_lines = [&](double offset, std::size_t count, std::vector<double>& profile) {
        // line n sits at longitudinal distance (phase0 / 2pi + offset + n) * period
        std::vector<long> ns;
        for (long n = -static_cast<long>(count) - 1; n <= static_cast<long>(count) + 1; ++n)
            ns.push_back(n);
        std::sort(ns.begin(), ns.end(), [&](long a, long b) {
            const double la = std::abs(phase0 / (2 * pi) + offset + static_cast<double>(a));
            const double lb = std::abs(phase0 / (2 * pi) + offset + static_cast<double>(b));
            return la < lb;
        });
        std::vector<detail::CompensatedSum> sums(out.position.size());
        std::vector<std::size_t> counts(out.position.size(), 0);
        std::size_t used = 0;
        for (long n : ns) {
            if (used == count)
                break;
            const double ell = (phase0 / (2 * pi) + offset + static_cast<double>(n)) * period;
            const double lx = fit.center_x + ell * ux / px;
            const double ly = fit.center_y + ell * uy / px;
            double v = 0.0;
            if (!sample(lx, ly, v))
                continue;
            ++used;
            for (std::size_t k = 0; k < out.position.size(); ++k) {
                const double t = out.position[k] / px;
                if (sample(lx - t * uy, ly + t * ux, v)) {
                    sums[k].add(v);
                    ++counts[k];
                }
            }
        }
        profile.resize(out.position.size());
        for (std::size_t k = 0; k < profile.size(); ++k)
            profile[k] = counts[k] ? sums[k].value() / static_cast<double>(counts[k]) : std::nan("");
        return used;
    };
    out.crest_count = average_lines(0.0, crests, out.crest);
    out.trough_count = average_lines(0.5, troughs, out.trough);
    return out;
}

}  // namespace lpp
