#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "detail/optimize.hpp"
#include "detail/summation.hpp"
#include "lpp/errors.hpp"
#include "lpp/estimation.hpp"

namespace lpp {

using constants::pi;

namespace {

std::vector<double> gaussian_smooth(const std::vector<double>& v, double sigma)
{
    if (sigma <= 0.0)
        return v;
    const auto radius = static_cast<long>(std::ceil(4.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    for (long k = -radius; k <= radius; ++k)
        kernel[static_cast<std::size_t>(k + radius)] =
            std::exp(-0.5 * static_cast<double>(k * k) / (sigma * sigma));
    const auto n = static_cast<long>(v.size());
    std::vector<double> out(v.size());
    for (long i = 0; i < n; ++i) {
        double sum = 0.0;
        double weight = 0.0;
        for (long k = -radius; k <= radius; ++k) {
            const long j = i + k;
            if (j < 0 || j >= n)
                continue;
            const double wk = kernel[static_cast<std::size_t>(k + radius)];
            sum += wk * v[static_cast<std::size_t>(j)];
            weight += wk;
        }
        out[static_cast<std::size_t>(i)] = sum / weight;
    }
    return out;
}

// Local minimum of a least-squares cubic in u = s^2 fitted to raw^2 over
// [i - width, i + width]. The cubic term absorbs the envelope slope, which
// would otherwise pull a quadratic vertex outward. Falls back to i when the
// fit has no minimum inside the window.
double refine_minimum(const std::vector<double>& raw, std::size_t i, std::size_t width)
{
    const std::size_t from = i > width ? i - width : 0;
    const std::size_t to = std::min(raw.size() - 1, i + width);
    const double ui = static_cast<double>(i) * static_cast<double>(i);
    const double su = std::max(ui, 1.0) * static_cast<double>(width) / std::max(static_cast<double>(i), 1.0);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(to - from + 1), 4);
    Eigen::VectorXd y(m.rows());
    for (std::size_t j = from; j <= to; ++j) {
        const auto r = static_cast<Eigen::Index>(j - from);
        const double u = (static_cast<double>(j) * static_cast<double>(j) - ui) / su;
        m(r, 0) = 1.0;
        m(r, 1) = u;
        m(r, 2) = u * u;
        m(r, 3) = u * u * u;
        y(r) = raw[j] * raw[j];
    }
    if (m.rows() < 5)
        return static_cast<double>(i);
    const Eigen::Vector4d c = m.colPivHouseholderQr().solve(y);
    // stationary points of c1 + 2 c2 u + 3 c3 u^2 with positive curvature
    double best_u = std::numeric_limits<double>::quiet_NaN();
    const double qa = 3.0 * c(3);
    const double qb = 2.0 * c(2);
    const double qc = c(1);
    auto consider = [&](double u) {
        if (2.0 * c(2) + 6.0 * c(3) * u > 0.0 && (std::isnan(best_u) || std::abs(u) < std::abs(best_u)))
            best_u = u;
    };
    if (std::abs(qa) < 1e-14 * std::abs(qb)) {
        if (qb != 0.0)
            consider(-qc / qb);
    } else {
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc >= 0.0) {
            const double sq = std::sqrt(disc);
            consider((-qb + sq) / (2.0 * qa));
            consider((-qb - sq) / (2.0 * qa));
        }
    }
    if (std::isnan(best_u))
        return static_cast<double>(i);
    const auto to_bin = [&](double u) { return std::sqrt(std::max(ui + u * su, 0.0)); };
    const double cubic_pos = to_bin(best_u);
    if (std::abs(cubic_pos - static_cast<double>(i)) > static_cast<double>(width))
        return static_cast<double>(i);

    // Near a zero, with zeta quadratic in u, raw^2 is
    // A (1 + e du) |sin(k du + m du^2)|^p + F, du = u - u0, up to the
    // envelope's curvature; p = 2 for |CTF| profiles, 4 for squared ones.
    // The form holds out to the shoulders, so it is fitted over twice the
    // cubic's window, which also removes the cubic's window bias.
    const std::size_t far_from = i > 2 * width ? i - 2 * width : 0;
    const std::size_t far_to = std::min(raw.size() - 1, i + 2 * width);
    std::vector<double> us;
    std::vector<double> ys;
    double amp = 0.0;
    for (std::size_t j = far_from; j <= far_to; ++j) {
        us.push_back((static_cast<double>(j) * static_cast<double>(j) - ui) / su);
        ys.push_back(raw[j] * raw[j]);
        amp = std::max(amp, ys.back());
    }
    const double curvature = 2.0 * c(2) + 6.0 * c(3) * best_u;
    const double floor = c(0) + best_u * (c(1) + best_u * (c(2) + best_u * c(3)));
    if (us.size() < 10 || !(amp > 0.0) || !(curvature > 0.0))
        return cubic_pos;
    const double k0 = std::sqrt(curvature / (2.0 * amp));
    const auto fit = detail::least_squares(
        [&](const std::vector<double>& x, std::vector<double>& r) {
            for (std::size_t j = 0; j < us.size(); ++j) {
                const double du = us[j] - x[0];
                const double sn = std::abs(std::sin(x[1] * du + x[2] * du * du));
                r[j] = (x[3] * (1.0 + x[4] * du) * std::pow(sn, x[6]) + x[5] - ys[j]) / amp;
            }
        },
        us.size(), {best_u, k0, 0.0, amp, 0.0, std::max(floor, 0.0), 2.0},
        {0.1, k0, k0, amp, 0.1, 0.01 * amp, 0.5});
    const double pos = to_bin(fit.x[0]);
    if (std::isfinite(pos) && fit.x[6] > 0.5 && std::abs(pos - cubic_pos) < static_cast<double>(width))
        return pos;
    return cubic_pos;
}

// Prominent local minima of the smoothed profile `v` within [lo, hi], each
// refined on `raw` over half the distance to the nearer shoulder maximum.
// Returns fractional bin positions.
std::vector<double> find_minima(const std::vector<double>& v, const std::vector<double>& raw,
                                std::size_t lo, std::size_t hi, double min_prominence)
{
    std::vector<double> out;
    lo = std::max<std::size_t>(lo, 1);
    hi = std::min(hi, v.size() - 2);
    for (std::size_t i = lo; i <= hi && i + 1 < v.size(); ++i) {
        if (!(v[i] < v[i - 1] && v[i] <= v[i + 1]))
            continue;
        // topographic prominence: highest point on each side before the
        // profile drops below v[i]
        double left = v[i];
        std::size_t left_at = i;
        for (std::size_t j = i; j-- > 0;) {
            if (v[j] < v[i])
                break;
            if (v[j] > left) {
                left = v[j];
                left_at = j;
            }
        }
        double right = v[i];
        std::size_t right_at = i;
        for (std::size_t j = i + 1; j < v.size(); ++j) {
            if (v[j] < v[i])
                break;
            if (v[j] > right) {
                right = v[j];
                right_at = j;
            }
        }
        const double shoulder = std::min(left, right);
        if (!(shoulder > 0.0) || (shoulder - v[i]) < min_prominence * shoulder)
            continue;

        // the refinement window reaches halfway to the nearest local maxima
        std::size_t near_left = i;
        while (near_left > 0 && v[near_left - 1] >= v[near_left])
            --near_left;
        std::size_t near_right = i;
        while (near_right + 1 < v.size() && v[near_right + 1] >= v[near_right])
            ++near_right;
        const std::size_t half = std::min({i - near_left, near_right - i, i - left_at, right_at - i});
        out.push_back(refine_minimum(raw, i, std::max<std::size_t>(2, half / 2)));
    }
    return out;
}

double wrap_half_pi(double c)
{
    double w = c - pi * std::round(c / pi);
    if (w <= -pi / 2.0)
        w += pi;
    return w;
}

double mean_radius_factor(double p, double q)
{
    constexpr int n = 3600;
    detail::CompensatedSum s;
    for (int i = 0; i < n; ++i) {
        const double phi = pi * (i + 0.5) / n;
        s.add(1.0 / std::sqrt(1.0 + p * std::cos(2 * phi) + q * std::sin(2 * phi)));
    }
    return s.value() / n;
}

}  // namespace

double Ellipse::relative_radius(double phi) const
{
    return 1.0 / std::sqrt(1.0 + p * std::cos(2 * phi) + q * std::sin(2 * phi)) /
           mean_radius_factor(p, q);
}

std::vector<double> locate_ctf_zeros(const RadialProfile& profile, const ZeroSearchOptions& options)
{
    detail::require(profile.size() >= 5, "radial profile too short for zero search");
    detail::require(options.smoothing_sigma >= 0.0, "smoothing sigma must be non-negative");
    detail::require(options.min_prominence >= 0.0, "prominence must be non-negative");
    const double step = profile.frequency[1] - profile.frequency[0];
    detail::require(step > 0.0, "radial profile frequencies must increase");
    const auto smooth = gaussian_smooth(profile.value, options.smoothing_sigma);
    const auto lo = static_cast<std::size_t>(std::ceil(options.min_frequency / step));
    std::size_t hi = profile.size() - 1;
    if (options.max_frequency > 0.0)
        hi = std::min(hi, static_cast<std::size_t>(std::floor(options.max_frequency / step)));
    std::vector<double> zeros;
    for (double idx : find_minima(smooth, profile.value, lo, hi, options.min_prominence))
        zeros.push_back(profile.frequency[0] + idx * step);
    if (zeros.size() < 2) {
        std::ostringstream msg;
        msg << "found " << zeros.size() << " CTF minima; at least 2 are required";
        throw EstimationError(msg.str());
    }
    return zeros;
}

std::vector<PhasedZero> assign_zero_phases(std::span<const double> zeros, double defocus_sign,
                                           long first_index)
{
    detail::require(defocus_sign != 0.0 && std::isfinite(defocus_sign),
                    "defocus sign must be nonzero");
    const double sign = defocus_sign > 0.0 ? 1.0 : -1.0;
    std::vector<PhasedZero> out;
    out.reserve(zeros.size());
    for (std::size_t k = 0; k < zeros.size(); ++k) {
        if (k > 0)
            detail::require(zeros[k] > zeros[k - 1], "zero locations must be strictly increasing");
        out.push_back({zeros[k], sign * static_cast<double>(first_index + static_cast<long>(k)) * pi});
    }
    return out;
}

DefocusPolynomial fit_defocus_polynomial(std::span<const PhasedZero> zeros,
                                         std::optional<double> fixed_a)
{
    const std::size_t n = zeros.size();
    const std::size_t cols = fixed_a ? 2 : 3;
    if (n < cols) {
        std::ostringstream msg;
        msg << "defocus polynomial needs at least " << cols << " zeros, got " << n;
        if (!fixed_a)
            msg << " (fix the quartic coefficient to fit with 2)";
        throw ValidationError(msg.str());
    }
    double smax = 0.0;
    for (const auto& z : zeros) {
        detail::require(std::isfinite(z.frequency) && z.frequency > 0.0 && std::isfinite(z.phase),
                        "zero frequencies must be positive and finite");
        smax = std::max(smax, z.frequency);
    }

    // u = (s / smax)^2 keeps the design matrix well scaled
    Eigen::MatrixXd design(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols));
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
    const double s4 = std::pow(smax, 4);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = (zeros[i].frequency / smax) * (zeros[i].frequency / smax);
        const auto r = static_cast<Eigen::Index>(i);
        double y = zeros[i].phase;
        if (fixed_a) {
            y -= *fixed_a * s4 * u * u;
            design(r, 0) = u;
            design(r, 1) = 1.0;
        } else {
            design(r, 0) = u * u;
            design(r, 1) = u;
            design(r, 2) = 1.0;
        }
        rhs(r) = y;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < static_cast<Eigen::Index>(cols))
        throw FitError("defocus polynomial is rank deficient (zeros too few or coincident); "
                       "fix the quartic coefficient at the known spherical aberration");
    const Eigen::VectorXd coef = qr.solve(rhs);
    const Eigen::VectorXd resid = rhs - design * coef;
    const double rss = resid.squaredNorm();
    const double dof = static_cast<double>(n) - static_cast<double>(cols);
    const double sigma2 = dof > 0.0 ? rss / dof : 0.0;
    const Eigen::MatrixXd cov_scaled =
        sigma2 * (design.transpose() * design).inverse();

    DefocusPolynomial out;
    out.quartic_fixed = fixed_a.has_value();
    out.residual_rms = std::sqrt(rss / static_cast<double>(n));
    // map scaled coefficients back: a = alpha / smax^4, b = beta / smax^2
    const double scale3[3] = {1.0 / s4, 1.0 / (smax * smax), 1.0};
    if (fixed_a) {
        out.a = *fixed_a;
        out.b = coef(0) * scale3[1];
        out.c = coef(1);
        const int map[2] = {1, 2};
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                out.covariance[map[i]][map[j]] = cov_scaled(i, j) * scale3[map[i]] * scale3[map[j]];
    } else {
        out.a = coef(0) * scale3[0];
        out.b = coef(1) * scale3[1];
        out.c = coef(2);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                out.covariance[i][j] = cov_scaled(i, j) * scale3[i] * scale3[j];
    }
    return out;
}

double defocus_from_quadratic(double b, const ElectronBeam& beam)
{
    return b / (pi * beam.wavelength);
}

double spherical_aberration_from_quartic(double a, const ElectronBeam& beam)
{
    const double lam = beam.wavelength;
    return -2.0 * a / (pi * lam * lam * lam);
}

double quartic_from_spherical_aberration(double cs, const ElectronBeam& beam)
{
    const double lam = beam.wavelength;
    return -0.5 * pi * cs * lam * lam * lam;
}

RasterImage circularize(const RasterImage& spectrum, const Ellipse& ellipse)
{
    const std::size_t w = spectrum.width();
    const std::size_t h = spectrum.height();
    const double cx = static_cast<double>(w / 2);
    const double cy = static_cast<double>(h / 2);
    const double mean = mean_radius_factor(ellipse.p, ellipse.q);
    RasterImage out(w, h, spectrum.pixel_size(), spectrum.plane(), spectrum.kind());
    for (std::size_t y = 0; y < h; ++y) {
        const double dy = static_cast<double>(y) - cy;
        for (std::size_t x = 0; x < w; ++x) {
            const double dx = static_cast<double>(x) - cx;
            const double phi = std::atan2(dy, dx);
            const double rho = 1.0 / std::sqrt(1.0 + ellipse.p * std::cos(2 * phi) +
                                               ellipse.q * std::sin(2 * phi)) / mean;
            const double sx = cx + dx * rho;
            const double sy = cy + dy * rho;
            if (sx < 0.0 || sy < 0.0 || sx > static_cast<double>(w - 1) ||
                sy > static_cast<double>(h - 1))
                continue;
            const auto x0 = std::min(static_cast<std::size_t>(sx), w - 2);
            const auto y0 = std::min(static_cast<std::size_t>(sy), h - 2);
            const double tx = sx - static_cast<double>(x0);
            const double ty = sy - static_cast<double>(y0);
            out(x, y) = (1 - tx) * (1 - ty) * spectrum(x0, y0) + tx * (1 - ty) * spectrum(x0 + 1, y0) +
                        (1 - tx) * ty * spectrum(x0, y0 + 1) + tx * ty * spectrum(x0 + 1, y0 + 1);
        }
    }
    return out;
}

namespace {

struct RingPoint {
    std::size_t ring;
    double phi;
    double radius;  // bins
};

// RMS radial profiles over angular sectors of [0, pi); opposite half-planes fold together.
std::vector<std::vector<double>> sector_profiles(const RasterImage& spectrum, std::size_t sectors,
                                                 std::size_t bins)
{
    const long cx = static_cast<long>(spectrum.width() / 2);
    const long cy = static_cast<long>(spectrum.height() / 2);
    std::vector<std::vector<detail::CompensatedSum>> sums(sectors,
                                                         std::vector<detail::CompensatedSum>(bins));
    std::vector<std::vector<std::size_t>> counts(sectors, std::vector<std::size_t>(bins, 0));
    for (std::size_t y = 0; y < spectrum.height(); ++y) {
        const double dy = static_cast<double>(static_cast<long>(y) - cy);
        for (std::size_t x = 0; x < spectrum.width(); ++x) {
            const double dx = static_cast<double>(static_cast<long>(x) - cx);
            const auto bin = static_cast<std::size_t>(std::lround(std::hypot(dx, dy)));
            if (bin == 0 || bin >= bins)
                continue;
            double phi = std::atan2(dy, dx);
            if (phi < 0.0)
                phi += pi;
            auto sector = static_cast<std::size_t>(phi / pi * static_cast<double>(sectors));
            sector = std::min(sector, sectors - 1);
            const double v = spectrum(x, y);
            sums[sector][bin].add(v * v);
            ++counts[sector][bin];
        }
    }
    std::vector<std::vector<double>> out(sectors, std::vector<double>(bins, 0.0));
    for (std::size_t s = 0; s < sectors; ++s)
        for (std::size_t b = 1; b < bins; ++b)
            out[s][b] = counts[s][b] ? std::sqrt(sums[s][b].value() / static_cast<double>(counts[s][b])) : 0.0;
    // bin 0 is never a ring; copy its neighbor so smoothing sees no dip
    for (auto& p : out)
        p[0] = p[1];
    return out;
}

}  // namespace

AstigmatismCorrection correct_astigmatism(const RasterImage& spectrum,
                                          const AstigmatismOptions& options)
{
    detail::require(spectrum.plane() == PlaneTag::frequency,
                    "astigmatism correction needs a frequency-plane spectrum");
    detail::require(options.sectors >= 6, "at least 6 sectors are required");
    const double step = spectrum.pixel_size();

    const RadialProfile global = rms_angular_average(spectrum, options.wedge);
    ZeroSearchOptions zopt;
    zopt.smoothing_sigma = options.smoothing_sigma;
    zopt.min_frequency = options.min_frequency;
    zopt.max_frequency = options.max_frequency;
    std::vector<double> rings;
    try {
        rings = locate_ctf_zeros(global, zopt);
    } catch (const EstimationError&) {
        throw EstimationError("Thon rings not detectable: fewer than 2 minima in the angular average");
    }
    std::vector<double> ring_bins;
    for (double r : rings)
        ring_bins.push_back(r / step);

    const std::size_t bins = global.size();
    const auto profiles = sector_profiles(spectrum, options.sectors, bins);
    std::vector<RingPoint> points;
    const double sector_width = pi / static_cast<double>(options.sectors);
    for (std::size_t s = 0; s < options.sectors; ++s) {
        const double phi = (static_cast<double>(s) + 0.5) * sector_width;
        if (options.wedge.half_angle > 0.0) {
            const double d = std::remainder(phi - options.wedge.axis_angle, pi);
            if (std::abs(d) < options.wedge.half_angle + 0.5 * sector_width)
                continue;
        }
        const auto smooth = gaussian_smooth(profiles[s], std::max(options.smoothing_sigma, 2.0));
        for (std::size_t k = 0; k < ring_bins.size(); ++k) {
            const double left = k > 0 ? ring_bins[k] - ring_bins[k - 1] : ring_bins[k];
            const double right = k + 1 < ring_bins.size() ? ring_bins[k + 1] - ring_bins[k] : left;
            const auto lo = static_cast<std::size_t>(std::max(1.0, std::ceil(ring_bins[k] - 0.4 * left)));
            const auto hi = std::min(bins - 2, static_cast<std::size_t>(std::floor(ring_bins[k] + 0.4 * right)));
            if (hi <= lo)
                continue;
            std::size_t best = lo;
            for (std::size_t i = lo; i <= hi; ++i)
                if (smooth[i] < smooth[best])
                    best = i;
            if (best == lo || best == hi)
                continue;
            const auto width = static_cast<std::size_t>(
                std::max(2.0, 0.25 * std::min(left, right)));
            const double pos = refine_minimum(profiles[s], best, width);
            points.push_back({k, phi, pos});
        }
    }

    // algebraic: 1/r^2 = A_k (1 + p cos 2phi + q sin 2phi), linear per ring
    double p_sum = 0.0;
    double q_sum = 0.0;
    double weight = 0.0;
    for (std::size_t k = 0; k < ring_bins.size(); ++k) {
        std::vector<const RingPoint*> pts;
        for (const auto& pt : points)
            if (pt.ring == k)
                pts.push_back(&pt);
        if (pts.size() < 4)
            continue;
        Eigen::MatrixXd m(static_cast<Eigen::Index>(pts.size()), 3);
        Eigen::VectorXd y(static_cast<Eigen::Index>(pts.size()));
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            m(r, 0) = 1.0;
            m(r, 1) = std::cos(2 * pts[i]->phi);
            m(r, 2) = std::sin(2 * pts[i]->phi);
            y(r) = 1.0 / (pts[i]->radius * pts[i]->radius);
        }
        const Eigen::Vector3d coef = m.colPivHouseholderQr().solve(y);
        if (!(coef(0) > 0.0))
            continue;
        const auto n = static_cast<double>(pts.size());
        p_sum += n * coef(1) / coef(0);
        q_sum += n * coef(2) / coef(0);
        weight += n;
    }
    if (weight == 0.0)
        throw EstimationError("Thon rings not detectable in enough sectors to fit an ellipse");

    // geometric: relative radial residuals with per-ring scale profiled out
    auto geometric = [&](const std::vector<double>& pq) {
        const double pp = pq[0];
        const double qq = pq[1];
        if (std::hypot(pp, qq) >= 0.9)
            return 1e6;
        std::vector<double> num(ring_bins.size(), 0.0);
        std::vector<double> den(ring_bins.size(), 0.0);
        std::vector<double> rho(points.size());
        for (std::size_t i = 0; i < points.size(); ++i) {
            rho[i] = 1.0 / std::sqrt(1.0 + pp * std::cos(2 * points[i].phi) + qq * std::sin(2 * points[i].phi));
            num[points[i].ring] += points[i].radius * rho[i];
            den[points[i].ring] += rho[i] * rho[i];
        }
        double rss = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const double alpha = num[points[i].ring] / den[points[i].ring];
            const double r = points[i].radius / alpha - rho[i];
            rss += r * r;
        }
        return rss;
    };
    const auto refined = detail::simplex_minimize(
        geometric, {p_sum / weight, q_sum / weight}, {0.01, 0.01}, 1e-10, 400);

    Ellipse e;
    e.p = refined.x[0];
    e.q = refined.x[1];
    const double m = std::hypot(e.p, e.q);
    e.ratio = std::sqrt((1.0 + m) / (1.0 - m));
    double angle = 0.5 * std::atan2(e.q, e.p) + pi / 2.0;
    angle = std::fmod(angle, pi);
    if (angle < 0.0)
        angle += pi;
    e.angle = angle;

    AstigmatismCorrection out;
    out.ellipse = e;
    out.ring_radii = rings;
    out.spectrum = circularize(spectrum, e);
    return out;
}

CtfFit fit_ctf(const RasterImage& spectrum, const CtfFitOptions& options)
{
    detail::require(spectrum.plane() == PlaneTag::frequency, "fit_ctf needs a frequency-plane spectrum");
    detail::require(options.beam.wavelength > 0.0, "fit_ctf needs a valid electron beam");
    CtfFit fit;
    const RasterImage* work = &spectrum;
    AstigmatismCorrection corrected;
    if (options.correct_astigmatism) {
        AstigmatismOptions aopt;
        aopt.wedge = options.wedge;
        aopt.min_frequency = options.zeros.min_frequency;
        aopt.max_frequency = options.zeros.max_frequency;
        aopt.smoothing_sigma = options.zeros.smoothing_sigma;
        corrected = correct_astigmatism(spectrum, aopt);
        fit.ellipse = corrected.ellipse;
        work = &corrected.spectrum;
    }
    fit.profile = rms_angular_average(*work, options.wedge);
    fit.zero_locations = locate_ctf_zeros(fit.profile, options.zeros);
    const auto phased = assign_zero_phases(fit.zero_locations, options.defocus_sign);
    std::optional<double> fixed_a;
    if (options.known_spherical_aberration)
        fixed_a = quartic_from_spherical_aberration(*options.known_spherical_aberration, options.beam);
    const DefocusPolynomial poly = fit_defocus_polynomial(phased, fixed_a);
    fit.a = poly.a;
    fit.b = poly.b;
    fit.c = wrap_half_pi(poly.c);
    fit.defocus = defocus_from_quadratic(poly.b, options.beam);
    fit.spherical_aberration = spherical_aberration_from_quartic(poly.a, options.beam);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            fit.covariance[i][j] = poly.covariance[i][j];
    return fit;
}

}  // namespace lpp
