#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "lpp/constants.hpp"
#include "lpp/ctf.hpp"
#include "lpp/detector.hpp"
#include "lpp/errors.hpp"
#include "lpp/estimation.hpp"

#include "support.hpp"

using namespace lpp;
using namespace lpp::units;
using lpp::test::Approx;

namespace {

constexpr double PI = 3.14159265358979323846;

const ElectronBeam& beam80()
{
    static const ElectronBeam b = electron_beam_from_voltage(80 * kV);
    return b;
}

// zeta(s) = a s^4 + b s^2 + c sampled on bins of width `step`
RadialProfile zeta_profile(double a, double b, double c, double step, std::size_t n, bool squared)
{
    RadialProfile p;
    for (std::size_t i = 0; i < n; ++i) {
        const double s = static_cast<double>(i) * step;
        const double v = std::sin(a * s * s * s * s + b * s * s + c);
        p.frequency.push_back(s);
        p.value.push_back(squared ? v * v : std::abs(v));
        p.count.push_back(1);
    }
    return p;
}

// Frequency-plane |sin zeta| with defocus astigmatism, on an n x n grid.
RasterImage astigmatic_spectrum(std::size_t n, double step, double defocus, double astig, double angle,
                                double eta0)
{
    RasterImage out(n, n, step, PlaneTag::frequency);
    const double lam = beam80().wavelength;
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
            const double sx = (double(x) - double(n / 2)) * step;
            const double sy = (double(y) - double(n / 2)) * step;
            const double phi = std::atan2(sy, sx);
            const double dz = defocus + 0.5 * astig * std::cos(2 * (phi - angle));
            out(x, y) = std::abs(std::sin(PI * dz * lam * (sx * sx + sy * sy) + eta0));
        }
    return out;
}

// Angular mean of the n-th ring radius where pi |dZ(phi)| lambda s^2 = n pi.
double mean_ring_radius(long n, double defocus, double astig, double angle)
{
    const int m = 7200;
    double sum = 0;
    for (int i = 0; i < m; ++i) {
        const double phi = PI * (i + 0.5) / m;
        const double dz = std::abs(defocus + 0.5 * astig * std::cos(2 * (phi - angle)));
        sum += std::sqrt(double(n) / (dz * beam80().wavelength));
    }
    return sum / m;
}

}  // namespace

TEST_CASE("first zero of a known defocus")
{
    // 880 nm underfocus puts the first nonzero zero at 0.52 / nm
    const double b = -PI * 880e-9 * beam80().wavelength;
    const double step = 0.002e9;
    const auto p = zeta_profile(0.0, b, 0.0, step, 600, false);
    ZeroSearchOptions opt;
    opt.min_frequency = 0.1e9;
    const auto z = locate_ctf_zeros(p, opt);
    REQUIRE(z.size() >= 2);
    const double expected = std::sqrt(1.0 / (880e-9 * beam80().wavelength));
    CHECK(expected / 1e9 == Approx(0.52).epsilon(0.01));
    CHECK(std::abs(z[0] - expected) <= step);
    CHECK(std::abs(z[1] - std::sqrt(2.0) * expected) <= step);
}

TEST_CASE("zeros survive moderate noise")
{
    const double b = -PI * 880e-9 * beam80().wavelength;
    const double step = 0.002e9;
    const auto clean = zeta_profile(0.0, b, 0.0, step, 700, true);
    auto noisy = clean;
    std::mt19937 rng(9);
    std::normal_distribution<double> noise(0.0, 0.05);
    for (double& v : noisy.value)
        v = std::abs(v + noise(rng));
    ZeroSearchOptions opt;
    opt.smoothing_sigma = 3.0;
    opt.min_frequency = 0.3e9;
    opt.max_frequency = 1.35e9;
    const auto z0 = locate_ctf_zeros(clean, opt);
    const auto z = locate_ctf_zeros(noisy, opt);
    REQUIRE(z0.size() >= 4);
    REQUIRE(z.size() == z0.size());
    for (std::size_t k = 0; k < z.size(); ++k) {
        INFO("zero " << k);
        CHECK(std::abs(z[k] - z0[k]) <= 2 * step);
    }
}

TEST_CASE("monotone profile has no zeros")
{
    RadialProfile p;
    for (int i = 0; i < 100; ++i) {
        p.frequency.push_back(i * 1e7);
        p.value.push_back(std::exp(-0.01 * i));
        p.count.push_back(1);
    }
    CHECK_THROWS_AS(locate_ctf_zeros(p), EstimationError);
    p.value.resize(3);
    p.frequency.resize(3);
    CHECK_THROWS_AS(locate_ctf_zeros(p), ValidationError);
}

TEST_CASE("phase assignment conventions")
{
    const std::vector<double> z{1.0, 2.0, 3.0};
    const auto over = assign_zero_phases(z, -1.0);
    const auto under = assign_zero_phases(z, 1.0, 2);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(over[k].frequency == z[k]);
        CHECK(over[k].phase == Approx(-PI * double(k)));
        CHECK(under[k].phase == Approx(PI * double(k + 2)));
    }
    const std::vector<double> bad{1.0, 1.0};
    CHECK_THROWS_AS(assign_zero_phases(bad, -1.0), ValidationError);
    CHECK_THROWS_AS(assign_zero_phases(z, 0.0), ValidationError);
}

TEST_CASE("polynomial recovers exact coefficients")
{
    const double a = -3e-37, b = 2e-18, c = 0.3;
    std::vector<PhasedZero> zeros;
    for (double s : {0.3e9, 0.5e9, 0.7e9, 0.9e9, 1.1e9})
        zeros.push_back({s, a * std::pow(s, 4) + b * s * s + c});
    const auto p = fit_defocus_polynomial(zeros);
    CHECK(p.a == Approx(a).epsilon(1e-8));
    CHECK(p.b == Approx(b).epsilon(1e-8));
    CHECK(p.c == Approx(c).epsilon(1e-8));
    CHECK(p.residual_rms < 1e-8);
    CHECK_FALSE(p.quartic_fixed);
    const auto fixed = fit_defocus_polynomial(std::span(zeros).first(2), a);
    CHECK(fixed.quartic_fixed);
    CHECK(fixed.a == a);
    CHECK(fixed.b == Approx(b).epsilon(1e-8));
    CHECK(fixed.c == Approx(c).epsilon(1e-8));
    CHECK_THROWS_AS(fit_defocus_polynomial(std::span(zeros).first(2)), ValidationError);
}

TEST_CASE("defocus and spherical aberration from the coefficients")
{
    const auto& beam = beam80();
    const double b = PI * -500e-9 * beam.wavelength;
    CHECK(defocus_from_quadratic(b, beam) == Approx(-500e-9).epsilon(1e-14));
    const double a = -(PI / 2) * 1.2e-3 * std::pow(beam.wavelength, 3);
    CHECK(quartic_from_spherical_aberration(1.2e-3, beam) == Approx(a).epsilon(1e-14));
    CHECK(spherical_aberration_from_quartic(a, beam) == Approx(1.2e-3).epsilon(1e-14));
}

TEST_CASE("zero location then polynomial fit reproduces zeta")
{
    const auto& beam = beam80();
    const double b = PI * -1500e-9 * beam.wavelength;
    const double a = -(PI / 2) * 2e-3 * std::pow(beam.wavelength, 3);
    const double c = 0.4;
    const double step = 0.0005e9;
    const auto p = zeta_profile(a, b, c, step, 3000, false);
    ZeroSearchOptions opt;
    opt.smoothing_sigma = 0.0;
    opt.min_frequency = 0.05e9;
    const auto z = locate_ctf_zeros(p, opt);
    REQUIRE(z.size() >= 5);
    // zeta falls from c through 0 at the first zero
    auto phased = assign_zero_phases(z, -1.0);
    const auto poly = fit_defocus_polynomial(phased);
    CHECK(poly.b == Approx(b).epsilon(1e-6));
    CHECK(poly.a == Approx(a).epsilon(1e-4));
    CHECK(poly.c == Approx(c).epsilon(1e-6));
}

TEST_CASE("isotropic rings give unit ellipse ratio")
{
    const double step = 4e6;
    const auto spec = astigmatic_spectrum(512, step, -2000e-9, 0.0, 0.0, 0.0);
    AstigmatismOptions opt;
    opt.min_frequency = 0.2e9;
    const auto r = correct_astigmatism(spec, opt);
    CHECK(r.ellipse.ratio == Approx(1.0).epsilon(0.005));
}

TEST_CASE("injected astigmatism is recovered and removed")
{
    const double step = 4e6;
    const double dz = -2000e-9;
    // 5 % ratio of ring axes
    const double e = (1.05 * 1.05 - 1) / (1.05 * 1.05 + 1);
    const double astig = 2 * e * std::abs(dz);
    const double angle = 40 * deg;
    const auto spec = astigmatic_spectrum(512, step, dz, astig, angle, 0.0);
    AstigmatismOptions opt;
    opt.min_frequency = 0.2e9;
    const auto r = correct_astigmatism(spec, opt);
    CHECK(r.ellipse.ratio == Approx(1.05).epsilon(0.005));
    // rings are largest where |dZ(phi)| is smallest: at angle for overfocus
    double major = angle;
    CHECK(std::abs(std::remainder(r.ellipse.angle - major, PI)) < 2 * deg);
    double sum = 0;
    for (int i = 0; i < 360; ++i)
        sum += r.ellipse.relative_radius(PI * (i + 0.5) / 360);
    CHECK(sum / 360 == Approx(1.0).epsilon(1e-9));

    REQUIRE(r.ring_radii.size() >= 3);
    for (std::size_t k = 0; k < 3; ++k) {
        const double expected = mean_ring_radius(long(k) + 1, dz, astig, angle);
        INFO("ring " << k);
        CHECK(r.ring_radii[k] == Approx(expected).epsilon(0.002));
    }
    // the corrected spectrum has the same rings in every direction
    const auto again = correct_astigmatism(r.spectrum, opt);
    CHECK(again.ellipse.ratio < 1.005);
    const auto prof = rms_angular_average(r.spectrum);
    ZeroSearchOptions zo;
    zo.min_frequency = 0.2e9;
    const auto z = locate_ctf_zeros(prof, zo);
    for (std::size_t k = 0; k < 3; ++k)
        CHECK(z[k] == Approx(mean_ring_radius(long(k) + 1, dz, astig, angle)).epsilon(0.002));
}

TEST_CASE("astigmatism needs a frequency-plane raster")
{
    RasterImage img(64, 64, 1e-9);
    CHECK_THROWS_AS(correct_astigmatism(img), ValidationError);
}

TEST_CASE("CTF fit sees the unscattered-beam phase")
{
    const auto& beam = beam80();
    const std::size_t n = 1024;
    const double px = 0.62e-9;
    const auto grid = FrequencyGrid::for_image(n, n, px);
    OpticsConfig optics;
    optics.defocus = -2000e-9;
    const auto object = sample_standard_normal(n, n, px, 3);
    RasterImage phase = object;
    for (double& v : phase.values())
        v *= 0.03;
    CtfFitOptions fo;
    fo.beam = beam;
    fo.zeros.min_frequency = 0.2e9;
    fo.known_spherical_aberration = 0.0;
    double c[2];
    double defocus[2];
    for (int on = 0; on < 2; ++on) {
        const auto mode = laser_mode_geometry(1064 * nm, 0.026, 0.0, on ? 18 * deg : 0.0);
        const auto ctf = ctf_map(grid, optics, mode, {}, beam, false);
        const auto img = simulate_weak_phase_image(phase, ctf);
        const auto fit = fit_ctf(amplitude_spectrum(img), fo);
        c[on] = fit.c;
        defocus[on] = fit.defocus;
    }
    CHECK(defocus[0] == Approx(-2000e-9).epsilon(0.01));
    CHECK(defocus[1] == Approx(-2000e-9).epsilon(0.01));
    MESSAGE("c off " << c[0] / deg << " deg, on " << c[1] / deg << " deg");
    CHECK(std::abs(c[0]) < 1.5 * deg);
    CHECK(std::abs((c[1] - c[0]) / deg - 18.0) < 1.5);

    // with the quartic free, C_s = 0 comes back within its uncertainty
    fo.known_spherical_aberration.reset();
    const auto mode = laser_mode_geometry(1064 * nm, 0.026, 0.0, 0.0);
    const auto img = simulate_weak_phase_image(phase, ctf_map(grid, optics, mode, {}, beam, false));
    const auto free = fit_ctf(amplitude_spectrum(img), fo);
    CHECK(std::abs(free.a) <= 3 * std::sqrt(free.covariance[0][0]));
}
