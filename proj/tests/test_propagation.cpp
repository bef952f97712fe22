#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>

#include "lpp/constants.hpp"
#include "lpp/errors.hpp"
#include "lpp/propagation.hpp"

#include "support.hpp"

using namespace lpp;
using namespace lpp::units;
using lpp::test::Approx;
using cplx = std::complex<double>;

namespace {

constexpr double PI = 3.14159265358979323846;

// Background-normalised first-harmonic amplitude C of I = 1 - C cos(K x)
// for the grating exp(-i eta0 (1 + cos Kx) / 2), summed over all diffraction
// orders, each delayed by exp(-i pi lambda delta f^2).
double series_contrast(double eta0, double delta, double k, double kl)
{
    const double phi = 2.0 * delta * kl * kl / k;
    cplx a1 = 0.0;
    for (int m = -40; m <= 40; ++m) {
        const auto c = [&](int n) {
            return std::pow(cplx(0, -1), n) * std::cyl_bessel_j(std::abs(n), eta0 / 2) *
                   (n < 0 && (n % 2) ? -1.0 : 1.0);
        };
        a1 += c(m + 1) * std::conj(c(m)) * std::polar(1.0, -phi * (2 * m + 1));
    }
    return -2.0 * a1.real();
}

RonchigramSetup setup_for(double eta0, double delta)
{
    RonchigramSetup s;
    s.beam = electron_beam_from_voltage(80 * kV);
    s.mode = laser_mode_geometry(1064 * nm, 0.026, 0.0, eta0);
    s.delta = delta;
    s.focal_length = 20 * mm;
    // plate pixel of 106 nm, five detector pixels per fringe
    s.magnification = std::abs(delta) * 5e-6 / (106e-9 * s.focal_length);
    return s;
}

double delta_max0()
{
    const auto beam = electron_beam_from_voltage(80 * kV);
    const double kl = 2 * PI / 1064e-9;
    return -(PI / 4) * beam.wavenumber / (kl * kl);
}

// Least-squares cos/sin amplitude along the central row, near the focus.
std::pair<double, double> central_harmonic(const RasterImage& img, double period_px, int half)
{
    const int cx = static_cast<int>(img.width() / 2);
    const int cy = static_cast<int>(img.height() / 2);
    Eigen::MatrixXd a(2 * half + 1, 3);
    Eigen::VectorXd b(2 * half + 1);
    for (int i = -half; i <= half; ++i) {
        const double arg = 2 * PI * i / period_px;
        a.row(i + half) << 1.0, std::cos(arg), std::sin(arg);
        b(i + half) = img(static_cast<std::size_t>(cx + i), static_cast<std::size_t>(cy));
    }
    const Eigen::Vector3d x = a.colPivHouseholderQr().solve(b);
    return {x(1), x(2)};
}

}  // namespace

TEST_CASE("Gaussian beam oracle: waist grows by sqrt 2 over one Rayleigh range")
{
    const double lambda = 1e-9;
    const double k = 2 * PI / lambda;
    const double dx = 10e-9;
    const double w = 12 * dx;
    const double zr = PI * w * w / lambda;
    ComplexField f(512, 512, dx);
    for (std::size_t y = 0; y < 512; ++y)
        for (std::size_t x = 0; x < 512; ++x) {
            const double rx = (double(x) - 256) * dx;
            const double ry = (double(y) - 256) * dx;
            f(x, y) = std::exp(-(rx * rx + ry * ry) / (w * w));
        }
    const auto g = fresnel_propagate(f, zr, k);
    // second moment of the intensity: <x^2> = w(z)^2 / 4
    double m0 = 0, m2 = 0;
    for (std::size_t y = 0; y < 512; ++y)
        for (std::size_t x = 0; x < 512; ++x) {
            const double rx = (double(x) - 256) * dx;
            const double p = std::norm(g(x, y));
            m0 += p;
            m2 += p * rx * rx;
        }
    const double wz = 2 * std::sqrt(m2 / m0);
    CHECK(wz / w == Approx(std::sqrt(2.0)).epsilon(0.01));
    // on-axis intensity halves
    CHECK(std::norm(g(256, 256)) == Approx(0.5).epsilon(0.01));
    CHECK(f.total_intensity() == Approx(g.total_intensity()).epsilon(1e-6));
}

TEST_CASE("forward then backward propagation restores the field")
{
    const double k = 2 * PI / 1e-9;
    ComplexField f(128, 128, 10e-9);
    for (std::size_t y = 0; y < 128; ++y)
        for (std::size_t x = 0; x < 128; ++x) {
            const double rx = (double(x) - 64) / 10, ry = (double(y) - 60) / 7;
            f(x, y) = std::polar(std::exp(-rx * rx - ry * ry), 0.3 * rx);
        }
    const auto back = fresnel_propagate(fresnel_propagate(f, 5e-6, k), -5e-6, k);
    double err = 0;
    for (std::size_t i = 0; i < f.values().size(); ++i)
        err = std::max(err, std::abs(back.values()[i] - f.values()[i]));
    CHECK(err < 1e-6);
}

TEST_CASE("plane wave stays a plane wave")
{
    const double k = 2 * PI / 1e-9;
    const double z = 3e-6;
    ComplexField f(64, 64, 10e-9, PlaneTag::generic, cplx(1.0, 0.0));
    const auto g = fresnel_propagate(f, z, k, Boundary::periodic);
    const cplx expected = std::polar(1.0, std::fmod(k * z, 2 * PI));
    for (const auto& v : g.values())
        CHECK(std::abs(v - expected) < 1e-12);
}

TEST_CASE("too coarse a grid is rejected")
{
    ComplexField f(16, 16, 1e-9);
    CHECK_THROWS_AS(fresnel_propagate(f, 1.0, 2 * PI / 1e-9), ValidationError);
    CHECK(required_grid_size(1.0, 2 * PI / 1e-9, 1e-9) > 16);
}

TEST_CASE("contrast-maximizing offsets")
{
    const auto beam = electron_beam_from_voltage(80 * kV);
    const auto d = contrast_maximizing_offsets(beam, 1064 * nm, 4);
    CHECK(d[0] / mm == Approx(33.9).epsilon(0.002));
    for (std::size_t j = 1; j < d.size(); ++j)
        CHECK((d[j] - d[j - 1]) / mm == Approx(67.7).epsilon(0.002));
    const auto hi = contrast_maximizing_offsets(electron_beam_from_voltage(300 * kV), 1064 * nm, 1);
    CHECK(hi[0] / d[0] ==
          Approx(electron_beam_from_voltage(300 * kV).wavenumber / beam.wavenumber).epsilon(1e-12));
}

TEST_CASE("closed-form contrast limits")
{
    const auto beam = electron_beam_from_voltage(80 * kV);
    const double kl = 2 * PI / 1064e-9;
    CHECK(analytic_fringe_contrast(0.5, 0.0, beam.wavenumber, kl) == 0.0);
    const double d = 0.013;
    CHECK(analytic_fringe_contrast(0.01, d, beam.wavenumber, kl) / 0.01 ==
          Approx(std::sin(2 * d * kl * kl / beam.wavenumber)).epsilon(1e-3));
    // period in delta is pi k / k_L^2
    CHECK(PI * beam.wavenumber / (kl * kl) / mm == Approx(135.5).epsilon(0.002));
    CHECK(analytic_fringe_contrast(0.5, d + PI * beam.wavenumber / (kl * kl), beam.wavenumber, kl) ==
          Approx(analytic_fringe_contrast(0.5, d, beam.wavenumber, kl)).epsilon(1e-9));
}

TEST_CASE("Ronchigram with the laser off is uniform")
{
    const auto s = setup_for(0.0, delta_max0());
    DetectorGrid g{128, 128, 5e-6};
    const auto img = synthesize_ronchigram(s, g);
    for (double v : img.values())
        CHECK(v == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("Ronchigram against the all-orders diffraction series")
{
    const auto beam = electron_beam_from_voltage(80 * kV);
    const double kl = 2 * PI / 1064e-9;
    DetectorGrid g{512, 512, 5e-6};
    for (double eta0 : {10 * deg, 38 * deg, 60 * deg}) {
        for (double frac : {0.5, 0.3, -0.2}) {
            const double delta = 2 * frac * delta_max0();
            auto s = setup_for(eta0, delta);
            s.magnification = std::abs(delta) * 5e-6 / (106e-9 * s.focal_length);
            const auto img = synthesize_ronchigram(s, g);
            const double period_px = detector_fringe_period(s) / g.pixel_size;
            const auto [c, sn] = central_harmonic(img, period_px, 60);
            const double expected = series_contrast(eta0, delta, beam.wavenumber, kl);
            INFO("eta0 " << eta0 / deg << " deg, delta " << delta / mm << " mm");
            CHECK(-c == Approx(expected).epsilon(0.01));
            CHECK(std::abs(sn) < 0.01 * std::abs(expected) + 1e-6);
        }
    }
}

TEST_CASE("Ronchigram fringe period, symmetry and background")
{
    const double delta = delta_max0();
    auto s = setup_for(30 * deg, delta);
    s.magnification = std::abs(delta) * 5e-6 / (130e-9 * s.focal_length);
    DetectorGrid g{1024, 1024, 5e-6};
    const auto img = synthesize_ronchigram(s, g);
    const double expected_period = s.magnification * s.focal_length / std::abs(delta) * 532e-9;
    CHECK(detector_fringe_period(s) == Approx(expected_period).epsilon(1e-12));
    // measured period: the harmonic amplitude peaks at the true period
    double best = 0, best_p = 0;
    for (double p = 0.9; p <= 1.1; p += 0.0005) {
        const auto [c, sn] = central_harmonic(img, p * expected_period / g.pixel_size, 200);
        if (std::hypot(c, sn) > best) {
            best = std::hypot(c, sn);
            best_p = p;
        }
    }
    CHECK(best_p == Approx(1.0).epsilon(0.01));
    // y -> -y about the laser axis
    double asym = 0;
    for (std::size_t y = 1; y < 1024; ++y)
        for (std::size_t x = 0; x < 1024; x += 7)
            asym = std::max(asym, std::abs(img(x, y) - img(x, 1024 - y)));
    CHECK(asym < 1e-9);
    // background far from the axis (beyond 4 w0)
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t y = 0; y < 100; ++y)
        for (std::size_t x = 0; x < 1024; ++x) {
            sum += img(x, y) + img(x, 1023 - y);
            n += 2;
        }
    CHECK(sum / n == Approx(1.0).epsilon(1e-3));
}

TEST_CASE("fringe term flips sign with the plate offset")
{
    DetectorGrid g{256, 256, 5e-6};
    const double d = 0.7 * delta_max0();
    const auto a = synthesize_ronchigram(setup_for(25 * deg, d), g);
    const auto b = synthesize_ronchigram(setup_for(25 * deg, -d), g);
    const auto s = setup_for(25 * deg, d);
    const double p = detector_fringe_period(s) / g.pixel_size;
    CHECK(detector_fringe_period(setup_for(25 * deg, -d)) == Approx(detector_fringe_period(s)));
    // I(-delta, eta) = I(delta, -eta); only the odd orders in eta flip. The
    // even ones cancel for a 1-D grating but not under the Gaussian envelope.
    CHECK(central_harmonic(a, p, 60).first == Approx(-central_harmonic(b, p, 60).first).epsilon(5e-3));
}

TEST_CASE("fringe amplitude vanishes at multiples of the half period in delta")
{
    DetectorGrid g{256, 256, 5e-6};
    const double d = 2 * delta_max0();
    const auto img = synthesize_ronchigram(setup_for(30 * deg, d), g);
    const auto ref = synthesize_ronchigram(setup_for(30 * deg, delta_max0()), g);
    const double p = detector_fringe_period(setup_for(30 * deg, d)) / g.pixel_size;
    const auto [c0, s0] = central_harmonic(img, p, 60);
    const auto [c1, s1] = central_harmonic(ref, p, 60);
    CHECK(std::hypot(c0, s0) < 0.02 * std::hypot(c1, s1));
}

TEST_CASE("undersampled fringes are rejected")
{
    auto s = setup_for(30 * deg, delta_max0());
    s.magnification /= 3;  // under 4 detector pixels per fringe
    CHECK_THROWS_AS(synthesize_ronchigram(s, DetectorGrid{128, 128, 5e-6}), ValidationError);
}
