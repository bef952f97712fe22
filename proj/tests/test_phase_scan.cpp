#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "lpp/errors.hpp"
#include "lpp/estimation.hpp"

#include "support.hpp"

using namespace lpp;
using lpp::test::Approx;

namespace {

constexpr double PI = 3.14159265358979323846;
constexpr double LAMBDA = 1064e-9;

struct Scan {
    std::vector<double> x;
    std::vector<double> c;
};

Scan sinusoid(std::size_t n, double periods, double amplitude, double offset, double phase0)
{
    Scan s;
    const double period = LAMBDA / 2;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = periods * period * double(i) / double(n);
        s.x.push_back(x);
        s.c.push_back(offset + amplitude * std::sin(4 * PI * x / LAMBDA + phase0));
    }
    return s;
}

}  // namespace

TEST_CASE("peak-to-peak identity for sampled sinusoids")
{
    for (std::size_t n : {8u, 16u, 40u}) {
        for (double periods : {1.0, 2.0, 3.0}) {
            for (double phase0 : {0.0, 0.7, 2.0}) {
                const double a = 0.157;
                const auto s = sinusoid(n, periods, a, 0.2, phase0);
                const auto r = analyze_phase_scan(s.x, s.c);
                INFO("n " << n << " periods " << periods << " phase " << phase0);
                CHECK(std::abs(r.peak_to_peak - 2 * a) < 1e-6 * 2 * a);
                CHECK(r.period == Approx(LAMBDA / 2).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("noisy scan recovers period and amplitude")
{
    std::mt19937 rng(4);
    std::normal_distribution<double> noise(0.0, 0.5 * PI / 180);
    auto s = sinusoid(16, 1.0, 9 * PI / 180, 5 * PI / 180, 0.3);
    for (double& c : s.c)
        c += noise(rng);
    const auto r = analyze_phase_scan(s.x, s.c);
    CHECK(r.period == Approx(LAMBDA / 2).epsilon(0.02));
    CHECK(r.peak_to_peak * 180 / PI == Approx(18.0).epsilon(0.1));
}

TEST_CASE("scan preconditions")
{
    const auto s = sinusoid(16, 1.0, 0.1, 0.0, 0.0);
    CHECK_THROWS_AS(analyze_phase_scan(std::span(s.x).first(5), std::span(s.c).first(5)), ValidationError);
    CHECK_THROWS_AS(analyze_phase_scan(std::span(s.x), std::span(s.c).first(10)), ValidationError);
    std::vector<double> flat(16, 0.3);
    CHECK_THROWS_AS(analyze_phase_scan(s.x, flat), EstimationError);
    // a quarter period cannot define the period
    const auto part = sinusoid(16, 0.25, 0.1, 0.0, 0.0);
    CHECK_THROWS_AS(analyze_phase_scan(part.x, part.c), EstimationError);
}

TEST_CASE("scan over CTF fits uses their unscattered-beam phases")
{
    const auto s = sinusoid(12, 1.0, 0.2, 0.0, 0.0);
    std::vector<std::pair<double, CtfFit>> scan;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        CtfFit fit;
        fit.c = s.c[i];
        scan.emplace_back(s.x[i], fit);
    }
    const auto r = analyze_phase_scan(scan);
    CHECK(r.peak_to_peak == Approx(0.4).epsilon(1e-6));
    CHECK(r.positions == s.x);
    CHECK(r.phases == s.c);
}
