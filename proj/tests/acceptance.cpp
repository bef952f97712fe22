// End-to-end acceptance checks. One line per check: PASS/FAIL, the measured
// numbers, and the wall time against its budget. Exit status is 0 when the set
// of failing checks equals the set passed with --expect-fail.

#include <CLI11.hpp>
#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lpp/cli.hpp"
#include "lpp/constants.hpp"
#include "lpp/ctf.hpp"
#include "lpp/detector.hpp"
#include "lpp/errors.hpp"
#include "lpp/estimation.hpp"
#include "lpp/log.hpp"
#include "lpp/physics.hpp"
#include "lpp/propagation.hpp"

using namespace lpp;
using namespace lpp::units;

namespace {

constexpr double PI = std::numbers::pi;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what)
    {
        pass = pass && ok;
        detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [x]");
    }
};

std::string fmt(double v, int digits = 4)
{
    std::ostringstream s;
    s << std::setprecision(digits) << v;
    return s.str();
}

const ElectronBeam& beam80()
{
    static const ElectronBeam b = electron_beam_from_voltage(80 * kV);
    return b;
}

double laser_k() { return 2 * PI / (1064 * nm); }

// ---------------------------------------------------------------------------

void mode_geometry(Outcome& o)
{
    const auto mode = laser_mode_geometry(1064 * nm, 0.026, 0.0, 0.0);
    const double w0 = mode.waist() / um;
    const double zr = mode.rayleigh_range() / um;
    o.require(std::abs(w0 / 13.03 - 1) < 0.01, "w0 " + fmt(w0, 5) + " um vs 13.03");
    o.require(std::abs(zr / 501 - 1) < 0.02, "z_R " + fmt(zr, 4) + " um vs 501");
}

void offset_spacing(Outcome& o)
{
    const auto d = contrast_maximizing_offsets(beam80(), 1064 * nm, 4);
    double worst = 0;
    for (std::size_t j = 0; j < d.size(); ++j)
        worst = std::max(worst, std::abs(std::abs(d[j]) / (67.7 * mm * (j + 0.5)) - 1));
    o.require(worst < 0.02, "spacing " + fmt(std::abs(d[1] - d[0]) / mm, 5) +
                                " mm vs 67.7, worst deviation " + fmt(100 * worst, 2) + "%");
}

// Cosine amplitude of the fringe along the central row, over +-half pixels.
double central_fringe(const RasterImage& img, double period_px, int half)
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
    return x(1);
}

void ronchigram_closed_form(Outcome& o)
{
    const double k = beam80().wavenumber;
    const double kl = laser_k();
    const double period = PI * k / (kl * kl);  // of the contrast in delta
    const DetectorGrid grid{2048, 2048, 5e-6};
    for (double eta0 : {20 * deg, 30 * deg, 38 * deg, 45 * deg}) {
        const double peak = std::abs(analytic_fringe_contrast(eta0, period / 4, k, kl));
        double worst = 0;
        for (int j = 0; j < 10; ++j) {
            const double delta = -period / 2 + period * (j + 0.5) / 10;
            RonchigramSetup s;
            s.beam = beam80();
            s.mode = laser_mode_geometry(1064 * nm, 0.026, 0.0, eta0);
            s.delta = delta;
            s.focal_length = 20 * mm;
            // five detector pixels per fringe
            s.magnification = std::abs(delta) * grid.pixel_size / (106e-9 * s.focal_length);
            const auto img = synthesize_ronchigram(s, grid);
            const double measured = -central_fringe(img, detector_fringe_period(s) / grid.pixel_size, 60);
            worst = std::max(worst, std::abs(measured - analytic_fringe_contrast(eta0, delta, k, kl)) / peak);
        }
        o.require(worst < 0.05, fmt(eta0 / deg, 3) + " deg: " + fmt(100 * worst, 3) + "% of peak");
    }
}

void ronchigram_round_trip(Outcome& o)
{
    RonchigramSetup s;
    s.beam = beam80();
    s.mode = laser_mode_geometry(1064 * nm, 0.026, 0.0, 38 * deg);
    s.delta = -(PI / 4) * s.beam.wavenumber / (laser_k() * laser_k());
    s.magnification = 80;
    const std::size_t n = 256;
    auto img = synthesize_ronchigram(s, DetectorGrid{n, n, 5e-6});
    for (double& v : img.values())
        v *= 100;
    img = sample_poisson_counts(apply_coincidence_loss(img, {0.01}), 3);

    RonchigramHints h;
    h.beam = s.beam;
    h.focal_length = s.focal_length;
    h.magnification = s.magnification;
    h.delta = s.delta;
    h.wavevector = Wavevector{1.0 / detector_fringe_period(s), 0.0};
    h.outer_iterations = 5;
    const auto fit = fit_ronchigram(img, h);
    o.require(std::abs(fit.peak_phase - 38 * deg) < 2 * deg, "eta0 " + fmt(fit.peak_phase / deg) + " deg");
    o.require(std::abs(fit.numerical_aperture / 0.026 - 1) < 0.05, "NA " + fmt(fit.numerical_aperture));
    o.require(std::abs(fit.theta_cl / 0.01 - 1) < 0.2, "Theta " + fmt(fit.theta_cl));
    const auto& hist = fit.objective_history;
    const bool monotone = std::is_sorted(hist.rbegin(), hist.rend());
    o.require(monotone && hist.size() == 6,
              "objective " + fmt(hist.front()) + " -> " + fmt(hist.back()) + " over 5 repetitions");
}

void ctf_structure(Outcome& o)
{
    const auto& beam = beam80();
    const auto mode = laser_mode_geometry(1064 * nm, 0.026, 0.0, 18 * deg);
    OpticsConfig optics;
    const double step = max_ctf_step(mode, optics.focal_length, beam);
    const std::size_t n = 1024;
    const auto map = ctf_map({n, n, step}, optics, mode, {}, beam, false);
    o.require(map.at(n / 2, n / 2) == std::complex<double>(0.0, 0.0), "CTF(0) exactly 0");

    // the laser axis runs along x; across it the stripe fades into the plateau
    const double s0 = mode.waist() / (beam.wavelength * optics.focal_length);
    double sum = 0;
    std::size_t count = 0;
    std::vector<double> across;
    for (std::size_t iy = n / 2; iy < n; ++iy) {
        const double sy = map.frequency_y(iy);
        const double rel = std::abs(map.at(n / 2, iy)) / envelope(sy, optics);
        across.push_back(rel);
        if (sy > 3 * s0 && sy < 5 * s0) {
            sum += rel;
            ++count;
        }
    }
    const double plateau = sum / double(count);
    o.require(std::abs(plateau / 0.31 - 1) < 0.03, "plateau " + fmt(plateau) + " E vs 0.31 E");

    // half-width: where the laser phase is down to 1/e^2 of its peak
    const double eta0 = mode.peak_phase();
    const double level = std::sin(eta0 * (1 - std::exp(-2.0)));
    double half = 0;
    for (std::size_t i = 1; i < across.size(); ++i)
        if (across[i - 1] < level && across[i] >= level) {
            const double t = (level - across[i - 1]) / (across[i] - across[i - 1]);
            half = (double(i - 1) + t) * step;
            break;
        }
    o.require(half > 0 && std::abs(half * 6 * nm - 1) < 0.10,
              "stripe half-width 1/(" + fmt(1 / (half * nm)) + " nm) vs 1/(6 nm)");
}

double band_rms(const RadialProfile& p, double lo, double hi)
{
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p.frequency[i] >= lo && p.frequency[i] <= hi) {
            sum += p.value[i] * p.value[i];
            ++n;
        }
    return n ? std::sqrt(sum / double(n)) : 0.0;
}

void rms_plateaus(Outcome& o)
{
    const auto& beam = beam80();
    OpticsConfig optics;
    const double p = 1064 * nm / (2 * beam.wavelength * optics.focal_length);
    for (double eta0 : {18 * deg, 90 * deg}) {
        const auto mode = laser_mode_geometry(1064 * nm, 0.026, 0.0, eta0);
        const double s0 = mode.waist() / (beam.wavelength * optics.focal_length);
        const auto fine = ctf_map({256, 256, p / 16}, optics, mode, {}, beam, false);
        const double first = band_rms(rms_angular_average(fine), p / 2, 5 * p / 2) / std::sin(eta0);
        OpticsConfig bare = optics;
        bare.envelope_halfmax_radius = std::numeric_limits<double>::infinity();
        const auto wide = ctf_map({2048, 2048, max_ctf_step(mode, optics.focal_length, beam)}, bare,
                                  mode, {}, beam, false);
        const double second = band_rms(rms_angular_average(wide), 4 * s0, 8 * s0) / std::sin(eta0);
        const std::string tag = fmt(eta0 / deg, 3) + " deg: ";
        o.require(std::abs(first / 0.7 - 1) < 0.10, tag + "first " + fmt(first) + " sin(eta0) vs 0.7");
        o.require(std::abs(second - 1) < 0.03, tag + "second " + fmt(second) + " sin(eta0) vs 1");
    }
}

// Angular mean radius of the ring where pi |dZ(phi)| lambda s^2 = m pi + eta0.
double mean_ring_radius(double m, double eta0, double defocus, double astig, double angle)
{
    const int count = 7200;
    double sum = 0;
    for (int i = 0; i < count; ++i) {
        const double phi = PI * (i + 0.5) / count;
        const double dz = std::abs(defocus + 0.5 * astig * std::cos(2 * (phi - angle)));
        sum += std::sqrt((m + eta0 / PI) / (dz * beam80().wavelength));
    }
    return sum / count;
}

void thon_round_trip(Outcome& o)
{
    const auto& beam = beam80();
    const std::size_t n = 2048;
    const double px = 0.31 * nm;
    const auto grid = FrequencyGrid::for_image(n, n, px);
    OpticsConfig optics;
    optics.defocus = -500 * nm;
    // 5 % ratio of ring axes
    const double e = (1.05 * 1.05 - 1) / (1.05 * 1.05 + 1);
    optics.defocus_astigmatism = 2 * e * std::abs(optics.defocus);
    optics.astigmatism_angle = 30 * deg;

    auto object = sample_standard_normal(n, n, px, 21);
    for (double& v : object.values())
        v *= 0.03;
    CtfFitOptions fo;
    fo.beam = beam;
    fo.zeros.min_frequency = 0.4 * per_nm;
    fo.known_spherical_aberration = 0.0;

    double c[2] = {};
    for (int on = 0; on < 2; ++on) {
        const double eta0 = on ? 18 * deg : 0.0;
        const auto mode = laser_mode_geometry(1064 * nm, 0.026, 0.0, eta0);
        const auto ctf = ctf_map(grid, optics, mode, {}, beam, false);
        auto img = simulate_weak_phase_image(object, ctf);
        for (double& v : img.values())
            v = std::max(v, 0.0) * 1000;
        img = sample_poisson_counts(img, 40 + on);
        const auto fit = fit_ctf(amplitude_spectrum(img), fo);
        c[on] = fit.c;
        const std::string tag = fmt(eta0 / deg, 2) + " deg: ";
        o.require(std::abs(fit.defocus / optics.defocus - 1) < 0.03,
                  tag + "dZ " + fmt(fit.defocus / nm) + " nm, ratio " + fmt(fit.ellipse.ratio));

        // the estimated ellipse applied to the noise-free |CTF| keeps the mean ring radii
        const auto corrected = circularize(ctf.magnitude(), fit.ellipse);
        const auto profile = rms_angular_average(corrected, fo.wedge);
        ZeroSearchOptions zo = fo.zeros;
        zo.smoothing_sigma = 0;
        double worst = 0;
        std::size_t rings = 0;
        for (double z : locate_ctf_zeros(profile, zo)) {
            double best = std::numeric_limits<double>::infinity();
            for (int m = 0; m < 200; ++m) {
                const double r = mean_ring_radius(m, eta0, optics.defocus, optics.defocus_astigmatism,
                                                  optics.astigmatism_angle);
                best = std::min(best, std::abs(z / r - 1));
            }
            worst = std::max(worst, best);
            ++rings;
        }
        o.require(rings >= 3 && worst < 0.002,
                  tag + std::to_string(rings) + " rings, worst radius error " + fmt(100 * worst, 2) + "%");
    }
    const double dc = (c[1] - c[0]) / deg;
    o.require(std::abs(dc - 18) < 1.5, "delta c " + fmt(dc) + " deg");
}

void phase_scan(Outcome& o)
{
    // identity on noiseless sinusoids
    double worst = 0;
    for (std::size_t n : {16u, 24u, 40u}) {
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = 0.532 * um * double(i) / double(n);
            y[i] = 0.2 + 0.15 * std::sin(2 * PI * double(i) / double(n) + 0.7);
        }
        worst = std::max(worst, std::abs(analyze_phase_scan(x, y).peak_to_peak / 0.3 - 1));
    }
    o.require(worst < 1e-6, "ptp = 2A to " + fmt(worst, 2));

    // a larger defocus puts about 20 zeros in the fitted band, which keeps the
    // per-position phase scatter well below a degree
    cli::RunConfig c;
    c.eta0_deg = 18;
    c.defocus_nm = -2000;
    c.counts = 1000;
    c.grid_n = 2048;
    c.pixel_size_nm = 0.31;
    const auto options = cli::ctf_fit_options_of(c);
    std::vector<std::pair<double, CtfFit>> scan;
    const double period = 1064 * nm / 2;
    for (std::size_t j = 0; j < 16; ++j) {
        auto step = c;
        step.axial_offset_um = period * double(j) / 16 / um;
        step.seed = 100 + j;
        scan.emplace_back(step.axial_offset_um * um,
                          fit_ctf(amplitude_spectrum(cli::simulate_image(step)), options));
    }
    const auto r = analyze_phase_scan(scan);
    o.require(std::abs(r.period / period - 1) < 0.02, "period " + fmt(r.period / nm) + " nm");
    o.require(std::abs(r.peak_to_peak / deg - 18) < 1.5, "ptp " + fmt(r.peak_to_peak / deg) + " deg");
}

void coincidence(Outcome& o)
{
    double worst = 0;
    for (double theta : {1e-6, 1e-3, 0.01, 1.0}) {
        for (int i = 0; i <= 990; ++i) {
            const double act = (i / 1000.0) / theta;
            const double back = invert_coincidence_loss(apply_coincidence_loss(act, {theta}), {theta});
            worst = std::max(worst, act > 0 ? std::abs(back / act - 1) : std::abs(back));
        }
    }
    o.require(worst < 1e-10, "round trip " + fmt(worst, 2));
    bool thrown = false;
    try {
        invert_coincidence_loss(1.0 / 0.01, {0.01});
    } catch (const SaturationError&) {
        thrown = true;
    }
    o.require(thrown, "saturation error at I_det Theta = 1");
}

void ctf_forms(Outcome& o)
{
    const auto& beam = beam80();
    const auto mode = laser_mode_geometry(1064 * nm, 0.026, 0.0, 90 * deg);
    OpticsConfig optics;
    optics.defocus = -800 * nm;
    optics.spherical_aberration = 2.7 * mm;
    optics.defocus_astigmatism = 40 * nm;
    optics.astigmatism_angle = 20 * deg;
    const FrequencyGrid grid{512, 512, max_ctf_step(mode, optics.focal_length, beam)};
    const auto a = ctf_map(grid, optics, mode, {}, beam, true);
    const auto b = ctf_map(grid, optics, mode, {}, beam, false);
    double worst = 0;
    for (std::size_t i = 0; i < a.values().size(); ++i)
        worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
    o.require(worst < 1e-12, "max |difference| " + fmt(worst, 2));
}

void phase_from_intensity(Outcome& o)
{
    const double w0 = 13 * um;
    const double wl = 1064 * nm;
    const auto mode = laser_mode_geometry(wl, wl / (PI * w0), 0.0, 0.0);
    const double i0 = 43 * GW_per_cm2;
    const double eta = peak_phase_from_intensity(i0, mode, beam80());
    o.require(eta >= 30 * deg && eta <= 50 * deg, "simple model " + fmt(eta / deg, 3) + " deg, reported 38 deg");
    double worst = 0;
    for (double f : {0.1, 0.5, 2.0, 3.7})
        worst = std::max(worst, std::abs(peak_phase_from_intensity(f * i0, mode, beam80()) / (f * eta) - 1));
    o.require(worst < 1e-14, "linear in intensity to " + fmt(worst, 2));
}

struct Check {
    std::string name;
    double budget_s;
    std::function<void(Outcome&)> run;
};

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"end-to-end acceptance checks"};
    std::vector<std::string> expected;
    std::vector<std::string> only;
    std::string report_path;
    app.add_option("--expect-fail", expected, "checks known to fail");
    app.add_option("--report", report_path, "also write the report lines to this file");
    app.add_option("--only", only, "run just these checks");
    CLI11_PARSE(app, argc, argv);

    const std::vector<Check> checks{
        {"mode-geometry", 1, mode_geometry},
        {"offset-spacing", 1, offset_spacing},
        {"ronchigram-closed-form", 120, ronchigram_closed_form},
        {"ronchigram-round-trip", 600, ronchigram_round_trip},
        {"ctf-structure", 60, ctf_structure},
        {"rms-plateaus", 120, rms_plateaus},
        {"thon-round-trip", 600, thon_round_trip},
        {"phase-scan", 900, phase_scan},
        {"coincidence-loss", 1, coincidence},
        {"ctf-forms", 30, ctf_forms},
        {"phase-from-intensity", 1, phase_from_intensity},
    };
    for (const auto& name : expected)
        if (std::none_of(checks.begin(), checks.end(), [&](const Check& c) { return c.name == name; })) {
            std::cerr << "unknown check: " << name << "\n";
            return 2;
        }

    set_warning_sink([](const std::string&) {});
    std::ofstream report;
    if (!report_path.empty())
        report.open(report_path);
    std::set<std::string> failed;
    for (const auto& check : checks) {
        if (!only.empty() && std::find(only.begin(), only.end(), check.name) == only.end())
            continue;
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            check.run(o);
        } catch (const std::exception& e) {
            o.require(false, std::string("threw: ") + e.what());
        }
        const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        o.require(t < check.budget_s, "time " + fmt(t, 3) + " s of " + fmt(check.budget_s) + " s");
        if (!o.pass)
            failed.insert(check.name);
        const bool known = std::find(expected.begin(), expected.end(), check.name) != expected.end();
        std::ostringstream line;
        line << (o.pass ? "PASS " : known ? "FAIL (known) " : "FAIL ") << check.name << ": " << o.detail.str();
        std::cout << line.str() << std::endl;
        if (report)
            report << line.str() << std::endl;
    }
    std::set<std::string> known;
    for (const auto& name : expected)
        if (only.empty() || std::find(only.begin(), only.end(), name) != only.end())
            known.insert(name);
    for (const auto& name : known)
        if (!failed.count(name))
            std::cout << "note: " << name << " was expected to fail but passed\n";
    return failed == known ? 0 : 1;
}
