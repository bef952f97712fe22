#include <Eigen/Core>
#include <fftw3.h>
#include <gsl/gsl_version.h>

#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "lpp/cli.hpp"
#include "lpp/constants.hpp"
#include "lpp/detector.hpp"
#include "lpp/errors.hpp"
#include "lpp/log.hpp"

#ifndef LPP_VERSION
#define LPP_VERSION "0.0.0"
#endif

namespace lpp::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lpp::units;

namespace {

struct Options {
    std::string command;
    std::string config_path;
    std::string out_dir = ".";
    std::string format = "raster";
    std::string input;
    std::optional<std::uint64_t> seed;
};

using Report = std::vector<std::pair<std::string, std::string>>;

std::string num(double v)
{
    std::ostringstream s;
    s << std::setprecision(10) << v;
    return s.str();
}

/// Outputs are computed in memory and written only after every step succeeded.
struct Outputs {
    struct RasterOut {
        std::string stem;
        RasterImage image;
    };
    struct ProfileOut {
        std::string file;
        std::vector<double> x;
        std::vector<double> y;
        std::string x_name;
        std::string y_name;
    };
    std::vector<RasterOut> rasters;
    std::vector<ProfileOut> profiles;
    Report report;

    void add(std::string key, std::string value) { report.emplace_back(std::move(key), std::move(value)); }
    void add(std::string key, double value) { add(std::move(key), num(value)); }
};

Outputs::ProfileOut profile_per_nm(std::string file, const RadialProfile& p, std::string y_name)
{
    Outputs::ProfileOut out{std::move(file), {}, p.value, "s_per_nm", std::move(y_name)};
    for (double s : p.frequency)
        out.x.push_back(s / per_nm);
    return out;
}

void ronchigram_simulation(const RunConfig& c, Outputs& out)
{
    const auto setup = ronchigram_setup_of(c);
    const auto grid = detector_of(c);
    auto image = synthesize_ronchigram(setup, grid);
    const double scale = c.counts > 0.0 ? c.counts : 1.0;
    for (double& v : image.values())
        v *= scale;
    if (c.theta_cl > 0.0)
        image = apply_coincidence_loss(image, {c.theta_cl});
    if (c.counts > 0.0)
        image = sample_poisson_counts(image, c.seed);
    out.rasters.push_back({"ronchigram", std::move(image)});
    out.add("plate_offset_mm", setup.delta / mm);
    out.add("fringe_period_um", detector_fringe_period(setup) / um);
    out.add("plate_pixel_nm", plate_pixel_size(setup, grid) / nm);
    out.add("waist_um", setup.mode.waist() / um);
    out.add("rayleigh_range_um", setup.mode.rayleigh_range() / um);
}

void image_simulation(const RunConfig& c, Outputs& out)
{
    out.rasters.push_back({"image", simulate_image(c)});
    out.add("ctf_step_per_nm", frequency_grid_of(c).step / per_nm);
    out.add("defocus_nm", c.defocus_nm);
    out.add("laser_phase_deg", c.eta0_deg);
}

void ctf_map_command(const RunConfig& c, Outputs& out)
{
    const auto beam = beam_of(c);
    const auto mode = mode_of(c);
    const auto optics = optics_of(c);
    const auto align = alignment_of(c);
    const auto map = ctf_map(frequency_grid_of(c), optics, mode, align, beam, c.symmetric);
    const WedgeExclusion wedge{c.wedge_deg * deg, align.rotation};
    out.profiles.push_back(profile_per_nm("rms_profile.csv", rms_angular_average(map, wedge), "rms_ctf"));
    out.rasters.push_back({"ctf", map.real_part()});
    out.add("ctf_step_per_nm", map.step() / per_nm);
    out.add("ctf_origin", std::abs(map.at(map.nx() / 2, map.ny() / 2)));
    out.add("laser_phase_deg", c.eta0_deg);
    out.add("stripe_scale_per_nm", mode.waist() / (beam.wavelength * optics.focal_length) / per_nm);
    if (mode.peak_phase() > 0.0) {
        const auto stripes = misalignment_signature(align, mode, optics.focal_length, beam);
        out.add("stripe_count", static_cast<double>(stripes.count));
        for (std::size_t i = 0; i < stripes.count; ++i) {
            const std::string k = "stripe_" + std::to_string(i + 1);
            out.add(k + "_center_per_nm", stripes.centers[i] / per_nm);
            out.add(k + "_half_width_per_nm", stripes.half_widths[i] / per_nm);
        }
    }
}

RasterImage as_spectrum(const RasterImage& input)
{
    return input.plane() == PlaneTag::frequency ? input : amplitude_spectrum(input);
}

void rms_profile_command(const RunConfig& c, const RasterImage& input, Outputs& out)
{
    const auto spectrum = as_spectrum(input);
    const WedgeExclusion wedge{c.wedge_deg * deg, c.rotation_deg * deg};
    const auto profile = rms_angular_average(spectrum, wedge);
    out.profiles.push_back(profile_per_nm("rms_profile.csv", profile, "rms"));
    out.add("bins", static_cast<double>(profile.size()));
    out.add("step_per_nm", spectrum.pixel_size() / per_nm);
}

void fit_ronchigram_command(const RunConfig& c, const RasterImage& input, Outputs& out)
{
    const auto hints = ronchigram_hints_of(c);
    const auto fit = fit_ronchigram(input, hints);
    out.add("laser_phase_deg", fit.peak_phase / deg);
    out.add("numerical_aperture", fit.numerical_aperture);
    out.add("theta_cl", fit.theta_cl);
    out.add("center_x_px", fit.center_x);
    out.add("center_y_px", fit.center_y);
    out.add("fringe_period_um", fit.wavevector.period() / um);
    out.add("laser_axis_deg", fit.wavevector.angle() / deg);
    out.add("background_counts", fit.background);
    out.add("dead_pixels", static_cast<double>(fit.dead_pixels));
    out.add("residual_rms", fit.residual_norm);
    for (std::size_t i = 0; i < fit.objective_history.size(); ++i)
        out.add("objective_" + std::to_string(i), fit.objective_history[i]);
    out.rasters.push_back({"model", ronchigram_model(fit, hints, input)});

    const auto profiles = extract_fringe_profiles(input, fit, c.fringe_crests, c.fringe_troughs);
    std::vector<double> x_um;
    for (double x : profiles.position)
        x_um.push_back(x / um);
    out.profiles.push_back({"crest_profile.csv", x_um, profiles.crest, "x_um", "counts"});
    out.profiles.push_back({"trough_profile.csv", x_um, profiles.trough, "x_um", "counts"});
    out.add("crest_count", static_cast<double>(profiles.crest_count));
    out.add("trough_count", static_cast<double>(profiles.trough_count));
}

void report_ctf_fit(const CtfFit& fit, Outputs& out)
{
    out.add("defocus_nm", fit.defocus / nm);
    out.add("spherical_aberration_mm", fit.spherical_aberration / mm);
    out.add("unscattered_phase_deg", fit.c / deg);
    out.add("unscattered_phase_sd_deg", std::sqrt(fit.covariance[2][2]) / deg);
    out.add("quadratic_rad_nm2", fit.b / (nm * nm));
    out.add("quartic_rad_nm4", fit.a / (nm * nm * nm * nm));
    out.add("astigmatism_ratio", fit.ellipse.ratio);
    out.add("astigmatism_angle_deg", fit.ellipse.angle / deg);
    for (std::size_t i = 0; i < fit.zero_locations.size(); ++i)
        out.add("zero_" + std::to_string(i + 1) + "_per_nm", fit.zero_locations[i] / per_nm);
}

void fit_ctf_command(const RunConfig& c, const RasterImage& input, Outputs& out)
{
    const auto fit = fit_ctf(as_spectrum(input), ctf_fit_options_of(c));
    report_ctf_fit(fit, out);
    out.profiles.push_back(profile_per_nm("rms_profile.csv", fit.profile, "rms"));
}

void scan_command(const RunConfig& c, const std::optional<fs::path>& input, Outputs& out)
{
    std::vector<double> positions;
    std::vector<double> phases;
    if (input) {
        std::vector<std::string> header;
        const auto cols = io::read_csv_columns(*input, &header);
        detail::require(cols.size() >= 2, "scan CSV needs position_um and phase_deg columns");
        for (double p : cols[0])
            positions.push_back(p * um);
        for (double p : cols[1])
            phases.push_back(p * deg);
    } else {
        // synthetic scan: the beam walks across one standing-wave period
        const double period = c.lambda_l_nm * nm / 2.0;
        const auto options = ctf_fit_options_of(c);
        for (std::size_t j = 0; j < c.scan_positions; ++j) {
            RunConfig step = c;
            step.axial_offset_um =
                c.axial_offset_um + period * static_cast<double>(j) / c.scan_positions / um;
            step.seed = c.seed + j;
            const auto fit = fit_ctf(amplitude_spectrum(simulate_image(step)), options);
            positions.push_back(step.axial_offset_um * um);
            phases.push_back(fit.c);
        }
    }
    const auto result = analyze_phase_scan(positions, phases);
    out.add("positions", static_cast<double>(result.positions.size()));
    out.add("peak_to_peak_deg", result.peak_to_peak / deg);
    out.add("period_um", result.period / um);
    Outputs::ProfileOut table{"scan.csv", {}, {}, "position_um", "phase_deg"};
    for (std::size_t i = 0; i < positions.size(); ++i) {
        table.x.push_back(positions[i] / um);
        table.y.push_back(phases[i] / deg);
    }
    out.profiles.push_back(std::move(table));
}

json versions()
{
    json v;
    v["lppkit"] = LPP_VERSION;
    v["fftw"] = std::string(fftw_version);
    v["gsl"] = GSL_VERSION;
    v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                 "." + std::to_string(EIGEN_MINOR_VERSION);
    return v;
}

std::vector<std::string> write_outputs(const Outputs& out, const RunConfig& c, const Options& opt,
                                       const fs::path& dir)
{
    std::vector<std::string> files;
    const auto scaling =
        c.png_scaling == "minmax" ? io::GrayScaling::min_max : io::GrayScaling::percentile_1_99;
    for (const auto& r : out.rasters) {
        std::string name;
        if (opt.format == "csv") {
            name = r.stem + ".csv";
            io::write_raster_csv(r.image, dir / name);
        } else if (opt.format == "png") {
            name = r.stem + ".png";
            io::write_png(r.image, dir / name, scaling);
        } else {
            name = r.stem + ".lppr";
            io::write_raster(r.image, dir / name);
        }
        files.push_back(name);
    }
    for (const auto& p : out.profiles) {
        io::write_profile_csv(p.x, p.y, p.x_name, p.y_name, dir / p.file);
        files.push_back(p.file);
    }
    std::string text;
    for (const auto& [k, v] : out.report)
        text += k + ": " + v + "\n";
    io::atomic_write(dir / "report.txt", text);
    files.push_back("report.txt");
    return files;
}

void write_manifest(const RunConfig& c, const Options& opt, const fs::path& dir,
                    std::vector<std::string> files)
{
    std::sort(files.begin(), files.end());
    json m;
    m["command"] = opt.command;
    m["config"] = json::parse(config_to_json(c));
    m["seed"] = c.seed;
    m["format"] = opt.format;
    m["versions"] = versions();
    if (!opt.input.empty()) {
        m["input"] = {{"file", fs::path(opt.input).filename().string()},
                      {"sha256", io::sha256_file(opt.input)}};
    }
    json outputs = json::array();
    for (const auto& f : files) {
        outputs.push_back({{"file", f},
                           {"bytes", fs::file_size(dir / f)},
                           {"sha256", io::sha256_file(dir / f)}});
    }
    m["outputs"] = outputs;
    io::atomic_write(dir / "manifest.json", m.dump(2) + "\n");
}

bool needs_input(const std::string& command)
{
    return command == "rms-profile" || command == "fit-ronchigram" || command == "fit-ctf";
}

int execute(const Options& opt)
{
    // 1. validation: nothing is written if any of this fails
    RunConfig config;
    if (!opt.config_path.empty()) {
        std::ifstream in(opt.config_path);
        if (!in)
            throw ValidationError("cannot read config file " + opt.config_path);
        std::stringstream text;
        text << in.rdbuf();
        config = parse_config(text.str());
    }
    if (opt.seed)
        config.seed = *opt.seed;
    validate(config);
    if (needs_input(opt.command) && opt.input.empty())
        throw ValidationError(opt.command + " requires --input");
    if (!opt.input.empty() && !fs::is_regular_file(opt.input))
        throw ValidationError("input file " + opt.input + " does not exist");
    if (fs::exists(opt.out_dir) && !fs::is_directory(opt.out_dir))
        throw ValidationError("output path " + opt.out_dir + " is not a directory");

    // 2. compute
    Outputs out;
    out.add("command", opt.command);
    if (opt.command == "simulate-ronchigram") {
        ronchigram_simulation(config, out);
    } else if (opt.command == "simulate-image") {
        image_simulation(config, out);
    } else if (opt.command == "ctf-map") {
        ctf_map_command(config, out);
    } else if (opt.command == "scan-analyze") {
        scan_command(config, opt.input.empty() ? std::nullopt : std::optional<fs::path>(opt.input),
                     out);
    } else {
        const auto input = io::read_raster(opt.input);
        if (opt.command == "rms-profile")
            rms_profile_command(config, input, out);
        else if (opt.command == "fit-ronchigram")
            fit_ronchigram_command(config, input, out);
        else
            fit_ctf_command(config, input, out);
    }

    // 3. outputs
    const fs::path dir(opt.out_dir);
    fs::create_directories(dir);
    auto files = write_outputs(out, config, opt, dir);
    write_manifest(config, opt, dir, std::move(files));
    for (const auto& [k, v] : out.report)
        std::cout << k << ": " << v << "\n";
    return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args)
{
    CLI::App app{"Laser phase plate simulation and analysis", "lppkit"};
    app.require_subcommand(1);
    app.fallthrough();
    Options opt;
    app.add_option("--config", opt.config_path, "flat JSON run configuration");
    app.add_option("--out", opt.out_dir, "output directory");
    app.add_option("--format", opt.format, "raster output format")
        ->check(CLI::IsMember({"raster", "csv", "png"}));
    std::uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides the config)");
    app.add_option("--input", opt.input, "input raster (native or MRC) or scan CSV");

    const std::pair<const char*, const char*> commands[] = {
        {"simulate-ronchigram", "synthesize a Ronchigram of the standing wave"},
        {"simulate-image", "weak-phase image of a random object through the CTF"},
        {"ctf-map", "CTF map and its angular RMS profile"},
        {"rms-profile", "angular RMS profile of an image spectrum or frequency map"},
        {"fit-ronchigram", "fit laser phase, NA and coincidence loss to a Ronchigram"},
        {"fit-ctf", "Thon-ring fit of defocus and unscattered-beam phase"},
        {"scan-analyze", "peak-to-peak and period of a phase scan (synthetic without --input)"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->callback([&opt, name = std::string(name)] { opt.command = name; });
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }
    if (seed_opt->count() > 0)
        opt.seed = seed;

    try {
        return execute(opt);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int run_command(int argc, const char* const* argv)
{
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i)
        args.emplace_back(argv[i]);
    return run_command(args);
}

}  // namespace lpp::cli
