#include <cmath>
#include <functional>
#include <map>
#include <json.hpp>

#include "lpp/cli.hpp"
#include "lpp/constants.hpp"
#include "lpp/detector.hpp"
#include "lpp/errors.hpp"

namespace lpp::cli {

using nlohmann::json;
using namespace lpp::units;

namespace {

struct Field {
    std::function<void(RunConfig&, const json&)> read;
    std::function<json(const RunConfig&)> write;
};

template <typename T>
Field field(T RunConfig::*member)
{
    Field f;
    f.write = [member](const RunConfig& c) { return json(c.*member); };
    f.read = [member](RunConfig& c, const json& v) {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean())
                throw ValidationError("expected true or false");
            c.*member = v.get<bool>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string())
                throw ValidationError("expected a string");
            c.*member = v.get<std::string>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_unsigned())
                throw ValidationError("expected a non-negative integer");
            c.*member = v.get<T>();
        } else {
            if (!v.is_number())
                throw ValidationError("expected a number");
            c.*member = v.get<double>();
        }
    };
    return f;
}

const std::map<std::string, Field>& fields()
{
    static const std::map<std::string, Field> table = {
        {"voltage_kv", field(&RunConfig::voltage_kv)},
        {"lambda_l_nm", field(&RunConfig::lambda_l_nm)},
        {"na", field(&RunConfig::na)},
        {"eta0_deg", field(&RunConfig::eta0_deg)},
        {"laser_tilt_deg", field(&RunConfig::laser_tilt_deg)},
        {"f_mm", field(&RunConfig::f_mm)},
        {"magnification", field(&RunConfig::magnification)},
        {"detector_pixel_um", field(&RunConfig::detector_pixel_um)},
        {"detector_n", field(&RunConfig::detector_n)},
        {"delta_mm", field(&RunConfig::delta_mm)},
        {"theta_cl", field(&RunConfig::theta_cl)},
        {"outer_iterations", field(&RunConfig::outer_iterations)},
        {"fringe_crests", field(&RunConfig::fringe_crests)},
        {"fringe_troughs", field(&RunConfig::fringe_troughs)},
        {"defocus_nm", field(&RunConfig::defocus_nm)},
        {"cs_mm", field(&RunConfig::cs_mm)},
        {"envelope_nm", field(&RunConfig::envelope_nm)},
        {"astigmatism_nm", field(&RunConfig::astigmatism_nm)},
        {"astigmatism_angle_deg", field(&RunConfig::astigmatism_angle_deg)},
        {"axial_offset_um", field(&RunConfig::axial_offset_um)},
        {"lateral_offset_um", field(&RunConfig::lateral_offset_um)},
        {"rotation_deg", field(&RunConfig::rotation_deg)},
        {"grid_n", field(&RunConfig::grid_n)},
        {"pixel_size_nm", field(&RunConfig::pixel_size_nm)},
        {"object_sigma_rad", field(&RunConfig::object_sigma_rad)},
        {"counts", field(&RunConfig::counts)},
        {"symmetric", field(&RunConfig::symmetric)},
        {"seed", field(&RunConfig::seed)},
        {"wedge_deg", field(&RunConfig::wedge_deg)},
        {"defocus_sign", field(&RunConfig::defocus_sign)},
        {"zero_min_per_nm", field(&RunConfig::zero_min_per_nm)},
        {"zero_max_per_nm", field(&RunConfig::zero_max_per_nm)},
        {"correct_astigmatism", field(&RunConfig::correct_astigmatism)},
        {"fix_cs", field(&RunConfig::fix_cs)},
        {"scan_positions", field(&RunConfig::scan_positions)},
        {"png_scaling", field(&RunConfig::png_scaling)},
    };
    return table;
}

void require_finite(double v, const char* key)
{
    detail::require(std::isfinite(v), std::string(key) + " must be finite");
}

}  // namespace

RunConfig parse_config(std::string_view json_text, RunConfig defaults)
{
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object())
        throw ValidationError("config must be a flat JSON object");
    const auto& table = fields();
    for (const auto& [key, value] : doc.items()) {
        const auto it = table.find(key);
        if (it == table.end())
            throw ValidationError("unknown config key '" + key + "'");
        try {
            it->second.read(defaults, value);
        } catch (const ValidationError& e) {
            throw ValidationError("config key '" + key + "': " + e.what());
        } catch (const json::exception& e) {
            throw ValidationError("config key '" + key + "': " + e.what());
        }
    }
    return defaults;
}

std::string config_to_json(const RunConfig& config)
{
    json doc = json::object();
    for (const auto& [key, f] : fields())
        doc[key] = f.write(config);
    return doc.dump(2);
}

ElectronBeam beam_of(const RunConfig& c) { return electron_beam_from_voltage(c.voltage_kv * kV); }

LaserMode mode_of(const RunConfig& c)
{
    return laser_mode_geometry(c.lambda_l_nm * nm, c.na, c.laser_tilt_deg * deg, c.eta0_deg * deg);
}

OpticsConfig optics_of(const RunConfig& c)
{
    OpticsConfig o;
    o.focal_length = c.f_mm * mm;
    o.defocus = c.defocus_nm * nm;
    o.spherical_aberration = c.cs_mm * mm;
    o.envelope_halfmax_radius =
        c.envelope_nm > 0.0 ? 1.0 / (c.envelope_nm * nm) : std::numeric_limits<double>::infinity();
    o.defocus_astigmatism = c.astigmatism_nm * nm;
    o.astigmatism_angle = c.astigmatism_angle_deg * deg;
    return o;
}

PlateAlignment alignment_of(const RunConfig& c)
{
    PlateAlignment a;
    a.axial_offset = c.axial_offset_um * um;
    a.lateral_offset = c.lateral_offset_um * um;
    a.rotation = c.rotation_deg * deg;
    return a;
}

namespace {

double plate_offset(const RunConfig& c, const ElectronBeam& beam)
{
    if (c.delta_mm != 0.0)
        return c.delta_mm * mm;
    const double kl = 2.0 * constants::pi / (c.lambda_l_nm * nm);
    return -(constants::pi / 4.0) * beam.wavenumber / (kl * kl);
}

}  // namespace

RonchigramSetup ronchigram_setup_of(const RunConfig& c)
{
    RonchigramSetup s;
    s.beam = beam_of(c);
    s.mode = mode_of(c);
    s.delta = plate_offset(c, s.beam);
    s.focal_length = c.f_mm * mm;
    s.magnification = c.magnification;
    s.axis_angle = c.rotation_deg * deg;
    return s;
}

DetectorGrid detector_of(const RunConfig& c)
{
    DetectorGrid g;
    g.width = g.height = c.detector_n;
    g.pixel_size = c.detector_pixel_um * um;
    return g;
}

FrequencyGrid frequency_grid_of(const RunConfig& c)
{
    return FrequencyGrid::for_image(c.grid_n, c.grid_n, c.pixel_size_nm * nm);
}

RonchigramHints ronchigram_hints_of(const RunConfig& c)
{
    const auto setup = ronchigram_setup_of(c);
    RonchigramHints h;
    h.beam = setup.beam;
    h.laser_wavelength = c.lambda_l_nm * nm;
    h.focal_length = setup.focal_length;
    h.magnification = setup.magnification;
    h.delta = setup.delta;
    h.theta_cl = c.theta_cl;
    h.outer_iterations = c.outer_iterations;
    const double q = 1.0 / detector_fringe_period(setup);
    h.wavevector = Wavevector{q * std::cos(setup.axis_angle), q * std::sin(setup.axis_angle)};
    return h;
}

CtfFitOptions ctf_fit_options_of(const RunConfig& c)
{
    CtfFitOptions o;
    o.beam = beam_of(c);
    o.defocus_sign = c.defocus_sign;
    o.wedge = {c.wedge_deg * deg, c.rotation_deg * deg};
    o.correct_astigmatism = c.correct_astigmatism;
    o.zeros.min_frequency = c.zero_min_per_nm * per_nm;
    o.zeros.max_frequency = c.zero_max_per_nm * per_nm;
    if (c.fix_cs)
        o.known_spherical_aberration = c.cs_mm * mm;
    return o;
}

void validate(const RunConfig& c)
{
    for (const auto& [key, f] : fields()) {
        const json v = f.write(c);
        if (v.is_number_float())
            require_finite(v.get<double>(), key.c_str());
    }
    detail::require(c.voltage_kv > 0.0, "voltage_kv must be positive");
    detail::require(c.lambda_l_nm > 0.0, "lambda_l_nm must be positive");
    detail::require(c.na > 0.0 && c.na <= 0.1, "na must lie in (0, 0.1]");
    detail::require(c.eta0_deg >= 0.0, "eta0_deg must be non-negative");
    detail::require(c.f_mm > 0.0, "f_mm must be positive");
    detail::require(c.magnification > 0.0, "magnification must be positive");
    detail::require(c.detector_pixel_um > 0.0, "detector_pixel_um must be positive");
    detail::require(c.detector_n >= 16 && c.detector_n % 2 == 0,
                    "detector_n must be even and at least 16");
    detail::require(c.theta_cl >= 0.0, "theta_cl must be non-negative");
    detail::require(c.outer_iterations >= 1, "outer_iterations must be at least 1");
    detail::require(c.fringe_crests >= 1 && c.fringe_troughs >= 1,
                    "fringe_crests and fringe_troughs must be at least 1");
    detail::require(c.envelope_nm >= 0.0, "envelope_nm must be non-negative");
    detail::require(c.rotation_deg >= 0.0 && c.rotation_deg < 180.0,
                    "rotation_deg must lie in [0, 180)");
    detail::require(c.grid_n >= 16 && c.grid_n % 2 == 0, "grid_n must be even and at least 16");
    detail::require(c.pixel_size_nm > 0.0, "pixel_size_nm must be positive");
    detail::require(c.object_sigma_rad >= 0.0, "object_sigma_rad must be non-negative");
    detail::require(c.counts >= 0.0, "counts must be non-negative");
    detail::require(c.wedge_deg >= 0.0 && c.wedge_deg < 90.0, "wedge_deg must lie in [0, 90)");
    detail::require(c.defocus_sign == 1.0 || c.defocus_sign == -1.0,
                    "defocus_sign must be +1 or -1");
    detail::require(c.zero_min_per_nm >= 0.0 && c.zero_max_per_nm >= 0.0,
                    "zero search limits must be non-negative");
    detail::require(c.zero_max_per_nm == 0.0 || c.zero_max_per_nm > c.zero_min_per_nm,
                    "zero_max_per_nm must exceed zero_min_per_nm");
    detail::require(c.scan_positions >= 4, "scan_positions must be at least 4");
    detail::require(c.png_scaling == "percentile" || c.png_scaling == "minmax",
                    "png_scaling must be \"percentile\" or \"minmax\"");

    // module-level checks
    const auto beam = beam_of(c);
    const auto mode = mode_of(c);
    const auto optics = optics_of(c);
    lpp::validate(optics);
    lpp::validate(alignment_of(c));
    const auto setup = ronchigram_setup_of(c);
    detail::require(setup.delta != 0.0, "delta_mm must be nonzero");
    if (mode.peak_phase() > 0.0) {
        const auto grid = frequency_grid_of(c);
        const double limit = max_ctf_step(mode, optics.focal_length, beam);
        if (grid.step > limit)
            throw ValidationError(
                "frequency step 1/(grid_n * pixel_size_nm) = " + std::to_string(grid.step * 1e-9) +
                " nm^-1 does not resolve the standing wave (limit " +
                std::to_string(limit * 1e-9) + " nm^-1); increase grid_n or pixel_size_nm");
    }
}

RasterImage simulate_image(const RunConfig& c)
{
    const auto grid = frequency_grid_of(c);
    const auto ctf =
        ctf_map(grid, optics_of(c), mode_of(c), alignment_of(c), beam_of(c), c.symmetric);
    auto object = sample_standard_normal(c.grid_n, c.grid_n, c.pixel_size_nm * nm, c.seed);
    for (double& v : object.values())
        v *= c.object_sigma_rad;
    object.set_kind(ValueKind::phase);
    auto image = simulate_weak_phase_image(object, ctf);
    if (c.counts <= 0.0)
        return image;
    for (double& v : image.values())
        v = std::max(v, 0.0) * c.counts;
    // the Poisson stream is keyed apart from the object stream
    return sample_poisson_counts(image, c.seed ^ 0x9e3779b97f4a7c15ULL);
}

}  // namespace lpp::cli
