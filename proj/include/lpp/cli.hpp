#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lpp/ctf.hpp"
#include "lpp/estimation.hpp"
#include "lpp/io.hpp"
#include "lpp/physics.hpp"
#include "lpp/propagation.hpp"

namespace lpp::cli {

/// Flat run configuration. Every key carries its unit in the name; the JSON
/// document uses exactly these names.
struct RunConfig {
    double voltage_kv = 80.0;
    double lambda_l_nm = 1064.0;
    double na = 0.026;
    double eta0_deg = 18.0;
    double laser_tilt_deg = 0.0;
    double f_mm = 20.0;
    // Ronchigram imaging
    double magnification = 80.0;
    double detector_pixel_um = 5.0;
    std::size_t detector_n = 512;
    double delta_mm = 0.0;  ///< 0 = -(pi/4) k / k_L^2
    double theta_cl = 0.0;
    std::size_t outer_iterations = 5;
    std::size_t fringe_crests = 62;
    std::size_t fringe_troughs = 61;
    // objective lens
    double defocus_nm = 0.0;
    double cs_mm = 0.0;
    double envelope_nm = 0.51;  ///< envelope half-max radius is 1/envelope_nm; 0 = none
    double astigmatism_nm = 0.0;
    double astigmatism_angle_deg = 0.0;
    // plate alignment
    double axial_offset_um = 0.0;
    double lateral_offset_um = 0.0;
    double rotation_deg = 0.0;
    // image simulation
    std::size_t grid_n = 2048;
    double pixel_size_nm = 0.31;
    double object_sigma_rad = 0.03;
    double counts = 100.0;  ///< mean counts per pixel; 0 = noise-free
    bool symmetric = false;
    std::uint64_t seed = 1;
    // Thon-ring analysis
    double wedge_deg = 15.0;
    double defocus_sign = -1.0;
    double zero_min_per_nm = 0.4;
    double zero_max_per_nm = 0.0;  ///< 0 = profile end
    bool correct_astigmatism = true;
    bool fix_cs = true;  ///< hold the quartic term at cs_mm
    std::size_t scan_positions = 16;
    std::string png_scaling = "percentile";  ///< or "minmax"
};

/// Parses a flat JSON object over the defaults. Unknown keys, wrong types
/// and malformed JSON raise ValidationError.
RunConfig parse_config(std::string_view json_text, RunConfig defaults = {});
std::string config_to_json(const RunConfig& config);

/// Checks every value against the owning module before any computation.
void validate(const RunConfig& config);

ElectronBeam beam_of(const RunConfig& config);
LaserMode mode_of(const RunConfig& config);
OpticsConfig optics_of(const RunConfig& config);
PlateAlignment alignment_of(const RunConfig& config);
RonchigramSetup ronchigram_setup_of(const RunConfig& config);
DetectorGrid detector_of(const RunConfig& config);
FrequencyGrid frequency_grid_of(const RunConfig& config);
RonchigramHints ronchigram_hints_of(const RunConfig& config);
CtfFitOptions ctf_fit_options_of(const RunConfig& config);

/// Weak-phase image (counts) of a Gaussian random phase object.
RasterImage simulate_image(const RunConfig& config);

/// Entry point of the lppkit tool. Exit codes: 0 success, 1 runtime or fit
/// failure, 2 usage or validation error (nothing written).
int run_command(const std::vector<std::string>& args);
int run_command(int argc, const char* const* argv);

}  // namespace lpp::cli
