#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>

#include "lpp/cli.hpp"
#include "lpp/ctf.hpp"
#include "lpp/detector.hpp"
#include "lpp/errors.hpp"
#include "lpp/estimation.hpp"
#include "lpp/io.hpp"
#include "lpp/physics.hpp"
#include "lpp/propagation.hpp"

namespace py = pybind11;
using namespace lpp;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const RasterImage& img)
{
    Array out({img.height(), img.width()});
    std::copy(img.values().begin(), img.values().end(), out.mutable_data());
    return out;
}

RasterImage from_numpy(const Array& a, double pixel_size, PlaneTag plane, ValueKind kind)
{
    if (a.ndim() != 2)
        throw ValidationError("raster arrays must be 2-D, got " + std::to_string(a.ndim()) + "-D");
    RasterImage img(static_cast<std::size_t>(a.shape(1)), static_cast<std::size_t>(a.shape(0)),
                    pixel_size, plane, kind);
    std::copy(a.data(), a.data() + a.size(), img.values().begin());
    return img;
}

py::array_t<std::complex<double>> ctf_to_numpy(const CtfMap& map)
{
    py::array_t<std::complex<double>> out({map.ny(), map.nx()});
    std::copy(map.values().begin(), map.values().end(), out.mutable_data());
    return out;
}

template <class T>
std::vector<T> as_vector(const py::array_t<T, py::array::c_style | py::array::forcecast>& a)
{
    return {a.data(), a.data() + a.size()};
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Laser phase plate modelling: physics, propagation, CTF and estimation.";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<SaturationError>(m, "SaturationError", base.ptr());
    py::register_exception<EstimationError>(m, "EstimationError", base.ptr());
    py::register_exception<FitError>(m, "FitError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());

    py::enum_<PlaneTag>(m, "PlaneTag")
        .value("generic", PlaneTag::generic)
        .value("image", PlaneTag::image)
        .value("diffraction", PlaneTag::diffraction)
        .value("frequency", PlaneTag::frequency);
    py::enum_<ValueKind>(m, "ValueKind")
        .value("intensity", ValueKind::intensity)
        .value("phase", ValueKind::phase)
        .value("ctf", ValueKind::ctf);

    py::class_<RasterImage>(m, "Raster")
        .def(py::init(&from_numpy), py::arg("values"), py::arg("pixel_size"),
             py::arg("plane") = PlaneTag::image, py::arg("kind") = ValueKind::intensity)
        .def_property_readonly("values", &to_numpy, "copy as a (height, width) array")
        .def_property_readonly("width", &RasterImage::width)
        .def_property_readonly("height", &RasterImage::height)
        .def_property_readonly("pixel_size", &RasterImage::pixel_size)
        .def_property_readonly("plane", &RasterImage::plane)
        .def_property_readonly("kind", &RasterImage::kind);

    // physics
    py::class_<ElectronBeam>(m, "ElectronBeam")
        .def_readonly("voltage", &ElectronBeam::voltage)
        .def_readonly("wavelength", &ElectronBeam::wavelength)
        .def_readonly("wavenumber", &ElectronBeam::wavenumber)
        .def_readonly("speed", &ElectronBeam::speed);
    m.def("electron_beam", &electron_beam_from_voltage, py::arg("voltage"));

    py::class_<LaserMode>(m, "LaserMode")
        .def_property_readonly("wavelength", &LaserMode::wavelength)
        .def_property_readonly("numerical_aperture", &LaserMode::numerical_aperture)
        .def_property_readonly("tilt", &LaserMode::tilt)
        .def_property_readonly("peak_phase", &LaserMode::peak_phase)
        .def_property_readonly("waist", &LaserMode::waist)
        .def_property_readonly("rayleigh_range", &LaserMode::rayleigh_range)
        .def("with_peak_phase", &LaserMode::with_peak_phase);
    m.def("laser_mode", &laser_mode_geometry, py::arg("wavelength"), py::arg("numerical_aperture"),
          py::arg("tilt") = 0.0, py::arg("peak_phase") = 0.0);
    m.def("peak_phase_from_intensity", &peak_phase_from_intensity, py::arg("intensity"),
          py::arg("mode"), py::arg("beam"));
    m.def(
        "phase_profile",
        [](py::array_t<double> x, py::array_t<double> y, const LaserMode& mode) {
            return py::vectorize([&mode](double a, double b) { return phase_profile(a, b, mode); })(x, y);
        },
        py::arg("x"), py::arg("y"), py::arg("mode"));

    // Ronchigram
    py::class_<RonchigramSetup>(m, "RonchigramSetup")
        .def(py::init<>())
        .def_readwrite("beam", &RonchigramSetup::beam)
        .def_readwrite("mode", &RonchigramSetup::mode)
        .def_readwrite("delta", &RonchigramSetup::delta)
        .def_readwrite("focal_length", &RonchigramSetup::focal_length)
        .def_readwrite("magnification", &RonchigramSetup::magnification)
        .def_readwrite("center_x", &RonchigramSetup::center_x)
        .def_readwrite("center_y", &RonchigramSetup::center_y)
        .def_readwrite("axis_angle", &RonchigramSetup::axis_angle);
    py::class_<DetectorGrid>(m, "DetectorGrid")
        .def(py::init<std::size_t, std::size_t, double>(), py::arg("width") = 2048,
             py::arg("height") = 2048, py::arg("pixel_size") = 5e-6)
        .def_readwrite("width", &DetectorGrid::width)
        .def_readwrite("height", &DetectorGrid::height)
        .def_readwrite("pixel_size", &DetectorGrid::pixel_size);
    m.def("synthesize_ronchigram", &synthesize_ronchigram, py::arg("setup"), py::arg("grid"));
    m.def("detector_fringe_period", &detector_fringe_period, py::arg("setup"));
    m.def("analytic_fringe_contrast", &analytic_fringe_contrast, py::arg("peak_phase"),
          py::arg("delta"), py::arg("wavenumber"), py::arg("laser_wavenumber"));
    m.def("contrast_maximizing_offsets", &contrast_maximizing_offsets, py::arg("beam"),
          py::arg("laser_wavelength"), py::arg("count"));

    // CTF
    py::class_<OpticsConfig>(m, "OpticsConfig")
        .def(py::init<>())
        .def_readwrite("focal_length", &OpticsConfig::focal_length)
        .def_readwrite("defocus", &OpticsConfig::defocus)
        .def_readwrite("spherical_aberration", &OpticsConfig::spherical_aberration)
        .def_readwrite("envelope_halfmax_radius", &OpticsConfig::envelope_halfmax_radius)
        .def_readwrite("defocus_astigmatism", &OpticsConfig::defocus_astigmatism)
        .def_readwrite("astigmatism_angle", &OpticsConfig::astigmatism_angle);
    py::class_<PlateAlignment>(m, "PlateAlignment")
        .def(py::init<>())
        .def_readwrite("axial_offset", &PlateAlignment::axial_offset)
        .def_readwrite("lateral_offset", &PlateAlignment::lateral_offset)
        .def_readwrite("rotation", &PlateAlignment::rotation);
    py::class_<FrequencyGrid>(m, "FrequencyGrid")
        .def(py::init<std::size_t, std::size_t, double>(), py::arg("nx"), py::arg("ny"), py::arg("step"))
        .def_static("for_image", &FrequencyGrid::for_image)
        .def_readwrite("nx", &FrequencyGrid::nx)
        .def_readwrite("ny", &FrequencyGrid::ny)
        .def_readwrite("step", &FrequencyGrid::step);
    m.def(
        "ctf_map",
        [](const FrequencyGrid& g, const OpticsConfig& o, const LaserMode& mode, const PlateAlignment& a,
           const ElectronBeam& beam, bool symmetric) {
            return ctf_to_numpy(ctf_map(g, o, mode, a, beam, symmetric));
        },
        py::arg("grid"), py::arg("optics"), py::arg("mode"), py::arg("alignment"), py::arg("beam"),
        py::arg("symmetric") = false, "complex CTF as a (ny, nx) array with DC at (ny/2, nx/2)");
    m.def("max_ctf_step", &max_ctf_step, py::arg("mode"), py::arg("focal_length"), py::arg("beam"));
    m.def("amplitude_spectrum", &amplitude_spectrum, py::arg("image"));

    // detector
    m.def("apply_coincidence_loss", py::vectorize([](double v, double theta) {
              return apply_coincidence_loss(v, {theta});
          }),
          py::arg("actual"), py::arg("theta"));
    m.def("invert_coincidence_loss", py::vectorize([](double v, double theta) {
              return invert_coincidence_loss(v, {theta});
          }),
          py::arg("detected"), py::arg("theta"));
    m.def(
        "sample_poisson_counts",
        [](const RasterImage& expected, std::uint64_t seed) { return sample_poisson_counts(expected, seed); },
        py::arg("expected"), py::arg("seed"));

    // estimation
    py::class_<PhaseScanResult>(m, "PhaseScanResult")
        .def_readonly("peak_to_peak", &PhaseScanResult::peak_to_peak)
        .def_readonly("period", &PhaseScanResult::period);
    m.def(
        "analyze_phase_scan",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& phi) {
            return analyze_phase_scan(as_vector(x), as_vector(phi));
        },
        py::arg("positions"), py::arg("phases"));

    py::class_<CtfFit>(m, "CtfFit")
        .def_readonly("a", &CtfFit::a)
        .def_readonly("b", &CtfFit::b)
        .def_readonly("c", &CtfFit::c)
        .def_readonly("defocus", &CtfFit::defocus)
        .def_readonly("spherical_aberration", &CtfFit::spherical_aberration)
        .def_readonly("zero_locations", &CtfFit::zero_locations)
        .def_property_readonly("astigmatism_ratio", [](const CtfFit& f) { return f.ellipse.ratio; })
        .def_property_readonly("astigmatism_angle", [](const CtfFit& f) { return f.ellipse.angle; });
    m.def(
        "fit_ctf",
        [](const RasterImage& spectrum, const ElectronBeam& beam, double defocus_sign,
           double min_frequency, std::optional<double> spherical_aberration, bool correct_astigmatism) {
            CtfFitOptions o;
            o.beam = beam;
            o.defocus_sign = defocus_sign;
            o.zeros.min_frequency = min_frequency;
            o.known_spherical_aberration = spherical_aberration;
            o.correct_astigmatism = correct_astigmatism;
            return fit_ctf(spectrum, o);
        },
        py::arg("spectrum"), py::arg("beam"), py::arg("defocus_sign") = -1.0, py::arg("min_frequency") = 0.0,
        py::arg("spherical_aberration") = py::none(), py::arg("correct_astigmatism") = true);

    // files and CLI
    m.def("read_raster", &io::read_raster, py::arg("path"), "native or MRC, by content");
    m.def("write_raster", &io::write_raster, py::arg("image"), py::arg("path"));
    m.def("write_mrc", &io::write_mrc, py::arg("image"), py::arg("path"));
    m.def(
        "run_cli", [](const std::vector<std::string>& args) { return cli::run_command(args); },
        py::arg("args"), "runs the command-line tool in-process and returns its exit status");
}
