#include "detail/optimize.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_min.h>
#include <gsl/gsl_multifit_nlinear.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <memory>

#include "lpp/errors.hpp"

namespace lpp::detail {

namespace {

struct GslErrorsOff {
    GslErrorsOff() { gsl_set_error_handler_off(); }
};
const GslErrorsOff gsl_errors_off;

double scalar_trampoline(double x, void* params)
{
    return (*static_cast<const std::function<double(double)>*>(params))(x);
}

struct VectorParams {
    const std::function<double(const std::vector<double>&)>* f;
    std::vector<double> scratch;
    std::size_t evaluations = 0;
};

double vector_trampoline(const gsl_vector* v, void* params)
{
    auto* p = static_cast<VectorParams*>(params);
    for (std::size_t i = 0; i < p->scratch.size(); ++i)
        p->scratch[i] = gsl_vector_get(v, i);
    ++p->evaluations;
    const double value = (*p->f)(p->scratch);
    return std::isfinite(value) ? value : 1e300;
}

using ResidualFn = std::function<void(const std::vector<double>&, std::vector<double>&)>;

struct ResidualParams {
    const ResidualFn* f;
    const std::vector<double>* start;
    const std::vector<double>* scales;
    std::vector<double> x;
    std::vector<double> r;
};

int residual_trampoline(const gsl_vector* z, void* params, gsl_vector* out)
{
    auto* p = static_cast<ResidualParams*>(params);
    for (std::size_t i = 0; i < p->x.size(); ++i)
        p->x[i] = (*p->start)[i] + (*p->scales)[i] * gsl_vector_get(z, i);
    (*p->f)(p->x, p->r);
    for (std::size_t i = 0; i < p->r.size(); ++i) {
        if (!std::isfinite(p->r[i]))
            return GSL_EDOM;
        gsl_vector_set(out, i, p->r[i]);
    }
    return GSL_SUCCESS;
}

}  // namespace

ScalarMinimum bounded_minimize(const std::function<double(double)>& f, double lo, double hi,
                               std::size_t coarse, double tolerance)
{
    require(hi > lo, "bounded_minimize needs hi > lo");
    coarse = std::max<std::size_t>(coarse, 3);
    std::vector<double> xs(coarse);
    std::vector<double> fs(coarse);
    std::size_t best = 0;
    for (std::size_t i = 0; i < coarse; ++i) {
        xs[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(coarse - 1);
        fs[i] = f(xs[i]);
        if (fs[i] < fs[best])
            best = i;
    }
    if (best == 0 || best + 1 == coarse)
        return {xs[best], fs[best]};

    std::unique_ptr<gsl_min_fminimizer, decltype(&gsl_min_fminimizer_free)> solver(
        gsl_min_fminimizer_alloc(gsl_min_fminimizer_goldensection), gsl_min_fminimizer_free);
    gsl_function fn{&scalar_trampoline, const_cast<std::function<double(double)>*>(&f)};
    if (gsl_min_fminimizer_set_with_values(solver.get(), &fn, xs[best], fs[best], xs[best - 1],
                                           fs[best - 1], xs[best + 1], fs[best + 1]) != GSL_SUCCESS)
        return {xs[best], fs[best]};
    for (int iter = 0; iter < 200; ++iter) {
        if (gsl_min_fminimizer_iterate(solver.get()) != GSL_SUCCESS)
            break;
        const double a = gsl_min_fminimizer_x_lower(solver.get());
        const double b = gsl_min_fminimizer_x_upper(solver.get());
        if (b - a < tolerance)
            break;
    }
    ScalarMinimum out{gsl_min_fminimizer_x_minimum(solver.get()),
                      gsl_min_fminimizer_f_minimum(solver.get())};
    if (fs[best] < out.value)
        out = {xs[best], fs[best]};
    return out;
}

SimplexMinimum simplex_minimize(const std::function<double(const std::vector<double>&)>& f,
                                std::vector<double> start, std::vector<double> steps,
                                double rel_tolerance, std::size_t max_evaluations)
{
    const std::size_t n = start.size();
    require(n > 0 && steps.size() == n, "simplex_minimize needs matching start and steps");
    for (double s : steps)
        require(s != 0.0 && std::isfinite(s), "simplex steps must be finite and nonzero");

    // The solver works in step units, z = (x - start) / steps.
    std::vector<double> xs(n);
    std::function<double(const std::vector<double>&)> scaled = [&](const std::vector<double>& z) {
        for (std::size_t i = 0; i < n; ++i)
            xs[i] = start[i] + steps[i] * z[i];
        return f(xs);
    };
    VectorParams params{&scaled, std::vector<double>(n), 0};
    gsl_multimin_function fn{&vector_trampoline, n, &params};

    std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> z0(gsl_vector_alloc(n), gsl_vector_free);
    std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> ss(gsl_vector_alloc(n), gsl_vector_free);
    gsl_vector_set_zero(z0.get());
    gsl_vector_set_all(ss.get(), 1.0);
    std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> solver(
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n),
        gsl_multimin_fminimizer_free);
    gsl_multimin_fminimizer_set(solver.get(), &fn, z0.get(), ss.get());

    // Converged once the best value has improved by less than rel_tolerance
    // over a window of iterations, or the simplex has collapsed.
    SimplexMinimum out;
    const std::size_t window = 4 * n + 4;
    std::vector<double> history;
    while (params.evaluations < max_evaluations) {
        if (gsl_multimin_fminimizer_iterate(solver.get()) != GSL_SUCCESS)
            break;
        const double best = gsl_multimin_fminimizer_minimum(solver.get());
        history.push_back(best);
        if (gsl_multimin_fminimizer_size(solver.get()) < 1e-8) {
            out.converged = true;
            break;
        }
        if (history.size() > window) {
            const double old = history[history.size() - 1 - window];
            if (old - best <= rel_tolerance * std::max(std::abs(best), 1e-300)) {
                out.converged = true;
                break;
            }
        }
    }
    const gsl_vector* zm = gsl_multimin_fminimizer_x(solver.get());
    out.x.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        out.x[i] = start[i] + steps[i] * gsl_vector_get(zm, i);
    out.value = gsl_multimin_fminimizer_minimum(solver.get());
    out.evaluations = params.evaluations;
    return out;
}

LeastSquaresFit least_squares(const ResidualFn& residuals, std::size_t m, std::vector<double> start,
                              std::vector<double> scales, std::size_t max_iterations)
{
    const std::size_t n = start.size();
    require(n > 0 && scales.size() == n && m >= n, "least_squares needs m >= n parameters with scales");
    ResidualParams params{&residuals, &start, &scales, std::vector<double>(n), std::vector<double>(m)};
    gsl_multifit_nlinear_fdf fdf{};
    fdf.f = &residual_trampoline;
    fdf.df = nullptr;
    fdf.fvv = nullptr;
    fdf.n = m;
    fdf.p = n;
    fdf.params = &params;
    gsl_multifit_nlinear_parameters settings = gsl_multifit_nlinear_default_parameters();
    std::unique_ptr<gsl_multifit_nlinear_workspace, decltype(&gsl_multifit_nlinear_free)> work(
        gsl_multifit_nlinear_alloc(gsl_multifit_nlinear_trust, &settings, m, n), gsl_multifit_nlinear_free);
    std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> z0(gsl_vector_alloc(n), gsl_vector_free);
    gsl_vector_set_zero(z0.get());

    LeastSquaresFit out;
    out.x = start;
    if (gsl_multifit_nlinear_init(z0.get(), &fdf, work.get()) != GSL_SUCCESS)
        return out;
    int info = 0;
    const int status = gsl_multifit_nlinear_driver(max_iterations, 1e-12, 1e-12, 1e-14, nullptr, nullptr,
                                                   &info, work.get());
    const gsl_vector* z = gsl_multifit_nlinear_position(work.get());
    for (std::size_t i = 0; i < n; ++i)
        out.x[i] = start[i] + scales[i] * gsl_vector_get(z, i);
    const gsl_vector* r = gsl_multifit_nlinear_residual(work.get());
    double cost = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        cost += gsl_vector_get(r, i) * gsl_vector_get(r, i);
    out.cost = cost;
    out.converged = status == GSL_SUCCESS;
    return out;
}

}  // namespace lpp::detail
