#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <string>
#include <utility>
#include <vector>

#include "uitlab/averaging.hpp"
#include "uitlab/counterexample.hpp"
#include "uitlab/discretization.hpp"
#include "uitlab/errors.hpp"
#include "uitlab/harness.hpp"
#include "uitlab/meanfield.hpp"
#include "uitlab/metrics.hpp"

namespace py = pybind11;
using namespace uitlab;

namespace {

py::dict run_config(const std::string& text, const std::string& out_dir, std::size_t threads) {
    ExperimentConfig cfg = parse_config_text(text);
    cfg.threads = threads;
    ReportBundle bundle;
    {
        py::gil_scoped_release release;
        bundle = run_experiment(cfg);
        if (!out_dir.empty()) emit_reports(bundle, out_dir);
    }
    py::dict result;
    result["ok"] = bundle.ok();
    result["summary"] = py::module_::import("json").attr("loads")(summary_json(bundle).dump());
    result["curves"] = bundle.curves;
    return result;
}

}  // namespace

PYBIND11_MODULE(_uitlab, m) {
    m.doc() = "Coupled-simulation error experiments";

    auto base = py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<FitFailure>(m, "FitFailure", PyExc_RuntimeError);
    py::register_exception<BudgetExceeded>(m, "BudgetExceeded", PyExc_RuntimeError);
    py::register_exception<NumericalBlowup>(m, "NumericalBlowup", PyExc_FloatingPointError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const InvalidArgument& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        }
    });
    (void)base;

    py::class_<ErrorCurve>(m, "ErrorCurve")
        .def_readonly("times", &ErrorCurve::times)
        .def_readonly("values", &ErrorCurve::values)
        .def_readonly("std_errors", &ErrorCurve::std_errors)
        .def_readonly("flags", &ErrorCurve::flags)
        .def_property_readonly("label", [](const ErrorCurve& c) { return c.meta.label; })
        .def_property_readonly("sweep_value", [](const ErrorCurve& c) { return c.meta.sweep_value; })
        .def("__len__", &ErrorCurve::size)
        .def("__repr__", [](const ErrorCurve& c) {
            return "<ErrorCurve " + c.meta.label + " n=" + std::to_string(c.size()) + ">";
        });

    py::class_<RateFit>(m, "RateFit")
        .def_readonly("exponent", &RateFit::exponent)
        .def_readonly("intercept", &RateFit::intercept)
        .def_readonly("r_squared", &RateFit::r_squared)
        .def_readonly("n_points", &RateFit::n_points);

    // metrics
    m.def("w2_empirical_1d", [](std::vector<double> a, std::vector<double> b) { return w2_empirical_1d(a, b); },
          py::arg("a"), py::arg("b"));
    m.def("w2_gaussian", &w2_gaussian, py::arg("m1"), py::arg("v1"), py::arg("m2"), py::arg("v2"));
    m.def("fit_power_law",
          [](std::vector<std::pair<double, double>> points) { return fit_power_law(points); }, py::arg("points"));
    m.def("mean_and_se", [](std::vector<double> s) {
        const MeanSe r = mean_and_se(s);
        return py::make_tuple(r.mean, r.std_error);
    });
    m.def("plateau_stat",
          [](const ErrorCurve& c, std::pair<double, double> early, std::pair<double, double> late) {
              return plateau_stat(c, {early.first, early.second}, {late.first, late.second});
          },
          py::arg("curve"), py::arg("early"), py::arg("late"));

    // averaging
    m.def("averaged_drift", &averaged_drift, py::arg("x"), py::arg("r"));
    m.def(
        "simulate_strong_error",
        [](double r, double delta, double horizon, std::size_t n_reps, std::uint64_t seed, double x0,
           std::size_t n_out, std::size_t floor_reps, std::size_t threads) {
            AveragingOptions o;
            o.x0 = x0;
            o.n_out = n_out;
            o.floor_reps = floor_reps;
            o.threads = threads;
            py::gil_scoped_release release;
            return simulate_strong_error({r, delta}, horizon, n_reps, seed, o);
        },
        py::arg("r"), py::arg("delta"), py::arg("horizon"), py::arg("n_reps"), py::arg("seed"), py::arg("x0") = 0.0,
        py::arg("n_out") = 101, py::arg("floor_reps") = 0, py::arg("threads") = 0);
    m.def(
        "simulate_weak_error",
        [](double r, double delta, const std::string& f, double horizon, std::size_t n_reps, std::uint64_t seed,
           std::size_t n_out, std::size_t threads) {
            AveragingOptions o;
            o.n_out = n_out;
            o.threads = threads;
            const TestFunction tf = parse_test_function(f);
            py::gil_scoped_release release;
            return simulate_weak_error({r, delta}, tf, horizon, n_reps, seed, o);
        },
        py::arg("r"), py::arg("delta"), py::arg("f"), py::arg("horizon"), py::arg("n_reps"), py::arg("seed"),
        py::arg("n_out") = 101, py::arg("threads") = 0);
    m.def(
        "estimate_contraction",
        [](double r, double x0, double x0_prime, double horizon, std::size_t n_reps, std::uint64_t seed,
           std::size_t threads) {
            ContractionOptions o;
            o.threads = threads;
            py::gil_scoped_release release;
            const ContractionEstimate e = estimate_contraction({r}, x0, x0_prime, horizon, n_reps, seed, o);
            return std::make_pair(e.lambda, e.curve);
        },
        py::arg("r"), py::arg("x0"), py::arg("x0_prime"), py::arg("horizon"), py::arg("n_reps"), py::arg("seed"),
        py::arg("threads") = 0);

    // discretization
    m.def(
        "ula_strong_error",
        [](double a, double b, double delta, double horizon, std::size_t n_reps, std::uint64_t seed, double x0,
           std::size_t floor_reps, bool zero_noise, std::size_t threads) {
            const PotentialSpec pot = b == 0.0 ? PotentialSpec::quadratic(a) : PotentialSpec::perturbed_quadratic(a, b);
            DiscretizationOptions o;
            o.x0 = x0;
            o.floor_reps = floor_reps;
            o.zero_noise = zero_noise;
            o.threads = threads;
            py::gil_scoped_release release;
            return ula_strong_error(pot, delta, horizon, n_reps, seed, o);
        },
        py::arg("a"), py::arg("b"), py::arg("delta"), py::arg("horizon"), py::arg("n_reps"), py::arg("seed"),
        py::arg("x0") = 0.0, py::arg("floor_reps") = 0, py::arg("zero_noise") = false, py::arg("threads") = 0);
    m.def(
        "ubu_strong_error",
        [](double a, double b, double gamma, double delta, double horizon, std::size_t n_reps, std::uint64_t seed,
           double x0, std::size_t floor_reps, std::size_t threads) {
            const PotentialSpec pot = b == 0.0 ? PotentialSpec::quadratic(a) : PotentialSpec::perturbed_quadratic(a, b);
            DiscretizationOptions o;
            o.x0 = x0;
            o.floor_reps = floor_reps;
            o.threads = threads;
            py::gil_scoped_release release;
            return ubu_strong_error(pot, gamma, delta, horizon, n_reps, seed, o);
        },
        py::arg("a"), py::arg("b"), py::arg("gamma"), py::arg("delta"), py::arg("horizon"), py::arg("n_reps"),
        py::arg("seed"), py::arg("x0") = 0.0, py::arg("floor_reps") = 0, py::arg("threads") = 0);
    m.def(
        "hmc_bias_curve",
        [](double a, double eps, int n_leapfrog, std::size_t chain_len, std::size_t n_reps, std::uint64_t seed,
           double x0, std::size_t threads) {
            DiscretizationOptions o;
            o.x0 = x0;
            o.threads = threads;
            py::gil_scoped_release release;
            return hmc_bias_curve(PotentialSpec::quadratic(a), eps, n_leapfrog, chain_len, n_reps, seed, o);
        },
        py::arg("a"), py::arg("eps"), py::arg("n_leapfrog"), py::arg("chain_len"), py::arg("n_reps"),
        py::arg("seed"), py::arg("x0") = 0.0, py::arg("threads") = 0);

    // mean field
    m.def("gaussian_closure_law",
          [](double kappa, double a, double m0, double v0, double t) {
              const LawMoments l = gaussian_closure_law({kappa, a, m0, v0}, t);
              return py::make_tuple(l.mean, l.variance);
          },
          py::arg("kappa"), py::arg("a"), py::arg("m0"), py::arg("v0"), py::arg("t"));
    m.def("particle_drift",
          [](double a, double kappa, std::vector<double> x) {
              const ParticleModel model = ParticleModel::quadratic(a, kappa, x.size());
              return particle_drift(model, {std::move(x), 0.0});
          },
          py::arg("a"), py::arg("kappa"), py::arg("x"));
    m.def(
        "simulate_poc_error",
        [](double a, double kappa, std::size_t n_particles, double horizon, std::size_t n_reps, std::uint64_t seed,
           double h, std::size_t n_out, std::size_t threads) {
            PocOptions o;
            o.provider = LimitProvider::GaussianClosure;
            o.h = h;
            o.n_out = n_out;
            o.threads = threads;
            py::gil_scoped_release release;
            return simulate_poc_error(ParticleModel::quadratic(a, kappa, n_particles), horizon, n_reps, seed, o);
        },
        py::arg("a"), py::arg("kappa"), py::arg("n_particles"), py::arg("horizon"), py::arg("n_reps"),
        py::arg("seed"), py::arg("h") = 1e-3, py::arg("n_out") = 101, py::arg("threads") = 0);

    // counterexample
    m.def("analytic_error", &analytic_error, py::arg("t"), py::arg("delta"));
    m.def("exact_difference", &exact_difference, py::arg("t"), py::arg("delta"));
    m.def(
        "simulate_counterexample",
        [](double delta, double h, double horizon, std::uint64_t seed, std::size_t stride) {
            CounterexampleOptions o;
            o.stride = stride;
            return simulate_counterexample({delta, h}, horizon, seed, o);
        },
        py::arg("delta"), py::arg("h"), py::arg("horizon"), py::arg("seed"), py::arg("stride") = 1);

    // harness
    m.def("run_config", &run_config, py::arg("config"), py::arg("out_dir") = "", py::arg("threads") = 0,
          "Validates and runs a JSON config given as text; returns ok, summary and curves.");
    m.def("version", &version_string);
}
