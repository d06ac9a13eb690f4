#include <doctest.h>

#include <cmath>
#include <vector>

#include "uitlab/discretization.hpp"
#include "uitlab/errors.hpp"

using namespace uitlab;

namespace {

ErrorCurve synthetic(double sup) {
    ErrorCurve c;
    c.times = {0.0, 1.0};
    c.values = {0.0, sup};
    c.std_errors = {0.0, 0.0};
    return c;
}

}  // namespace

TEST_CASE("potential specs") {
    const PotentialSpec q = PotentialSpec::quadratic(2.0);
    CHECK(q.grad(1.5) == 3.0);
    CHECK(q.value(1.0) == 1.0);
    const PotentialSpec p = PotentialSpec::perturbed_quadratic(1.0, 0.3);
    CHECK(p.grad(1.0) == doctest::Approx(1.0 + 0.3 * std::tanh(1.0)));
    CHECK_THROWS_AS(PotentialSpec::perturbed_quadratic(1.0, 1.5), InvalidArgument);
    CHECK_THROWS_AS(PotentialSpec::quadratic(0.0), InvalidArgument);
    CHECK(parse_scheme("ula") == Scheme::ULA);
    CHECK(parse_scheme("UBU") == Scheme::UBU);
    CHECK(parse_scheme("hmc") == Scheme::HMC);
}

TEST_CASE("step helpers") {
    CHECK(has_integer_inverse(0.25));
    CHECK(has_integer_inverse(0.01));
    CHECK_FALSE(has_integer_inverse(0.3));
    CHECK(leapfrog_steps(1.0, 0.125) == 8);
}

TEST_CASE("zero-noise ULA reproduces the deterministic one-step gap") {
    DiscretizationOptions opts;
    opts.x0 = 1.0;
    opts.zero_noise = true;
    opts.floor_reps = 0;
    const ErrorCurve c = ula_strong_error(PotentialSpec::quadratic(1.0), 0.5, 0.5, 100, 1, opts);
    REQUIRE(c.size() == 2);
    CHECK(c.values[0] == 0.0);
    CHECK(std::sqrt(c.values[1]) == doctest::Approx(std::exp(-0.5) - 0.5).epsilon(1e-12));
    CHECK(std::sqrt(c.values[1]) == doctest::Approx(0.1065).epsilon(1e-3));
}

TEST_CASE("ULA error on the quadratic potential shrinks with delta") {
    DiscretizationOptions opts;
    opts.floor_reps = 0;
    opts.n_out = 11;
    opts.x0 = 1.0;
    const double big = ula_strong_error(PotentialSpec::quadratic(1.0), 0.125, 5.0, 300, 2, opts).values.back();
    const double small = ula_strong_error(PotentialSpec::quadratic(1.0), 0.03125, 5.0, 300, 2, opts).values.back();
    CHECK(small < big / 4.0);
}

TEST_CASE("UBU with a vanishing gradient is exact") {
    DiscretizationOptions opts;
    opts.zero_gradient = true;
    opts.floor_reps = 0;
    opts.n_out = 11;
    opts.x0 = 0.5;
    opts.v0 = -0.5;
    const ErrorCurve c = ubu_strong_error(PotentialSpec::quadratic(1.0), 1.0, 0.25, 4.0, 100, 3, opts);
    for (double v : c.values) CHECK(v < 1e-20);
    opts.kinetic_reference = KineticReference::FineEuler;
    opts.reference_factor = 64;
    const ErrorCurve e = ubu_strong_error(PotentialSpec::quadratic(1.0), 1.0, 0.25, 4.0, 100, 3, opts);
    CHECK(e.values.back() > 0.0);
    CHECK(e.values.back() < 1e-3);
}

TEST_CASE("HMC bias curve") {
    const PotentialSpec q = PotentialSpec::quadratic(1.0);
    DiscretizationOptions opts;
    const ErrorCurve id = hmc_bias_curve(q, 0.0, 1, 10, 100, 4, opts);
    for (double v : id.values) CHECK(v == 0.0);
    CHECK_THROWS_AS(hmc_bias_curve(q, M_PI / 2 / 10 + 1e-5, 10, 10, 100, 4, opts), InvalidArgument);
    CHECK_THROWS_AS(hmc_bias_curve(PotentialSpec::perturbed_quadratic(1.0, 0.3), 0.1, 10, 10, 100, 4, opts),
                    InvalidArgument);
    const ErrorCurve c = hmc_bias_curve(q, 0.1, 10, 10, 200, 4, opts);
    CHECK(c.values.back() > 0.0);
}

TEST_CASE("exact-flow HMC chain keeps the Gaussian target") {
    const ErrorCurve v = exact_hmc_variance(PotentialSpec::quadratic(1.0), 1.0, 20, 4000, 5);
    CHECK(std::abs(v.values.back() - 1.0) <= 3 * v.std_errors.back());
}

TEST_CASE("order from synthetic curves") {
    const std::vector<double> steps{0.1, 0.01};
    const OrderResult r = order_from_curves(steps, {synthetic(0.01), synthetic(1e-4)});
    CHECK(r.sup_fit.exponent == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.terminal_fit.exponent == doctest::Approx(1.0).epsilon(1e-12));

    ErrorCurve flagged = synthetic(1e-4);
    flagged.flags.push_back("reference_floor");
    CHECK_THROWS_AS(order_from_curves(steps, {synthetic(0.01), flagged}), FitFailure);
}

TEST_CASE("budget cap") {
    DiscretizationOptions opts;
    opts.max_steps = 1000;
    opts.floor_reps = 0;
    CHECK_THROWS_AS(ula_strong_error(PotentialSpec::quadratic(1.0), 0.01, 20.0, 100, 1, opts), BudgetExceeded);
}
