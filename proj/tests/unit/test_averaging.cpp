#include <doctest.h>

#include <cmath>
#include <vector>

#include "uitlab/averaging.hpp"
#include "uitlab/errors.hpp"

using namespace uitlab;

namespace {

struct GaussHermite {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Nodes and weights for the weight e^{-x^2}, by Newton iteration on the
// orthonormal Hermite recurrence.
GaussHermite gauss_hermite(int n) {
    const double pim4 = std::pow(M_PI, -0.25);
    GaussHermite gh{std::vector<double>(n), std::vector<double>(n)};
    double z = 0.0;
    for (int i = 0; i < (n + 1) / 2; ++i) {
        if (i == 0) z = std::sqrt(2.0 * n + 1) - 1.85575 * std::pow(2.0 * n + 1, -0.16667);
        else if (i == 1) z -= 1.14 * std::pow(double(n), 0.426) / z;
        else if (i == 2) z = 1.86 * z - 0.86 * gh.nodes[0];
        else if (i == 3) z = 1.91 * z - 0.91 * gh.nodes[1];
        else z = 2.0 * z - gh.nodes[i - 2];
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = pim4, p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt(double(j - 1) / j) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) <= 1e-15) break;
        }
        gh.nodes[i] = z;
        gh.nodes[n - 1 - i] = -z;
        gh.weights[i] = gh.weights[n - 1 - i] = 2.0 / (pp * pp);
    }
    return gh;
}

// -x - r E cos(Z), Z ~ N(r sin x, 1), by quadrature.
double averaged_drift_quadrature(const GaussHermite& gh, double x, double r) {
    const double m = r * std::sin(x);
    double s = 0.0;
    for (std::size_t i = 0; i < gh.nodes.size(); ++i) s += gh.weights[i] * std::cos(m + std::sqrt(2.0) * gh.nodes[i]);
    return -x - r * s / std::sqrt(M_PI);
}

}  // namespace

TEST_CASE("averaged drift examples") {
    CHECK(averaged_drift(0.0, 1.0) == doctest::Approx(-std::exp(-0.5)).epsilon(1e-15));
    CHECK(averaged_drift(0.0, 1.0) == doctest::Approx(-0.60653).epsilon(1e-5));
    CHECK(averaged_drift(0.7, 0.0) == -0.7);
    CHECK(averaged_drift(0.0, 2.0) == doctest::Approx(-1.21306).epsilon(1e-5));
}

TEST_CASE("averaged drift agrees with 40-node Gauss-Hermite quadrature") {
    const GaussHermite gh = gauss_hermite(40);
    for (double r : {0.0, 0.5, 1.0, 2.0}) {
        for (int k = -6; k <= 6; ++k) {
            const double x = 0.5 * k;
            CHECK(std::abs(averaged_drift(x, r) - averaged_drift_quadrature(gh, x, r)) < 1e-10);
        }
    }
}

TEST_CASE("slow-fast step examples") {
    const SlowFastModel m{1.0, 0.1};
    const SlowFastState s = slowfast_step(m, {0.0, 0.0}, 0.001, 0.0, 0.0);
    CHECK(s.x == doctest::Approx(-0.001).epsilon(1e-14));
    CHECK(s.y == 0.0);

    const SlowFastModel free{0.0, 0.1};
    const SlowFastState d = slowfast_step(free, {0.8, 3.0}, 0.001, 0.02, 0.0);
    CHECK(d.x == doctest::Approx(0.8 - 0.8 * 0.001 + std::sqrt(2.0) * 0.02).epsilon(1e-15));

    CHECK_THROWS_AS(slowfast_step(m, {0.0, 0.0}, 0.01, 0.0, 0.0), InvalidArgument);
    CHECK_THROWS_AS(slowfast_step(m, {0.0, 0.0}, 0.0, 0.0, 0.0), InvalidArgument);
}

TEST_CASE("deterministic fixed point stays put") {
    const double r = 1.0;
    double x = -0.8, y = 0.7;
    for (int it = 0; it < 50; ++it) {
        const double f1 = x + r * std::cos(y), f2 = y - r * std::sin(x);
        const double a = 1.0, b = -r * std::sin(y), c = -r * std::cos(x), d = 1.0;
        const double det = a * d - b * c;
        x -= (d * f1 - b * f2) / det;
        y -= (-c * f1 + a * f2) / det;
    }
    CHECK(std::abs(x + r * std::cos(y)) < 1e-10);
    CHECK(std::abs(y - r * std::sin(x)) < 1e-10);
    // Independent scalar route: x = -cos(sin x) by fixed-point iteration.
    double z = 0.0;
    for (int it = 0; it < 200; ++it) z = -std::cos(std::sin(z));
    CHECK(x == doctest::Approx(z).epsilon(1e-12));
    CHECK(x == doctest::Approx(-0.76817).epsilon(1e-5));
    CHECK(y == doctest::Approx(-0.69482).epsilon(1e-5));
    const SlowFastState s = slowfast_step({r, 0.1}, {x, y}, 0.005, 0.0, 0.0);
    CHECK(std::abs(s.x - x) < 1e-10);
    CHECK(std::abs(s.y - y) < 1e-10);
}

TEST_CASE("contraction and Lipschitz bounds") {
    CHECK(AveragedModel{1.0}.contraction_rate_bound() == doctest::Approx(1.0 - std::exp(-0.5)));
    CHECK(AveragedModel{1.5}.contraction_rate_bound() == doctest::Approx(0.0902).epsilon(1e-3));
    CHECK(AveragedModel{0.0}.lipschitz_bound() == 1.0);
    CHECK(coupled_step_size(0.01) == doctest::Approx(5e-4));
    CHECK(coupled_step_size(1.0) == kDefaultStepBase);
}

TEST_CASE("strong error vanishes without coupling") {
    AveragingOptions opts;
    opts.floor_reps = 0;
    opts.n_out = 21;
    const ErrorCurve c = simulate_strong_error({0.0, 0.05}, 2.0, 100, 1, opts);
    const double h = coupled_step_size(0.05);
    for (double v : c.values) CHECK(v <= 10 * h * h * 2.0);
}

TEST_CASE("weak error of a constant test function is exactly zero") {
    AveragingOptions opts;
    opts.n_out = 11;
    const ErrorCurve c = simulate_weak_error({1.0, 0.05}, TestFunction::Constant, 1.0, 100, 2, opts);
    for (double v : c.values) CHECK(v == 0.0);
    const ErrorCurve z = simulate_weak_error({0.0, 0.05}, TestFunction::Tanh, 1.0, 100, 2, opts);
    for (double v : z.values) CHECK(v < 1e-12);
}

TEST_CASE("test function registry") {
    CHECK(parse_test_function("tanh") == TestFunction::Tanh);
    CHECK(parse_test_function("cos") == TestFunction::Cos);
    CHECK(evaluate(TestFunction::InverseQuadratic, 1.0) == 0.5);
    CHECK_THROWS_AS(parse_test_function("sin"), InvalidArgument);
}

TEST_CASE("contraction estimates") {
    ContractionOptions opts;
    opts.n_out = 41;
    const ContractionEstimate lin = estimate_contraction({0.0}, 1.0, -1.0, 4.0, 100, 3, opts);
    CHECK(std::abs(lin.lambda - 1.0) < 1e-6);
    const ContractionEstimate one = estimate_contraction({1.0}, 1.0, -1.0, 4.0, 200, 3, opts);
    CHECK(one.lambda >= 0.35);
    CHECK_THROWS_AS(estimate_contraction({1.0}, 1.0, 1.0, 4.0, 100, 3, opts), InvalidArgument);
}

TEST_CASE("moment traces") {
    AveragingOptions opts;
    opts.n_out = 51;
    opts.x0 = 0.5;
    const MomentTraces init = moment_trace({0.0, 0.1}, 5.0, 2000, 4, opts);
    CHECK(init.x_second_moment.values.front() == 0.25);
    const ErrorCurve& xs = init.x_second_moment;
    CHECK(std::abs(xs.values.back() - 1.0) <= 3 * xs.std_errors.back() + 0.01);

    opts.x0 = 0.0;
    const MomentTraces coupled = moment_trace({1.0, 0.1}, 5.0, 500, 5, opts);
    for (std::size_t k = 0; k < coupled.x_second_moment.size(); ++k) {
        const double t = coupled.x_second_moment.times[k];
        CHECK(coupled.x_second_moment.values[k] <=
              slow_moment_bound(t, 0.0, 1.0) + 3 * coupled.x_second_moment.std_errors[k]);
    }
    CHECK(slow_moment_bound(0.0, 2.0, 1.0) == 4.0);
}
