#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "uitlab/errors.hpp"
#include "uitlab/integrators.hpp"
#include "uitlab/metrics.hpp"

using namespace uitlab;

namespace {

const std::uint64_t kTag = experiment_tag("tests/integrators");

SdeModel ou_model() {
    SdeModel m;
    m.dim = 1;
    m.drift = [](std::span<const double> x, std::span<double> out) { out[0] = -x[0]; };
    m.sigma = {std::sqrt(2.0)};
    return m;
}

VectorField harmonic() {
    return [](std::span<const double> x, std::span<double> out) {
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i];
    };
}

VectorField flat() {
    return [](std::span<const double> x, std::span<double> out) {
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = 0.0;
    };
}

}  // namespace

TEST_CASE("euler step examples") {
    const SdeModel m = ou_model();
    const double x0[] = {1.0};
    const double zero[] = {0.0};
    CHECK(euler_step(m, x0, 0.1, zero)[0] == doctest::Approx(0.9).epsilon(1e-15));
    const double dw[] = {0.3162};
    CHECK(euler_step(m, x0, 0.1, dw)[0] == doctest::Approx(0.9 + std::sqrt(2.0) * 0.3162).epsilon(1e-14));

    SdeModel free;
    free.dim = 2;
    free.drift = flat();
    free.sigma = {1, 0, 0, 1};
    const double x[] = {0.5, -2.0};
    const double w[] = {0.1, 0.2};
    const Vector out = euler_step(free, x, 0.3, w);
    CHECK(out[0] == doctest::Approx(0.6));
    CHECK(out[1] == doctest::Approx(-1.8));
}

TEST_CASE("euler step reports blowup") {
    SdeModel m = ou_model();
    m.drift = [](std::span<const double>, std::span<double> out) { out[0] = std::nan(""); };
    const double x[] = {1.0};
    const double w[] = {0.0};
    CHECK_THROWS_AS(euler_step(m, x, 0.1, w, 17), NumericalBlowup);
    try {
        euler_step(m, x, 0.1, w, 17);
    } catch (const NumericalBlowup& e) {
        CHECK(e.step_index() == 17);
    }
}

TEST_CASE("exact OU step") {
    CHECK(std::abs(exact_ou_step(1.0, 0.0, std::sqrt(2.0), 1.0, 50.0, 0.0)) < 1e-15);
    CHECK(exact_ou_step(1.0, 0.0, std::sqrt(2.0), 0.7, 0.0, 3.0) == 0.7);

    RngStream s = make_stream(5, {kTag, 0, 0});
    double x = 0.0;
    std::vector<double> path;
    for (int k = 0; k < 100'000; ++k) {
        x = exact_ou_step(1.0, 0.0, std::sqrt(2.0), x, 0.5, s.normal());
        path.push_back(x);
    }
    const double mean = std::accumulate(path.begin(), path.end(), 0.0) / path.size();
    double var = 0.0;
    for (double v : path) var += (v - mean) * (v - mean);
    var /= path.size() - 1;
    CHECK(var >= 0.97);
    CHECK(var <= 1.03);
}

TEST_CASE("euler converges strongly with order one against exact OU") {
    std::vector<std::pair<double, double>> pts;
    for (int k = 4; k <= 8; ++k) {
        const double dt = std::ldexp(1.0, -k);
        const auto n = static_cast<std::size_t>(1.0 / dt);
        const BrownianPairSampler pair(1.0, dt);
        double se = 0.0;
        constexpr int reps = 2000;
        for (int r = 0; r < reps; ++r) {
            RngStream s = make_stream(1, {kTag, static_cast<std::uint64_t>(r), 1});
            double e = 1.0, x = 1.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double z1 = s.normal(), z2 = s.normal();
                const BrownianPair p = pair(z1, z2);
                e += -e * dt + std::sqrt(2.0) * p.increment;
                x = std::exp(-dt) * x + std::sqrt(2.0) * p.weighted;
            }
            se += (e - x) * (e - x);
        }
        pts.emplace_back(dt, std::sqrt(se / reps));
    }
    const RateFit fit = fit_power_law(pts);
    CHECK(fit.exponent >= 0.8);
    CHECK(fit.exponent <= 1.2);
}

TEST_CASE("brownian pair moments") {
    const double gamma = 1.3, s = 0.4;
    const auto c = brownian_pair_covariance(gamma, s);
    const BrownianPairSampler pair(gamma, s);
    RngStream rng = make_stream(2, {kTag, 0, 2});
    constexpr int n = 200'000;
    double sww = 0, swi = 0, sii = 0;
    for (int i = 0; i < n; ++i) {
        const double z1 = rng.normal(), z2 = rng.normal();
        const BrownianPair p = pair(z1, z2);
        sww += p.weighted * p.weighted;
        swi += p.weighted * p.increment;
        sii += p.increment * p.increment;
    }
    CHECK(sww / n == doctest::Approx(c.var_weighted).epsilon(0.02));
    CHECK(swi / n == doctest::Approx(c.cov).epsilon(0.02));
    CHECK(sii / n == doctest::Approx(s).epsilon(0.02));
}

TEST_CASE("aggregated pairs have the coarse-interval law") {
    const double gamma = 0.8, tau = 0.05;
    const BrownianPairSampler fine(gamma, tau);
    const auto coarse = brownian_pair_covariance(gamma, 8 * tau);
    RngStream rng = make_stream(4, {kTag, 0, 3});
    constexpr int n = 100'000;
    double sww = 0, swi = 0;
    for (int i = 0; i < n; ++i) {
        BrownianPair acc;
        for (int j = 0; j < 8; ++j) {
            const double z1 = rng.normal(), z2 = rng.normal();
            accumulate_pair(acc, fine(z1, z2), std::exp(-gamma * tau));
        }
        sww += acc.weighted * acc.weighted;
        swi += acc.weighted * acc.increment;
    }
    CHECK(sww / n == doctest::Approx(coarse.var_weighted).epsilon(0.03));
    CHECK(swi / n == doctest::Approx(coarse.cov).epsilon(0.03));
}

TEST_CASE("U-step covariance matches fine Euler integration of the U-flow") {
    // dX = V dt, dV = -gamma V dt + sqrt(2 gamma) dB from (0, 0) over time s.
    const double gamma = 1.5, s = 0.3;
    const auto c = u_step_covariance(gamma, s);
    constexpr int paths = 100'000;
    constexpr int sub = 200;
    const double dt = s / sub;
    RngStream rng = make_stream(6, {kTag, 0, 4});
    double mx = 0, mv = 0, sxx = 0, svv = 0, sxv = 0;
    std::vector<double> xs(paths), vs(paths);
    for (int p = 0; p < paths; ++p) {
        double x = 0, v = 0;
        for (int k = 0; k < sub; ++k) {
            const double dB = std::sqrt(dt) * rng.normal();
            x += v * dt;
            v += -gamma * v * dt + std::sqrt(2 * gamma) * dB;
        }
        xs[p] = x;
        vs[p] = v;
        mx += x;
        mv += v;
    }
    mx /= paths;
    mv /= paths;
    for (int p = 0; p < paths; ++p) {
        sxx += (xs[p] - mx) * (xs[p] - mx);
        svv += (vs[p] - mv) * (vs[p] - mv);
        sxv += (xs[p] - mx) * (vs[p] - mv);
    }
    sxx /= paths - 1;
    svv /= paths - 1;
    sxv /= paths - 1;
    const double n = paths;
    CHECK(std::abs(mx) <= 3 * std::sqrt(c.var_x / n));
    CHECK(std::abs(mv) <= 3 * std::sqrt(c.var_v / n));
    // Second moments: SE of a Gaussian sample (co)variance, plus the O(dt) Euler bias.
    CHECK(std::abs(svv - c.var_v) <= 3 * c.var_v * std::sqrt(2 / n) + 2 * gamma * dt * c.var_v);
    CHECK(std::abs(sxx - c.var_x) <= 3 * c.var_x * std::sqrt(2 / n) + 2 * gamma * dt * c.var_x);
    CHECK(std::abs(sxv - c.cov) <= 3 * std::sqrt((c.var_x * c.var_v + c.cov * c.cov) / n) + 2 * gamma * dt * c.cov);
}

TEST_CASE("U-noise from a path pair has the U-step covariance") {
    const double gamma = 0.7, s = 0.25;
    const auto c = u_step_covariance(gamma, s);
    const BrownianPairSampler pair(gamma, s);
    RngStream rng = make_stream(8, {kTag, 0, 5});
    constexpr int n = 200'000;
    double sxx = 0, svv = 0, sxv = 0;
    for (int i = 0; i < n; ++i) {
        const double z1 = rng.normal(), z2 = rng.normal();
        const UNoise u = u_noise_from_path(gamma, pair(z1, z2));
        sxx += u.eta_x * u.eta_x;
        svv += u.eta_v * u.eta_v;
        sxv += u.eta_x * u.eta_v;
    }
    CHECK(svv / n == doctest::Approx(c.var_v).epsilon(0.02));
    CHECK(sxx / n == doctest::Approx(c.var_x).epsilon(0.02));
    CHECK(sxv / n == doctest::Approx(c.cov).epsilon(0.02));
}

TEST_CASE("u-step covariance series branch is continuous") {
    const auto below = u_step_covariance(1.0, 0.999e-3);
    const auto above = u_step_covariance(1.0, 1.001e-3);
    CHECK(below.var_x / above.var_x == doctest::Approx(std::pow(0.999 / 1.001, 3)).epsilon(1e-4));
}

TEST_CASE("UBU examples") {
    const double zeros[8] = {};
    KineticModel m{1, harmonic(), 1e-12};
    const double x[] = {1.0};
    const double v[] = {0.0};
    PhasePoint p = ubu_step(m, x, v, 0.1, std::span<const double>(zeros, 4));
    CHECK(p.x[0] == doctest::Approx(0.995).epsilon(1e-9));
    CHECK(p.v[0] == doctest::Approx(-0.1).epsilon(1e-9));

    p = ubu_step(m, x, v, 0.0, std::span<const double>(zeros, 4));
    CHECK(p.x[0] == 1.0);
    CHECK(p.v[0] == 0.0);

    KineticModel free{1, flat(), 1.0};
    const double x2[] = {0.0};
    const double v2[] = {1.0};
    p = ubu_step(free, x2, v2, 0.2, std::span<const double>(zeros, 4));
    CHECK(p.v[0] == doctest::Approx(std::exp(-0.2)).epsilon(1e-14));
    CHECK(p.x[0] == doctest::Approx(1.0 - std::exp(-0.2)).epsilon(1e-14));
}

TEST_CASE("UBU with zero gradient samples the kinetic OU marginal") {
    KineticModel free{1, flat(), 1.0};
    constexpr int reps = 20'000;
    double sv = 0, svv = 0;
    std::vector<double> z(4);
    for (int r = 0; r < reps; ++r) {
        RngStream rng = make_stream(12, {kTag, static_cast<std::uint64_t>(r), 6});
        Vector x{0.0}, v{0.0};
        for (int k = 0; k < 50; ++k) {
            rng.fill_normal(z);
            PhasePoint p = ubu_step(free, x, v, 0.2, z);
            x = p.x;
            v = p.v;
        }
        sv += v[0];
        svv += v[0] * v[0];
    }
    const double var = svv / reps - (sv / reps) * (sv / reps);
    CHECK(std::abs(var - 1.0) <= 3.0 * std::sqrt(2.0 / reps));
}

TEST_CASE("leapfrog examples") {
    const double x[] = {1.0};
    const double v[] = {0.0};
    PhasePoint p = leapfrog(harmonic(), x, v, 0.1, 1);
    CHECK(p.x[0] == doctest::Approx(0.995).epsilon(1e-15));
    CHECK(p.v[0] == doctest::Approx(-0.09975).epsilon(1e-14));
    p = leapfrog(harmonic(), x, v, 0.0, 1);
    CHECK(p.x[0] == 1.0);
    CHECK(p.v[0] == 0.0);
    CHECK_THROWS_AS(leapfrog(harmonic(), x, v, 0.1, 0), InvalidArgument);
}

TEST_CASE("leapfrog is reversible and volume preserving") {
    auto grad = [](std::span<const double> x, std::span<double> out) { out[0] = x[0] + 0.3 * std::sin(x[0]); };
    const double x[] = {0.7};
    const double v[] = {-1.2};
    PhasePoint f = leapfrog(grad, x, v, 0.05, 40);
    const double back_v[] = {-f.v[0]};
    PhasePoint b = leapfrog(grad, f.x, back_v, 0.05, 40);
    CHECK(std::abs(b.x[0] - x[0]) < 1e-12);
    CHECK(std::abs(-b.v[0] - v[0]) < 1e-12);

    const double h = 1e-6;
    auto step = [&](double x0, double v0) {
        const double xx[] = {x0};
        const double vv[] = {v0};
        return leapfrog(harmonic(), xx, vv, 0.1, 1);
    };
    const PhasePoint px = step(0.3 + h, 0.5), mx = step(0.3 - h, 0.5);
    const PhasePoint pv = step(0.3, 0.5 + h), mv = step(0.3, 0.5 - h);
    const double j11 = (px.x[0] - mx.x[0]) / (2 * h), j21 = (px.v[0] - mx.v[0]) / (2 * h);
    const double j12 = (pv.x[0] - mv.x[0]) / (2 * h), j22 = (pv.v[0] - mv.v[0]) / (2 * h);
    CHECK(std::abs(j11 * j22 - j12 * j21 - 1.0) < 1e-6);
}

TEST_CASE("HMC kernel") {
    const double x[] = {0.4};
    const double zero[] = {0.0};
    const Vector det = hmc_kernel_with_momentum(harmonic(), x, 0.1, 5, zero);
    const double v0[] = {0.0};
    CHECK(det[0] == leapfrog(harmonic(), x, v0, 0.1, 5).x[0]);

    RngStream a = make_stream(3, {kTag, 0, 7});
    RngStream b = make_stream(3, {kTag, 0, 7});
    CHECK(hmc_kernel(harmonic(), x, 0.1, 10, a)[0] == hmc_kernel(harmonic(), x, 0.1, 10, b)[0]);
}

TEST_CASE("unadjusted HMC stationary variance approaches one as eps shrinks") {
    auto variance_for = [](double eps) {
        const int L = static_cast<int>(std::lround(1.0 / eps));
        RngStream s = make_stream(21, {kTag, 0, 8});
        Vector x{0.0};
        double acc = 0.0;
        constexpr int burn = 100, n = 100'000;
        for (int k = 0; k < burn + n; ++k) {
            x = hmc_kernel(harmonic(), x, eps, L, s);
            if (k >= burn) acc += x[0] * x[0];
        }
        return acc / n;
    };
    const double coarse = variance_for(0.5);
    const double fine = variance_for(0.05);
    // Leapfrog on U = x^2/2 leaves N(0, 1 / (1 - eps^2/4)) invariant.
    CHECK(coarse == doctest::Approx(1.0 / (1.0 - 0.0625)).epsilon(0.03));
    CHECK(std::abs(fine - 1.0) < 0.03);
}
