#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "uitlab/errors.hpp"
#include "uitlab/stochastic_core.hpp"

using namespace uitlab;

namespace {

const std::uint64_t kA = experiment_tag("tests/core");

double sample_mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double sample_var(const std::vector<double>& v) {
    const double m = sample_mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / (v.size() - 1);
}

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
    }
    return d;
}

}  // namespace

TEST_CASE("philox known answers") {
    using A4 = std::array<std::uint32_t, 4>;
    CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("time grid uses multiplication") {
    const TimeGrid g(0.0, 0.1, 1'000'000);
    CHECK(g.time(999'999) == 999'999 * 0.1);
    CHECK(g.end() == 1'000'000 * 0.1);
    CHECK_THROWS_AS(TimeGrid(0.0, 0.0, 10), InvalidArgument);
    CHECK_THROWS_AS(TimeGrid(0.0, 0.1, 0), InvalidArgument);
}

TEST_CASE("output indices and step counts") {
    const auto idx = output_indices(100, 11);
    REQUIRE(idx.size() == 11);
    CHECK(idx.front() == 0);
    CHECK(idx.back() == 100);
    CHECK(std::is_sorted(idx.begin(), idx.end()));
    CHECK(output_indices(3, 50).size() == 4);
    CHECK(steps_for(20.0, 1e-3) == 20000);
    CHECK(steps_for(1.0, 0.3) == 4);
}

TEST_CASE("stream determinism and seed sensitivity") {
    RngStream a = make_stream(42, {kA, 0, 0});
    RngStream b = make_stream(42, {kA, 0, 0});
    RngStream c = make_stream(43, {kA, 0, 0});
    bool differs = false;
    for (int i = 0; i < 10; ++i) {
        const double x = a.normal();
        CHECK(x == b.normal());
        differs = differs || x != c.normal();
    }
    CHECK(differs);
    a.reset();
    b.reset();
    for (int i = 0; i < 5; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("distinct trajectory ids are uncorrelated") {
    RngStream a = make_stream(42, {kA, 0, 0});
    RngStream b = make_stream(42, {kA, 1, 0});
    constexpr int n = 1'000'000;
    double sab = 0.0, sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = a.normal();
        const double y = b.normal();
        sab += x * y;
        sa += x;
        sb += y;
        saa += x * x;
        sbb += y * y;
    }
    const double cov = sab / n - (sa / n) * (sb / n);
    const double corr = cov / std::sqrt((saa / n - sa * sa / n / n) * (sbb / n - sb * sb / n / n));
    CHECK(std::abs(corr) <= 4.0 / std::sqrt(double(n)));
}

TEST_CASE("uniform stays in the open unit interval") {
    RngStream s = make_stream(1, {kA, 2, 0});
    for (int i = 0; i < 100000; ++i) {
        const double u = s.uniform();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("gaussian increments: variance and mean") {
    RngStream s = make_stream(7, {kA, 3, 0});
    const TimeGrid g(0.0, 0.01, 1'000'000);
    const IncrementArray inc = gaussian_increments(s, g, 1);
    const auto& v = inc.values();
    CHECK(sample_var(v) >= 0.0097);
    CHECK(sample_var(v) <= 0.0103);
    CHECK(std::abs(sample_mean(v)) <= 4e-4);
    CHECK(std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); }));

    s.reset();
    const IncrementArray again = gaussian_increments(s, g, 1);
    CHECK(again.values() == v);
}

TEST_CASE("coarsening sums blocks") {
    const TimeGrid fine(0.0, 0.5, 2);
    const IncrementArray two(fine, 1, {0.25, -1.5});
    const IncrementArray one = coarsen_increments(two, 2);
    REQUIRE(one.n_steps() == 1);
    CHECK(one(0, 0) == 0.25 + -1.5);
    CHECK(one.grid().dt() == 1.0);
    CHECK(coarsen_increments(two, 1).values() == two.values());
    CHECK_THROWS_AS(coarsen_increments(IncrementArray(TimeGrid(0.0, 0.1, 3), 1, {1, 2, 3}), 2), InvalidArgument);
}

TEST_CASE("coarsened variance is factor times fine dt") {
    RngStream s = make_stream(9, {kA, 4, 0});
    const IncrementArray fine = gaussian_increments(s, TimeGrid(0.0, 0.001, 400'000), 1);
    const IncrementArray coarse = coarsen_increments(fine, 4);
    CHECK(coarse.n_steps() == 100'000);
    const double var = sample_var(coarse.values());
    CHECK(std::abs(var - 0.004) <= 4.0 * 0.004 * std::sqrt(2.0 / 1e5));
}

TEST_CASE("coarsened increments match direct coarse draws (KS at 1%)") {
    RngStream s1 = make_stream(11, {kA, 5, 0});
    RngStream s2 = make_stream(11, {kA, 6, 0});
    const IncrementArray fine = gaussian_increments(s1, TimeGrid(0.0, 0.01, 80'000), 1);
    const IncrementArray direct = gaussian_increments(s2, TimeGrid(0.0, 0.08, 10'000), 1);
    const double d = ks_statistic(coarsen_increments(fine, 8).values(), direct.values());
    // Critical value at the 1% level for n = m = 1e4.
    const double crit = 1.628 * std::sqrt(2.0 / 1e4);
    CHECK(d < crit);
}

TEST_CASE("multi-dimensional increment rows") {
    RngStream s = make_stream(3, {kA, 7, 0});
    const IncrementArray inc = gaussian_increments(s, TimeGrid(0.0, 0.1, 10), 3);
    CHECK(inc.values().size() == 30);
    CHECK(inc.row(2).size() == 3);
    CHECK(inc.row(2)[1] == inc(2, 1));
    CHECK_THROWS_AS(gaussian_increments(s, TimeGrid(0.0, 0.1, 10), 0), InvalidArgument);
}
