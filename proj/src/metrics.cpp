#include "uitlab/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "uitlab/errors.hpp"
#include "uitlab/stochastic_core.hpp"

namespace uitlab {
namespace {

/// Neumaier summation.
class CompensatedSum {
  public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

struct LineFit {
    double slope;
    double intercept;
    double r_squared;
};

LineFit least_squares(std::span<const double> x, std::span<const double> y) {
    const auto n = static_cast<double>(x.size());
    CompensatedSum sx;
    CompensatedSum sy;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx.add(x[i]);
        sy.add(y[i]);
    }
    const double mx = sx.value() / n;
    const double my = sy.value() / n;
    CompensatedSum sxx;
    CompensatedSum sxy;
    CompensatedSum syy;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx.add(dx * dx);
        sxy.add(dx * dy);
        syy.add(dy * dy);
    }
    if (!(sxx.value() > 0.0)) {
        throw FitFailure("regression abscissae are all equal");
    }
    const double slope = sxy.value() / sxx.value();
    const double intercept = my - slope * mx;
    CompensatedSum ss_res;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (intercept + slope * x[i]);
        ss_res.add(r * r);
    }
    double r2 = 1.0;
    if (syy.value() > 0.0) {
        r2 = std::clamp(1.0 - ss_res.value() / syy.value(), 0.0, 1.0);
    }
    return {slope, intercept, r2};
}

}  // namespace

void ErrorCurve::validate() const {
    if (values.size() != times.size() || std_errors.size() != times.size()) {
        throw InvalidArgument("ErrorCurve: times, values and std_errors differ in length");
    }
}

MeanSe mean_and_se(std::span<const double> samples) {
    if (samples.size() < 2) {
        throw InvalidArgument("mean_and_se: need at least 2 samples");
    }
    const auto n = static_cast<double>(samples.size());
    CompensatedSum sum;
    for (double s : samples) {
        sum.add(s);
    }
    const double mean = sum.value() / n;
    CompensatedSum sq;
    for (double s : samples) {
        const double d = s - mean;
        sq.add(d * d);
    }
    const double var = sq.value() / (n - 1.0);
    return {mean, std::sqrt(var / n)};
}

ErrorCurve curve_from_samples(std::vector<double> times, const std::vector<std::vector<double>>& per_rep) {
    ErrorCurve curve;
    curve.times = std::move(times);
    const std::size_t n_times = curve.times.size();
    curve.values.resize(n_times);
    curve.std_errors.resize(n_times);
    std::vector<double> column(per_rep.size());
    for (std::size_t k = 0; k < n_times; ++k) {
        for (std::size_t r = 0; r < per_rep.size(); ++r) {
            column[r] = per_rep[r].at(k);
        }
        const MeanSe ms = mean_and_se(column);
        curve.values[k] = ms.mean;
        curve.std_errors[k] = ms.std_error;
    }
    curve.meta.n_reps = per_rep.size();
    return curve;
}

double w2_empirical_1d(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw InvalidArgument("w2_empirical_1d: samples must have equal length");
    }
    if (a.empty()) {
        throw InvalidArgument("w2_empirical_1d: samples must be non-empty");
    }
    std::vector<double> sa(a.begin(), a.end());
    std::vector<double> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    CompensatedSum sum;
    for (std::size_t i = 0; i < sa.size(); ++i) {
        const double d = sa[i] - sb[i];
        sum.add(d * d);
    }
    return std::sqrt(sum.value() / static_cast<double>(sa.size()));
}

double w2_gaussian(double m1, double v1, double m2, double v2) {
    if (v1 < 0.0 || v2 < 0.0) {
        throw InvalidArgument("w2_gaussian: variances must be non-negative");
    }
    const double dm = m1 - m2;
    const double ds = std::sqrt(v1) - std::sqrt(v2);
    return std::sqrt(dm * dm + ds * ds);
}

RateFit fit_power_law(std::span<const std::pair<double, double>> points) {
    if (points.size() < 2) {
        throw InvalidArgument("fit_power_law: need at least 2 points");
    }
    std::vector<double> lx;
    std::vector<double> ly;
    lx.reserve(points.size());
    ly.reserve(points.size());
    for (const auto& [scale, value] : points) {
        if (!(scale > 0.0) || !(value > 0.0) || !std::isfinite(scale) || !std::isfinite(value)) {
            throw InvalidArgument("fit_power_law: scales and values must be positive and finite");
        }
        lx.push_back(std::log(scale));
        ly.push_back(std::log(value));
    }
    const LineFit fit = least_squares(lx, ly);
    return {fit.slope, fit.intercept, fit.r_squared, points.size()};
}

RateFit fit_exp_decay(const ErrorCurve& curve, Window window) {
    curve.validate();
    std::vector<double> t;
    std::vector<double> ly;
    for (std::size_t k = 0; k < curve.size(); ++k) {
        if (curve.times[k] < window.lo || curve.times[k] > window.hi) {
            continue;
        }
        const double v = curve.values[k];
        if (v > 0.0 && std::isfinite(v) && v > 10.0 * curve.std_errors[k]) {
            t.push_back(curve.times[k]);
            ly.push_back(std::log(v));
        }
    }
    if (t.size() < 3) {
        throw FitFailure("fit_exp_decay: fewer than 3 usable points above the noise floor");
    }
    const LineFit fit = least_squares(t, ly);
    return {-fit.slope, fit.intercept, fit.r_squared, t.size()};
}

double window_max(const ErrorCurve& curve, Window window) {
    curve.validate();
    bool any = false;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < curve.size(); ++k) {
        if (curve.times[k] >= window.lo && curve.times[k] <= window.hi) {
            any = true;
            best = std::max(best, curve.values[k]);
        }
    }
    if (!any) {
        throw InvalidArgument("window contains no curve points");
    }
    return best;
}

double window_argmax_se(const ErrorCurve& curve, Window window) {
    const double best = window_max(curve, window);
    for (std::size_t k = 0; k < curve.size(); ++k) {
        if (curve.times[k] >= window.lo && curve.times[k] <= window.hi && curve.values[k] == best) {
            return curve.std_errors[k];
        }
    }
    return 0.0;
}

double plateau_stat(const ErrorCurve& curve, Window early, Window late) {
    const double e = window_max(curve, early);
    const double l = window_max(curve, late);
    if (e == 0.0) {
        return l == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    }
    return l / e;
}

double w2_by_enumeration(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw InvalidArgument("w2_by_enumeration: samples must have equal length");
    }
    if (a.empty() || a.size() > 8) {
        throw InvalidArgument("w2_by_enumeration: need 1 <= n <= 8");
    }
    std::vector<double> sa(a.begin(), a.end());
    std::sort(sa.begin(), sa.end());
    std::vector<std::size_t> perm(b.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        perm[i] = i;
    }
    double best = std::numeric_limits<double>::infinity();
    do {
        CompensatedSum sum;
        for (std::size_t i = 0; i < sa.size(); ++i) {
            const double d = sa[i] - b[perm[i]];
            sum.add(d * d);
        }
        best = std::min(best, sum.value());
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::sqrt(best / static_cast<double>(sa.size()));
}

std::vector<SelftestCheck> metrics_selftest(std::uint64_t seed) {
    std::vector<SelftestCheck> out;
    const std::uint64_t tag = experiment_tag("metrics/selftest");

    {
        RngStream rng = make_stream(seed, {tag, 0, 0});
        std::size_t mismatches = 0;
        for (int inst = 0; inst < 100; ++inst) {
            const std::size_t n = 1 + rng.next_u64() % 6;
            std::vector<double> a(n);
            std::vector<double> b(n);
            for (std::size_t i = 0; i < n; ++i) {
                // Coarse values so that ties occur.
                a[i] = std::round(4.0 * rng.normal()) / 2.0;
                b[i] = inst % 2 == 0 ? rng.normal() : std::round(4.0 * rng.normal()) / 2.0;
            }
            if (w2_empirical_1d(a, b) != w2_by_enumeration(a, b)) {
                ++mismatches;
            }
        }
        out.push_back({"w2_empirical_matches_enumeration", mismatches == 0,
                       std::to_string(mismatches) + " of 100 instances differ"});
    }
    {
        const double w = w2_gaussian(0.0, 1.0, 0.0, 4.0);
        out.push_back({"w2_gaussian_scale", w == 1.0, "w2(N(0,1), N(0,4)) = " + std::to_string(w)});
    }
    {
        constexpr std::size_t n = 1'000'000;
        RngStream ra = make_stream(seed, {tag, 1, 0});
        RngStream rb = make_stream(seed, {tag, 1, 1});
        std::vector<double> a(n);
        std::vector<double> b(n);
        ra.fill_normal(a);
        rb.fill_normal(b);
        for (double& x : b) {
            x *= 2.0;
        }
        const double emp = w2_empirical_1d(a, b);
        const double exact = w2_gaussian(0.0, 1.0, 0.0, 4.0);
        out.push_back({"w2_gaussian_vs_empirical", std::abs(emp - exact) <= 0.01,
                       "empirical " + std::to_string(emp) + " vs " + std::to_string(exact)});
    }
    for (double alpha : {1.0, 2.0}) {
        const std::vector<std::pair<double, double>> pts{{0.1, std::pow(0.1, alpha)}, {0.01, std::pow(0.01, alpha)}};
        const RateFit fit = fit_power_law(pts);
        out.push_back({"power_law_exponent_" + std::to_string(static_cast<int>(alpha)),
                       std::abs(fit.exponent - alpha) <= 1e-12 && std::abs(fit.r_squared - 1.0) <= 1e-12,
                       "exponent " + std::to_string(fit.exponent)});
    }
    return out;
}

}  // namespace uitlab
