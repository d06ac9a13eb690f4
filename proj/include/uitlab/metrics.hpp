#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace uitlab {

struct CurveMeta {
    std::string label;
    /// delta, N, or whatever the sweep runs over.
    double sweep_value = std::numeric_limits<double>::quiet_NaN();
    std::size_t n_reps = 0;
    std::uint64_t seed = 0;
};

/// Time-indexed Monte Carlo estimates with standard errors.
struct ErrorCurve {
    std::vector<double> times;
    std::vector<double> values;
    std::vector<double> std_errors;
    CurveMeta meta;
    /// Machine-readable reasons this curve must not be reported as clean.
    std::vector<std::string> flags;

    std::size_t size() const noexcept { return times.size(); }
    bool flagged() const noexcept { return !flags.empty(); }
    /// Throws InvalidArgument unless the three lists have equal length.
    void validate() const;
};

struct Window {
    double lo;
    double hi;
};

struct RateFit {
    double exponent = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t n_points = 0;
};

struct MeanSe {
    double mean = 0.0;
    double std_error = 0.0;
};

/// Sample mean and s/sqrt(n), with compensated summation. Needs n >= 2.
MeanSe mean_and_se(std::span<const double> samples);

/// Reduces per-replica traces (rows = replicas, columns = times) in replica
/// order into a curve of means and standard errors.
ErrorCurve curve_from_samples(std::vector<double> times, const std::vector<std::vector<double>>& per_rep);

/// Exact W2 between two equal-size empirical measures on the line.
double w2_empirical_1d(std::span<const double> a, std::span<const double> b);

/// W2 between N(m1, v1) and N(m2, v2).
double w2_gaussian(double m1, double v1, double m2, double v2);

/// Least squares of log(value) on log(scale); exponent is the slope.
RateFit fit_power_law(std::span<const std::pair<double, double>> points);

/// Least squares of log(value) on t inside the window; exponent = -slope.
/// Only points with value > 10 * std_error count; fewer than 3 is a FitFailure.
RateFit fit_exp_decay(const ErrorCurve& curve, Window window);

/// max over `late` divided by max over `early`. Returns 1 when both maxima
/// are zero and +inf when only the early one is.
double plateau_stat(const ErrorCurve& curve, Window early, Window late);

/// Largest value with lo <= t <= hi; InvalidArgument on an empty window.
double window_max(const ErrorCurve& curve, Window window);

/// Standard error attached to the point that attains window_max.
double window_argmax_se(const ErrorCurve& curve, Window window);

/// Minimum over all n! matchings; n <= 8.
double w2_by_enumeration(std::span<const double> a, std::span<const double> b);

struct SelftestCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

/// Exhaustive small-n checks of the estimators above.
std::vector<SelftestCheck> metrics_selftest(std::uint64_t seed);

}  // namespace uitlab
