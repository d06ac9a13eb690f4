#pragma once

#include <cstdint>

#include "uitlab/metrics.hpp"

namespace uitlab {

/// dX = -X dt + dW against dX^d = (-X^d + 1{t in [1/delta, 1/delta + 1]}) dt + dW,
/// integrated with Euler step h. Both window endpoints must be grid points.
struct AppendixModel {
    double delta = 0.1;
    double h = 0.01;

    double window_start() const noexcept { return 1.0 / delta; }
    double window_end() const noexcept { return 1.0 / delta + 1.0; }
    void validate() const;
};

/// Piecewise closed form of X^d_t - X_t as stated for this example:
/// 0 before the window, t - 1/delta inside, e^{-(t - 1/delta - 1)} after.
double analytic_error(double t, double delta);

/// Solution of d z = (-z + 1{window}) dt, z_0 = 0:
/// 0, then 1 - e^{-(t - 1/delta)}, then (1 - e^{-1}) e^{-(t - 1/delta - 1)}.
double exact_difference(double t, double delta);

struct CounterexampleOptions {
    double x0 = 0.0;
    /// Output every `stride` grid steps.
    std::size_t stride = 1;
};

/// |X^d - X| along the grid under shared increments. One replica; standard
/// errors are zero.
ErrorCurve simulate_counterexample(const AppendixModel& m, double horizon, std::uint64_t seed,
                                   const CounterexampleOptions& opts = {});

/// Euler solution of the difference equation itself on the same grid.
ErrorCurve integrate_difference(const AppendixModel& m, double horizon, const CounterexampleOptions& opts = {});

}  // namespace uitlab
