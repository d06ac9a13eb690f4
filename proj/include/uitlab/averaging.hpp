#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "uitlab/metrics.hpp"

namespace uitlab {

/// Slow-fast example
///   dX = (-X - r cos Y) dt + sqrt(2) dW
///   dY = delta^{-1} (-Y + r sin X) dt + sqrt(2 / delta) dB
struct SlowFastModel {
    double r = 1.0;
    double delta = 0.01;

    void validate() const;
};

/// Averaged slow dynamics dX = averaged_drift(X, r) dt + sqrt(2) dW.
struct AveragedModel {
    double r = 1.0;

    /// Global Lipschitz bound of the averaged drift, 1 + |r| e^{-1/2}.
    double lipschitz_bound() const noexcept;
    /// Synchronous-coupling contraction rate 1 - r e^{-1/2}.
    double contraction_rate_bound() const noexcept;
};

struct SlowFastState {
    double x = 0.0;
    double y = 0.0;
};

/// Largest r for which the contraction argument applies.
inline constexpr double kMaxContractiveR = 1.6487212707001282;  // e^{1/2}

inline constexpr double kDefaultStepBase = 1e-3;

/// min(h_base, delta / 20): resolves the fast relaxation time.
double coupled_step_size(double delta, double h_base = kDefaultStepBase);

/// Euler step of the slow-fast pair. Requires 0 < h <= delta / 20.
SlowFastState slowfast_step(const SlowFastModel& m, SlowFastState s, double h, double dW, double dB,
                            std::size_t step_index = 0);

/// -x - r e^{-1/2} cos(r sin x): the slow drift integrated against the frozen
/// invariant law N(r sin x, 1), using E cos Z = e^{-1/2} cos(m) for Z ~ N(m, 1).
double averaged_drift(double x, double r) noexcept;

struct AveragingOptions {
    double x0 = 0.0;
    double y0 = 0.0;
    double h_base = kDefaultStepBase;
    std::size_t n_out = 101;
    std::size_t threads = 0;
    /// Replicas used for the h vs h/2 floor estimate; 0 disables it.
    std::size_t floor_reps = 200;
};

/// E|X_t^delta - Xbar_t|^2 with the slow equation and the averaged equation
/// driven by the same W. When floor_reps > 0 the run also measures its own
/// discretisation floor and adds the flag "discretisation_floor" if the sup
/// error is not at least 5x the sup floor.
ErrorCurve simulate_strong_error(const SlowFastModel& m, double horizon, std::size_t n_reps, std::uint64_t seed,
                                 const AveragingOptions& opts = {});

/// E|X^h - X^{h/2}|^2 + E|Xbar^h - Xbar^{h/2}|^2 under shared increments.
ErrorCurve discretisation_floor(const SlowFastModel& m, double horizon, std::size_t n_reps, std::uint64_t seed,
                                const AveragingOptions& opts = {});

enum class TestFunction { Tanh, Cos, InverseQuadratic, Constant };

TestFunction parse_test_function(std::string_view name);
std::string_view to_string(TestFunction f) noexcept;
double evaluate(TestFunction f, double x) noexcept;

/// |E f(X_t^delta) - E f(Xbar_t)| under the synchronous coupling; standard
/// errors come from the paired differences.
ErrorCurve simulate_weak_error(const SlowFastModel& m, TestFunction f, double horizon, std::size_t n_reps,
                               std::uint64_t seed, const AveragingOptions& opts = {});

struct ContractionEstimate {
    RateFit fit;
    /// -slope / 2 of log E|X^1 - X^2|^2.
    double lambda = 0.0;
    ErrorCurve curve;
};

struct ContractionOptions {
    double h = kDefaultStepBase;
    std::size_t n_out = 101;
    std::size_t threads = 0;
};

/// Two copies of the averaged SDE from x0 and x0_prime with shared noise.
/// Integrated with the exponential Euler scheme, which is exact for the
/// linear part, so r = 0 recovers lambda = 1 to rounding.
ContractionEstimate estimate_contraction(const AveragedModel& model, double x0, double x0_prime, double horizon,
                                         std::size_t n_reps, std::uint64_t seed, const ContractionOptions& opts = {});

struct MomentTraces {
    ErrorCurve x_second_moment;
    ErrorCurve y_second_moment;
};

MomentTraces moment_trace(const SlowFastModel& m, double horizon, std::size_t n_reps, std::uint64_t seed,
                          const AveragingOptions& opts = {});

/// e^{-t} E|X_0|^2 + r^2 + 1.
double slow_moment_bound(double t, double x0_second_moment, double r) noexcept;
/// e^{-t/delta} E|Y_0|^2 + r^2 + 1.
double fast_moment_bound(double t, double y0_second_moment, double r, double delta) noexcept;

}  // namespace uitlab
