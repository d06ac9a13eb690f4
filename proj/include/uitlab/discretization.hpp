#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "uitlab/metrics.hpp"

namespace uitlab {

enum class PotentialKind { Quadratic, PerturbedQuadratic };

/// U(x) = a x^2 / 2, optionally + b log cosh(x). Needs a > 0 and |b| < a so
/// that U'' >= a - |b| > 0.
struct PotentialSpec {
    PotentialKind kind = PotentialKind::Quadratic;
    double a = 1.0;
    double b = 0.0;

    static PotentialSpec quadratic(double a);
    static PotentialSpec perturbed_quadratic(double a, double b);

    void validate() const;
    double value(double x) const noexcept;
    double grad(double x) const noexcept { return a * x + (kind == PotentialKind::Quadratic ? 0.0 : b * std::tanh(x)); }
};

PotentialKind parse_potential_kind(std::string_view name);
std::string_view to_string(PotentialKind k) noexcept;

enum class Scheme { ULA, UBU, HMC };

Scheme parse_scheme(std::string_view name);
std::string_view to_string(Scheme s) noexcept;

/// A scheme plus its fixed parameters. The step (delta, or eps for HMC) is
/// supplied per sweep item.
struct SchemeId {
    Scheme scheme = Scheme::ULA;
    double gamma = 1.0;
    /// HMC integration time eps * L, held fixed while eps varies.
    double flow_time = 1.0;
};

enum class KineticReference { FineUbu, FineEuler };

struct DiscretizationOptions {
    double x0 = 0.0;
    double v0 = 0.0;
    std::size_t n_out = 101;
    std::size_t threads = 0;
    /// Replicas for the reference self-error estimate; 0 skips it.
    std::size_t floor_reps = 100;
    /// 0 picks the default (64 for ULA, 128 for UBU).
    std::size_t reference_factor = 0;
    KineticReference kinetic_reference = KineticReference::FineUbu;
    std::uint64_t max_steps = 10'000'000;
    /// Test hooks.
    bool zero_noise = false;
    bool zero_gradient = false;
};

/// E|X_{l delta} - ULA_l|^2 at chain times. The reference is the exact OU
/// transition for a quadratic potential and fine Euler otherwise, in both
/// cases driven by the same Brownian path as the chain.
ErrorCurve ula_strong_error(const PotentialSpec& pot, double delta, double horizon, std::size_t n_reps,
                            std::uint64_t seed, const DiscretizationOptions& opts = {});

/// Joint squared (x, v) error of UBU against a fine-step reference sharing
/// the Brownian path, at chain times.
ErrorCurve ubu_strong_error(const PotentialSpec& pot, double gamma, double delta, double horizon, std::size_t n_reps,
                            std::uint64_t seed, const DiscretizationOptions& opts = {});

/// Unadjusted HMC (leapfrog) against the exact-flow chain with identical
/// momentum refreshes; quadratic potentials only. Times are chain indices.
ErrorCurve hmc_bias_curve(const PotentialSpec& pot, double eps, int n_leapfrog, std::size_t chain_len,
                          std::size_t n_reps, std::uint64_t seed, const DiscretizationOptions& opts = {});

/// Position variance across replicas of the exact-flow HMC chain (no leapfrog).
ErrorCurve exact_hmc_variance(const PotentialSpec& pot, double flow_time, std::size_t chain_len, std::size_t n_reps,
                              std::uint64_t seed, const DiscretizationOptions& opts = {});

struct OrderResult {
    RateFit sup_fit;
    RateFit terminal_fit;
    std::vector<ErrorCurve> curves;
};

/// Fits RMS error (sqrt of sup, and of the terminal value, of each squared
/// error curve) against the step. Any flagged curve is a FitFailure.
OrderResult order_from_curves(std::span<const double> steps, std::vector<ErrorCurve> curves);

/// Runs the matching strong-error experiment at every step and fits the order.
OrderResult order_of_convergence(const SchemeId& scheme, const PotentialSpec& pot, std::span<const double> steps,
                                 double horizon, std::size_t n_reps, std::uint64_t seed,
                                 const DiscretizationOptions& opts = {});

/// Leapfrog count for a fixed flow time: round(flow_time / eps).
int leapfrog_steps(double flow_time, double eps);

/// True when 1/delta is a positive integer (to 1e-9 relative).
bool has_integer_inverse(double delta) noexcept;

}  // namespace uitlab
