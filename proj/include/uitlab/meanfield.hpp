#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "uitlab/metrics.hpp"

namespace uitlab {

using ScalarField = std::function<double(double)>;

/// N particles on the line:
///   dX^i = (-U'(X^i) + N^{-1} sum_j W'(X^i - X^j)) dt + sqrt(2) dB^i.
struct ParticleModel {
    ScalarField grad_confine;
    ScalarField grad_interact;
    std::size_t n_particles = 2;
    std::size_t dim = 1;
    /// Set when U'(x) = a x and W'(z) = kappa z. Enables the O(N) drift and
    /// the Gaussian closure.
    std::optional<double> confinement;
    std::optional<double> kappa;

    static ParticleModel quadratic(double a, double kappa, std::size_t n);

    bool is_quadratic() const noexcept { return confinement.has_value() && kappa.has_value(); }
    void validate() const;
};

struct Ensemble {
    std::vector<double> x;
    double t = 0.0;

    std::size_t size() const noexcept { return x.size(); }
    double mean() const;
    /// Unbiased sample variance (divides by N - 1).
    double variance() const;
    void validate() const;
};

std::vector<double> particle_drift(const ParticleModel& model, const Ensemble& ens);

/// The O(N^2) sum, whatever the model's shortcuts.
std::vector<double> particle_drift_direct(const ParticleModel& model, const Ensemble& ens);

/// Euler step with caller-supplied Brownian increments, one per particle.
void particle_euler_step(const ParticleModel& model, Ensemble& ens, double h, std::span<const double> dB,
                         std::size_t step_index = 0);

struct GaussianClosure {
    double kappa = 0.5;
    double a = 1.0;
    double m0 = 1.0;
    double v0 = 0.5;

    void validate() const;
};

struct LawMoments {
    double mean;
    double variance;
};

/// Mean m0 e^{-a t}; variance 1/(a - kappa) + (v0 - 1/(a - kappa)) e^{-2 (a - kappa) t}.
LawMoments gaussian_closure_law(const GaussianClosure& g, double t);

enum class LimitProvider { None, GaussianClosure, Proxy };

struct PocOptions {
    double h = 1e-3;
    double m0 = 1.0;
    double v0 = 0.5;
    std::size_t n_out = 101;
    std::size_t threads = 0;
    LimitProvider provider = LimitProvider::None;
    /// Proxy ensemble size; 0 means 16 N.
    std::size_t proxy_size = 0;
};

struct PocTraces {
    /// N^{-1} sum_i E|Xbar^i - X^{i,N}|^2.
    ErrorCurve error;
    /// Empirical mean and unbiased variance of the interacting ensemble.
    ErrorCurve ensemble_mean;
    ErrorCurve ensemble_variance;
};

/// Couples the particle system with N independent copies of the nonlinear
/// process: same initial points drawn from N(m0, v0), same Brownian motion per
/// index.
PocTraces simulate_poc(const ParticleModel& model, double horizon, std::size_t n_reps, std::uint64_t seed,
                       const PocOptions& opts);

ErrorCurve simulate_poc_error(const ParticleModel& model, double horizon, std::size_t n_reps, std::uint64_t seed,
                              const PocOptions& opts);

/// Moments of a large interacting ensemble standing in for the limit law.
struct ProxyLimitEnsemble {
    std::size_t size = 0;
    std::vector<double> times;
    std::vector<double> means;
    std::vector<double> variances;
    /// Particle positions at each output time, size() entries per time.
    std::vector<std::vector<double>> snapshots;
};

/// Requires M >= 16 * model.n_particles; otherwise ConfigError.
ProxyLimitEnsemble proxy_limit_ensemble(const ParticleModel& model, std::size_t m, double horizon, std::uint64_t seed,
                                        const PocOptions& opts = {});

}  // namespace uitlab
