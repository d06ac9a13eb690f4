#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "uitlab/errors.hpp"
#include "uitlab/stochastic_core.hpp"

namespace uitlab {

using Vector = std::vector<double>;

/// out = f(x). Both spans have the model dimension.
using VectorField = std::function<void(std::span<const double>, std::span<double>)>;

/// dX = drift(X) dt + sigma dW with a constant dim x dim diffusion (row-major).
struct SdeModel {
    std::size_t dim = 1;
    VectorField drift;
    std::vector<double> sigma;
    std::string label;

    void validate() const;
};

/// Kinetic Langevin: dX = V dt, dV = -grad U(X) dt - gamma V dt + sqrt(2 gamma) dB.
struct KineticModel {
    std::size_t dim = 1;
    VectorField grad_potential;
    double gamma = 1.0;

    void validate() const;
};

struct OuParams {
    double theta = 1.0;
    std::vector<double> mean;
    double sigma = 1.0;
};

struct PhasePoint {
    Vector x;
    Vector v;
};

inline bool all_finite(std::span<const double> xs) noexcept {
    for (double x : xs) {
        if (!std::isfinite(x)) {
            return false;
        }
    }
    return true;
}

//---------------------------------------------------------------------------//
// Euler-Maruyama and exact OU
//---------------------------------------------------------------------------//

Vector euler_step(const SdeModel& model, std::span<const double> x, double dt, std::span<const double> dW,
                  std::size_t step_index = 0);

Vector exact_ou_step(const OuParams& p, std::span<const double> x, double dt, std::span<const double> xi);

/// Scalar form of the exact OU transition.
inline double exact_ou_step(double theta, double mean, double sigma, double x, double dt, double xi) noexcept {
    const double decay = std::exp(-theta * dt);
    const double sd = sigma * std::sqrt(-std::expm1(-2.0 * theta * dt) / (2.0 * theta));
    return mean + decay * (x - mean) + sd * xi;
}

//---------------------------------------------------------------------------//
// Brownian functionals of an OU flow over an interval of length s.
//
// weighted  = int_0^s exp(-gamma (s - u)) dB(u)
// increment = B(s) - B(0)
//
// These two jointly Gaussian quantities are all an exact OU/U-flow step
// needs, and they aggregate exactly across consecutive sub-intervals:
// weighted <- exp(-gamma tau) * weighted + weighted_j.
//---------------------------------------------------------------------------//

struct BrownianPair {
    double weighted = 0.0;
    double increment = 0.0;
};

struct BrownianPairCovariance {
    double var_weighted;
    double cov;
    double var_increment;
};

BrownianPairCovariance brownian_pair_covariance(double gamma, double s);

/// Samples the pair from two standard normals via its Cholesky factor.
class BrownianPairSampler {
  public:
    BrownianPairSampler(double gamma, double s);

    BrownianPair operator()(double z1, double z2) const noexcept {
        return {l11_ * z1, l21_ * z1 + l22_ * z2};
    }
    double gamma() const noexcept { return gamma_; }
    double interval() const noexcept { return s_; }

  private:
    double gamma_;
    double s_;
    double l11_;
    double l21_;
    double l22_;
};

/// Appends a sub-interval of length tau to a running pair.
inline void accumulate_pair(BrownianPair& acc, const BrownianPair& next, double decay_tau) noexcept {
    acc.weighted = decay_tau * acc.weighted + next.weighted;
    acc.increment += next.increment;
}

//---------------------------------------------------------------------------//
// UBU splitting for kinetic Langevin
//---------------------------------------------------------------------------//

/// Noise injected by an exact U-flow over time s:
/// eta_v = sqrt(2 gamma) int e^{-gamma(s-u)} dB,
/// eta_x = sqrt(2 gamma) int (1 - e^{-gamma(s-u)}) / gamma dB.
struct UNoise {
    double eta_v = 0.0;
    double eta_x = 0.0;
};

struct UStepCovariance {
    double var_v;
    double var_x;
    double cov;
};

UStepCovariance u_step_covariance(double gamma, double s);

UNoise u_noise_from_normals(const UStepCovariance& c, double z1, double z2) noexcept;

inline UNoise u_noise_from_path(double gamma, const BrownianPair& p) noexcept {
    const double scale = std::sqrt(2.0 * gamma);
    return {scale * p.weighted, scale * (p.increment - p.weighted) / gamma};
}

/// Deterministic part of the U-flow over time s: v decays by e^{-gamma s},
/// x advances by (1 - e^{-gamma s}) / gamma * v.
struct UFlowCoefficients {
    double decay;
    double drift;

    UFlowCoefficients(double gamma, double s) noexcept
        : decay(std::exp(-gamma * s)), drift(-std::expm1(-gamma * s) / gamma) {}

    void apply(double& x, double& v, const UNoise& n) const noexcept {
        x += drift * v + n.eta_x;
        v = decay * v + n.eta_v;
    }
};

/// Exact U-flow over time s for each coordinate.
inline void u_flow(const UFlowCoefficients& c, std::span<double> x, std::span<double> v,
                   std::span<const UNoise> noise) noexcept {
    for (std::size_t i = 0; i < x.size(); ++i) {
        c.apply(x[i], v[i], noise[i]);
    }
}

inline void u_flow(double gamma, double s, std::span<double> x, std::span<double> v,
                   std::span<const UNoise> noise) noexcept {
    u_flow(UFlowCoefficients(gamma, s), x, v, noise);
}

/// One UBU step of size h: U(h/2), kick v -= h grad U(x), U(h/2).
/// `grad` is any callable (span<const double> x, span<double> out).
template <class Grad>
void ubu_step_inplace(const Grad& grad, double gamma, std::span<double> x, std::span<double> v, double h,
                      std::span<const UNoise> first, std::span<const UNoise> second, std::span<double> scratch,
                      std::size_t step_index = 0) {
    if (h == 0.0) {
        return;
    }
    const UFlowCoefficients half(gamma, 0.5 * h);
    u_flow(half, x, v, first);
    grad(std::span<const double>(x.data(), x.size()), scratch);
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] -= h * scratch[i];
    }
    u_flow(half, x, v, second);
    if (!all_finite(x) || !all_finite(v)) {
        throw NumericalBlowup(step_index);
    }
}

/// `normals` holds 4*dim standard normals: (z1, z2) for every coordinate of the
/// first half-step, then the same for the second half-step.
PhasePoint ubu_step(const KineticModel& model, std::span<const double> x, std::span<const double> v, double h,
                    std::span<const double> normals, std::size_t step_index = 0);

//---------------------------------------------------------------------------//
// Leapfrog and unadjusted HMC
//---------------------------------------------------------------------------//

template <class Grad>
void leapfrog_inplace(const Grad& grad, std::span<double> x, std::span<double> v, double eps, int n_steps,
                      std::span<double> scratch) {
    for (int l = 0; l < n_steps; ++l) {
        grad(std::span<const double>(x.data(), x.size()), scratch);
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] -= 0.5 * eps * scratch[i];
            x[i] += eps * v[i];
        }
        grad(std::span<const double>(x.data(), x.size()), scratch);
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] -= 0.5 * eps * scratch[i];
        }
    }
    if (!all_finite(x) || !all_finite(v)) {
        throw NumericalBlowup(static_cast<std::size_t>(n_steps));
    }
}

PhasePoint leapfrog(const VectorField& grad_potential, std::span<const double> x, std::span<const double> v,
                    double eps, int n_steps);

/// Unadjusted HMC transition: fresh N(0, I) momentum, leapfrog, no accept/reject.
Vector hmc_kernel(const VectorField& grad_potential, std::span<const double> x, double eps, int n_steps,
                  RngStream& stream);

/// HMC transition with a caller-supplied momentum instead of a fresh draw.
Vector hmc_kernel_with_momentum(const VectorField& grad_potential, std::span<const double> x, double eps,
                                int n_steps, std::span<const double> momentum);

}  // namespace uitlab
