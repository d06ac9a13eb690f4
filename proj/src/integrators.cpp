#include "uitlab/integrators.hpp"

#include <algorithm>

namespace uitlab {
namespace {

void require_dim(std::size_t expected, std::size_t got, const char* what) {
    if (expected != got) {
        throw InvalidArgument(std::string(what) + ": dimension mismatch");
    }
}

// 1 - 2(1 - e^{-a})/a + (1 - e^{-2a})/(2a); series below a = 1e-3.
double u_position_factor(double a) {
    if (a < 1e-3) {
        return a * a / 3.0 - a * a * a / 4.0 + 7.0 * a * a * a * a / 60.0;
    }
    return 1.0 + 2.0 * std::expm1(-a) / a - std::expm1(-2.0 * a) / (2.0 * a);
}

}  // namespace

void SdeModel::validate() const {
    if (dim == 0) {
        throw InvalidArgument("SdeModel: dim must be at least 1");
    }
    if (!drift) {
        throw InvalidArgument("SdeModel: drift is empty");
    }
    if (sigma.size() != dim * dim) {
        throw InvalidArgument("SdeModel: sigma must be dim x dim");
    }
}

void KineticModel::validate() const {
    if (dim == 0) {
        throw InvalidArgument("KineticModel: dim must be at least 1");
    }
    if (!grad_potential) {
        throw InvalidArgument("KineticModel: grad_potential is empty");
    }
    if (!(gamma > 0.0)) {
        throw InvalidArgument("KineticModel: gamma must be positive");
    }
}

Vector euler_step(const SdeModel& model, std::span<const double> x, double dt, std::span<const double> dW,
                  std::size_t step_index) {
    model.validate();
    require_dim(model.dim, x.size(), "euler_step");
    require_dim(model.dim, dW.size(), "euler_step");
    if (!(dt > 0.0)) {
        throw InvalidArgument("euler_step: dt must be positive");
    }
    Vector drift(model.dim);
    model.drift(x, drift);
    if (!all_finite(drift)) {
        throw NumericalBlowup(step_index);
    }
    Vector out(x.begin(), x.end());
    for (std::size_t i = 0; i < model.dim; ++i) {
        double noise = 0.0;
        for (std::size_t j = 0; j < model.dim; ++j) {
            noise += model.sigma[i * model.dim + j] * dW[j];
        }
        out[i] += drift[i] * dt + noise;
    }
    if (!all_finite(out)) {
        throw NumericalBlowup(step_index);
    }
    return out;
}

Vector exact_ou_step(const OuParams& p, std::span<const double> x, double dt, std::span<const double> xi) {
    if (!(p.theta > 0.0)) {
        throw InvalidArgument("exact_ou_step: theta must be positive");
    }
    if (dt < 0.0) {
        throw InvalidArgument("exact_ou_step: dt must be non-negative");
    }
    require_dim(x.size(), xi.size(), "exact_ou_step");
    if (!p.mean.empty()) {
        require_dim(x.size(), p.mean.size(), "exact_ou_step");
    }
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double m = p.mean.empty() ? 0.0 : p.mean[i];
        out[i] = exact_ou_step(p.theta, m, p.sigma, x[i], dt, xi[i]);
    }
    if (!all_finite(out)) {
        throw NumericalBlowup(0);
    }
    return out;
}

BrownianPairCovariance brownian_pair_covariance(double gamma, double s) {
    if (!(gamma > 0.0) || s < 0.0) {
        throw InvalidArgument("brownian_pair_covariance: need gamma > 0 and s >= 0");
    }
    return {-std::expm1(-2.0 * gamma * s) / (2.0 * gamma), -std::expm1(-gamma * s) / gamma, s};
}

BrownianPairSampler::BrownianPairSampler(double gamma, double s) : gamma_(gamma), s_(s) {
    const auto c = brownian_pair_covariance(gamma, s);
    l11_ = std::sqrt(c.var_weighted);
    l21_ = l11_ > 0.0 ? c.cov / l11_ : 0.0;
    l22_ = std::sqrt(std::max(0.0, c.var_increment - l21_ * l21_));
}

UStepCovariance u_step_covariance(double gamma, double s) {
    if (!(gamma > 0.0) || s < 0.0) {
        throw InvalidArgument("u_step_covariance: need gamma > 0 and s >= 0");
    }
    const double a = gamma * s;
    const double em1 = std::expm1(-a);
    return {-std::expm1(-2.0 * a), 2.0 * s * u_position_factor(a) / gamma, em1 * em1 / gamma};
}

UNoise u_noise_from_normals(const UStepCovariance& c, double z1, double z2) noexcept {
    if (!(c.var_v > 0.0)) {
        return {0.0, std::sqrt(std::max(0.0, c.var_x)) * z2};
    }
    const double sv = std::sqrt(c.var_v);
    const double lx1 = c.cov / sv;
    const double lx2 = std::sqrt(std::max(0.0, c.var_x - lx1 * lx1));
    return {sv * z1, lx1 * z1 + lx2 * z2};
}

PhasePoint ubu_step(const KineticModel& model, std::span<const double> x, std::span<const double> v, double h,
                    std::span<const double> normals, std::size_t step_index) {
    model.validate();
    require_dim(model.dim, x.size(), "ubu_step");
    require_dim(model.dim, v.size(), "ubu_step");
    require_dim(4 * model.dim, normals.size(), "ubu_step");
    if (h < 0.0) {
        throw InvalidArgument("ubu_step: h must be non-negative");
    }
    PhasePoint out{Vector(x.begin(), x.end()), Vector(v.begin(), v.end())};
    if (h == 0.0) {
        return out;
    }
    const auto cov = u_step_covariance(model.gamma, 0.5 * h);
    const std::size_t d = model.dim;
    std::vector<UNoise> first(d);
    std::vector<UNoise> second(d);
    for (std::size_t i = 0; i < d; ++i) {
        first[i] = u_noise_from_normals(cov, normals[2 * i], normals[2 * i + 1]);
        second[i] = u_noise_from_normals(cov, normals[2 * d + 2 * i], normals[2 * d + 2 * i + 1]);
    }
    Vector scratch(d);
    ubu_step_inplace(model.grad_potential, model.gamma, std::span<double>(out.x), std::span<double>(out.v), h,
                     first, second, scratch, step_index);
    return out;
}

PhasePoint leapfrog(const VectorField& grad_potential, std::span<const double> x, std::span<const double> v,
                    double eps, int n_steps) {
    if (n_steps < 1) {
        throw InvalidArgument("leapfrog: need at least one step");
    }
    if (eps < 0.0) {
        throw InvalidArgument("leapfrog: eps must be non-negative");
    }
    require_dim(x.size(), v.size(), "leapfrog");
    PhasePoint out{Vector(x.begin(), x.end()), Vector(v.begin(), v.end())};
    Vector scratch(x.size());
    leapfrog_inplace(grad_potential, std::span<double>(out.x), std::span<double>(out.v), eps, n_steps, scratch);
    return out;
}

Vector hmc_kernel_with_momentum(const VectorField& grad_potential, std::span<const double> x, double eps,
                                int n_steps, std::span<const double> momentum) {
    return leapfrog(grad_potential, x, momentum, eps, n_steps).x;
}

Vector hmc_kernel(const VectorField& grad_potential, std::span<const double> x, double eps, int n_steps,
                  RngStream& stream) {
    Vector momentum(x.size());
    stream.fill_normal(momentum);
    return hmc_kernel_with_momentum(grad_potential, x, eps, n_steps, momentum);
}

}  // namespace uitlab
