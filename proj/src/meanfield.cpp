#include "uitlab/meanfield.hpp"

#include <cmath>
#include <string>

#include "replicas.hpp"
#include "uitlab/errors.hpp"
#include "uitlab/integrators.hpp"
#include "uitlab/stochastic_core.hpp"

namespace uitlab {
namespace {

const std::uint64_t kPocTag = experiment_tag("meanfield/poc");
const std::uint64_t kProxyTag = experiment_tag("meanfield/proxy");

constexpr double kSqrt2 = 1.4142135623730951;

enum Role : std::uint64_t { kInitRole = 0, kNoiseRole = 1, kProxyInitRole = 2, kProxyNoiseRole = 3 };

double mean_of(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) {
        s += v;
    }
    return s / static_cast<double>(x.size());
}

double unbiased_variance(std::span<const double> x) {
    const double m = mean_of(x);
    double s = 0.0;
    for (double v : x) {
        s += (v - m) * (v - m);
    }
    return s / static_cast<double>(x.size() - 1);
}

/// x_i <- x_i + h drift_i + sqrt(2) dB_i for a whole ensemble.
void euler_update(std::span<double> x, std::span<const double> drift, double h, std::span<const double> dB,
                  std::size_t step_index) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] += h * drift[i] + kSqrt2 * dB[i];
    }
    if (!all_finite(x)) {
        throw NumericalBlowup(step_index);
    }
}

void drift_into(const ParticleModel& model, std::span<const double> x, std::span<double> out) {
    const std::size_t n = x.size();
    if (model.is_quadratic()) {
        const double a = *model.confinement;
        const double k = *model.kappa;
        const double m = mean_of(x);
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = -a * x[i] + k * (x[i] - m);
        }
        return;
    }
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            acc += model.grad_interact(x[i] - x[j]);
        }
        out[i] = -model.grad_confine(x[i]) + acc / static_cast<double>(n);
    }
}

/// Mean-field force on a point at y from an empirical measure.
double field_against(const ParticleModel& model, double y, std::span<const double> cloud, double cloud_mean) {
    if (model.kappa) {
        return *model.kappa * (y - cloud_mean);
    }
    double acc = 0.0;
    for (double c : cloud) {
        acc += model.grad_interact(y - c);
    }
    return acc / static_cast<double>(cloud.size());
}

std::size_t resolve_proxy_size(const ParticleModel& model, std::size_t requested) {
    const std::size_t m = requested == 0 ? 16 * model.n_particles : requested;
    if (m < 16 * model.n_particles) {
        throw ConfigError({"proxy ensemble size " + std::to_string(m) + " is below 16 x N = " +
                           std::to_string(16 * model.n_particles)});
    }
    return m;
}

void check_common(double horizon, double h, std::size_t n_out) {
    if (!(horizon > 0.0) || !(h > 0.0)) {
        throw InvalidArgument("horizon and step must be positive");
    }
    if (n_out < 2) {
        throw InvalidArgument("need at least two output points");
    }
}

}  // namespace

ParticleModel ParticleModel::quadratic(double a, double kappa, std::size_t n) {
    ParticleModel m;
    m.grad_confine = [a](double x) { return a * x; };
    m.grad_interact = [kappa](double z) { return kappa * z; };
    m.n_particles = n;
    m.confinement = a;
    m.kappa = kappa;
    m.validate();
    return m;
}

void ParticleModel::validate() const {
    if (n_particles < 2) {
        throw InvalidArgument("particle model: N >= 2 required");
    }
    if (dim != 1) {
        throw InvalidArgument("particle model: only dim = 1 is supported");
    }
    if (!grad_confine || !grad_interact) {
        throw InvalidArgument("particle model: both gradients must be set");
    }
    for (double z : {0.1, 0.5, 1.0, 2.0, 5.0}) {
        const double plus = grad_interact(z);
        const double minus = grad_interact(-z);
        if (std::abs(plus + minus) > 1e-12 * (1.0 + std::abs(plus))) {
            throw InvalidArgument("particle model: grad W must be odd");
        }
    }
    if (confinement && kappa && !(*kappa < *confinement)) {
        throw InvalidArgument("particle model: kappa < a is required");
    }
}

double Ensemble::mean() const {
    if (x.empty()) {
        throw InvalidArgument("ensemble is empty");
    }
    return mean_of(x);
}

double Ensemble::variance() const {
    if (x.size() < 2) {
        throw InvalidArgument("variance needs at least two particles");
    }
    return unbiased_variance(x);
}

void Ensemble::validate() const {
    if (!all_finite(x)) {
        throw InvalidArgument("ensemble has non-finite entries");
    }
}

std::vector<double> particle_drift(const ParticleModel& model, const Ensemble& ens) {
    std::vector<double> out(ens.size());
    drift_into(model, ens.x, out);
    if (!all_finite(out)) {
        throw NumericalBlowup(0);
    }
    return out;
}

std::vector<double> particle_drift_direct(const ParticleModel& model, const Ensemble& ens) {
    ParticleModel plain = model;
    plain.confinement.reset();
    plain.kappa.reset();
    return particle_drift(plain, ens);
}

void particle_euler_step(const ParticleModel& model, Ensemble& ens, double h, std::span<const double> dB,
                         std::size_t step_index) {
    if (dB.size() != ens.size()) {
        throw InvalidArgument("one increment per particle is required");
    }
    std::vector<double> drift(ens.size());
    drift_into(model, ens.x, drift);
    euler_update(ens.x, drift, h, dB, step_index);
    ens.t += h;
}

void GaussianClosure::validate() const {
    if (!(kappa < a)) {
        throw InvalidArgument("gaussian closure: kappa < a is required");
    }
    if (!(v0 >= 0.0)) {
        throw InvalidArgument("gaussian closure: v0 must be non-negative");
    }
}

LawMoments gaussian_closure_law(const GaussianClosure& g, double t) {
    g.validate();
    if (!(t >= 0.0)) {
        throw InvalidArgument("gaussian closure: t >= 0 required");
    }
    const double rate = g.a - g.kappa;
    const double v_inf = 1.0 / rate;
    return {g.m0 * std::exp(-g.a * t), v_inf + (g.v0 - v_inf) * std::exp(-2.0 * rate * t)};
}

PocTraces simulate_poc(const ParticleModel& model, double horizon, std::size_t n_reps, std::uint64_t seed,
                       const PocOptions& opts) {
    model.validate();
    check_common(horizon, opts.h, opts.n_out);
    if (n_reps < 2) {
        throw InvalidArgument("need at least 2 replicas");
    }
    if (opts.provider == LimitProvider::None) {
        throw ConfigError({"meanfield: no limit-law provider registered"});
    }
    if (opts.provider == LimitProvider::GaussianClosure && !model.is_quadratic()) {
        throw ConfigError({"meanfield: the Gaussian closure needs quadratic U and W"});
    }
    const std::size_t m_proxy =
        opts.provider == LimitProvider::Proxy ? resolve_proxy_size(model, opts.proxy_size) : 0;

    const std::size_t n = model.n_particles;
    const double h = opts.h;
    const double sqrt_h = std::sqrt(h);
    const double sd0 = std::sqrt(opts.v0);
    const std::size_t n_steps = steps_for(horizon, h);
    const auto out_idx = output_indices(n_steps, opts.n_out);
    const auto times = detail::times_of(out_idx, h);
    const std::size_t n_out = times.size();

    auto curves = detail::run_replicas(times, 3, n_reps, opts.threads, [&](std::size_t rep) {
        RngStream init = make_stream(seed, {kPocTag, rep, kInitRole});
        RngStream noise = make_stream(seed, {kPocTag, rep, kNoiseRole});
        std::vector<double> x(n);
        for (double& xi : x) {
            xi = opts.m0 + sd0 * init.normal();
        }
        std::vector<double> xb = x;
        std::vector<double> dB(n);
        std::vector<double> drift(n);
        std::vector<double> drift_b(n);

        std::vector<double> proxy(m_proxy);
        std::vector<double> proxy_dB(m_proxy);
        std::vector<double> proxy_drift(m_proxy);
        RngStream proxy_init = make_stream(seed, {kPocTag, rep, kProxyInitRole});
        RngStream proxy_noise = make_stream(seed, {kPocTag, rep, kProxyNoiseRole});
        for (double& p : proxy) {
            p = opts.m0 + sd0 * proxy_init.normal();
        }

        std::vector<double> trace(3 * n_out);
        std::size_t next = 0;
        for (std::size_t k = 0; k <= n_steps; ++k) {
            if (k == out_idx[next]) {
                double err = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    err += (xb[i] - x[i]) * (xb[i] - x[i]);
                }
                trace[next] = err / static_cast<double>(n);
                trace[n_out + next] = mean_of(x);
                trace[2 * n_out + next] = unbiased_variance(x);
                if (++next == n_out) {
                    break;
                }
            }
            for (double& d : dB) {
                d = sqrt_h * noise.normal();
            }
            drift_into(model, x, drift);
            if (opts.provider == LimitProvider::GaussianClosure) {
                const double a = *model.confinement;
                const double kap = *model.kappa;
                const double m_t = opts.m0 * std::exp(-a * static_cast<double>(k) * h);
                for (std::size_t i = 0; i < n; ++i) {
                    drift_b[i] = -a * xb[i] + kap * (xb[i] - m_t);
                }
            } else {
                const double cloud_mean = mean_of(proxy);
                for (std::size_t i = 0; i < n; ++i) {
                    drift_b[i] = -model.grad_confine(xb[i]) + field_against(model, xb[i], proxy, cloud_mean);
                }
                for (double& d : proxy_dB) {
                    d = sqrt_h * proxy_noise.normal();
                }
                drift_into(model, proxy, proxy_drift);
                euler_update(proxy, proxy_drift, h, proxy_dB, k);
            }
            euler_update(x, drift, h, dB, k);
            euler_update(xb, drift_b, h, dB, k);
        }
        return trace;
    });

    PocTraces out{std::move(curves[0]), std::move(curves[1]), std::move(curves[2])};
    const double sweep = static_cast<double>(n);
    out.error.meta = {"meanfield/poc", sweep, n_reps, seed};
    out.ensemble_mean.meta = {"meanfield/ensemble_mean", sweep, n_reps, seed};
    out.ensemble_variance.meta = {"meanfield/ensemble_variance", sweep, n_reps, seed};
    return out;
}

ErrorCurve simulate_poc_error(const ParticleModel& model, double horizon, std::size_t n_reps, std::uint64_t seed,
                              const PocOptions& opts) {
    return simulate_poc(model, horizon, n_reps, seed, opts).error;
}

ProxyLimitEnsemble proxy_limit_ensemble(const ParticleModel& model, std::size_t m, double horizon, std::uint64_t seed,
                                        const PocOptions& opts) {
    model.validate();
    check_common(horizon, opts.h, opts.n_out);
    ParticleModel proxy_model = model;
    const std::size_t size = resolve_proxy_size(model, m);
    proxy_model.n_particles = size;

    const double h = opts.h;
    const double sqrt_h = std::sqrt(h);
    const double sd0 = std::sqrt(opts.v0);
    const std::size_t n_steps = steps_for(horizon, h);
    const auto out_idx = output_indices(n_steps, opts.n_out);

    ProxyLimitEnsemble out;
    out.size = size;
    out.times = detail::times_of(out_idx, h);

    RngStream init = make_stream(seed, {kProxyTag, 0, kProxyInitRole});
    RngStream noise = make_stream(seed, {kProxyTag, 0, kProxyNoiseRole});
    std::vector<double> y(size);
    for (double& v : y) {
        v = opts.m0 + sd0 * init.normal();
    }
    std::vector<double> dB(size);
    std::vector<double> drift(size);
    std::size_t next = 0;
    for (std::size_t k = 0; k <= n_steps; ++k) {
        if (k == out_idx[next]) {
            out.means.push_back(mean_of(y));
            out.variances.push_back(unbiased_variance(y));
            out.snapshots.push_back(y);
            if (++next == out_idx.size()) {
                break;
            }
        }
        for (double& d : dB) {
            d = sqrt_h * noise.normal();
        }
        drift_into(proxy_model, y, drift);
        euler_update(y, drift, h, dB, k);
    }
    return out;
}

}  // namespace uitlab
