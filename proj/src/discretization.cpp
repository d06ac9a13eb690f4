#include "uitlab/discretization.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "replicas.hpp"
#include "uitlab/errors.hpp"
#include "uitlab/integrators.hpp"
#include "uitlab/stochastic_core.hpp"

namespace uitlab {
namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;

const std::uint64_t kUlaTag = experiment_tag("discretization/ula");
const std::uint64_t kUlaFloorTag = experiment_tag("discretization/ula-floor");
const std::uint64_t kUbuTag = experiment_tag("discretization/ubu");
const std::uint64_t kUbuFloorTag = experiment_tag("discretization/ubu-floor");
const std::uint64_t kHmcTag = experiment_tag("discretization/hmc");

constexpr std::size_t kDefaultUlaFactor = 64;
constexpr std::size_t kDefaultUbuFactor = 128;
constexpr double kFloorRatio = 5.0;

struct ChainPlan {
    std::size_t n_steps;
    std::vector<std::size_t> out_idx;
    std::vector<double> times;
};

ChainPlan chain_plan(double delta, double horizon, const DiscretizationOptions& opts) {
    if (!(delta > 0.0)) {
        throw InvalidArgument("step must be positive");
    }
    ChainPlan p;
    p.n_steps = steps_for(horizon, delta);
    if (p.n_steps > opts.max_steps) {
        throw BudgetExceeded("chain needs " + std::to_string(p.n_steps) + " steps, cap is " +
                             std::to_string(opts.max_steps));
    }
    p.out_idx = output_indices(p.n_steps, opts.n_out);
    p.times = detail::times_of(p.out_idx, delta);
    return p;
}

void check_reps(double horizon, std::size_t n_reps) {
    if (!(horizon > 0.0)) {
        throw InvalidArgument("horizon must be positive");
    }
    if (n_reps < 2) {
        throw InvalidArgument("need at least 2 replicas");
    }
}

double sup_of(const ErrorCurve& c) { return *std::max_element(c.values.begin(), c.values.end()); }

void apply_floor_rule(ErrorCurve& curve, const ErrorCurve& floor) {
    if (!(sup_of(curve) >= kFloorRatio * sup_of(floor))) {
        curve.flags.push_back("reference_floor");
    }
}

/// Walks the chain, calling step(k) for each transition and record(j) at
/// output points.
template <class Step, class Record>
void walk(const ChainPlan& plan, Step&& step, Record&& record) {
    std::size_t next = 0;
    for (std::size_t k = 0; k <= plan.n_steps; ++k) {
        if (k == plan.out_idx[next]) {
            record(next);
            if (++next == plan.out_idx.size()) {
                return;
            }
        }
        step(k);
    }
}

inline void check_finite(double a, double b, std::size_t step) {
    if (!std::isfinite(a) || !std::isfinite(b)) {
        throw NumericalBlowup(step);
    }
}

//---------------------------------------------------------------------------//
// ULA
//---------------------------------------------------------------------------//

ErrorCurve ula_fine_reference_floor(const PotentialSpec& pot, double delta, const ChainPlan& plan,
                                    std::size_t factor, std::size_t n_reps, std::uint64_t seed,
                                    const DiscretizationOptions& opts) {
    const double tau = delta / static_cast<double>(2 * factor);
    const double sqrt_tau = std::sqrt(tau);
    const double noise = opts.zero_noise ? 0.0 : kSqrt2;
    return detail::run_replicas(plan.times, n_reps, opts.threads, [&](std::size_t rep) {
        RngStream rng = make_stream(seed, {kUlaFloorTag, rep, 0});
        double coarse = opts.x0;
        double fine = opts.x0;
        std::vector<double> trace(plan.times.size());
        walk(
            plan,
            [&](std::size_t k) {
                for (std::size_t f = 0; f < factor; ++f) {
                    const double w1 = sqrt_tau * rng.normal();
                    const double w2 = sqrt_tau * rng.normal();
                    fine += -pot.grad(fine) * tau + noise * w1;
                    fine += -pot.grad(fine) * tau + noise * w2;
                    coarse += -pot.grad(coarse) * (2.0 * tau) + noise * (w1 + w2);
                }
                check_finite(coarse, fine, k);
            },
            [&](std::size_t j) { trace[j] = (coarse - fine) * (coarse - fine); });
        return trace;
    });
}

//---------------------------------------------------------------------------//
// UBU
//---------------------------------------------------------------------------//

struct KineticState {
    double x;
    double v;
};

/// Fine-interval Brownian pairs covering one coarse step: 2 * factor
/// intervals of length tau = delta / (2 factor).
struct FinePath {
    double gamma;
    double tau;
    double decay_tau;
    BrownianPairSampler sampler;
    std::vector<BrownianPair> pairs;

    FinePath(double gamma_, double tau_, std::size_t n)
        : gamma(gamma_), tau(tau_), decay_tau(std::exp(-gamma_ * tau_)), sampler(gamma_, tau_), pairs(n) {}

    void draw(RngStream& rng) {
        for (auto& p : pairs) {
            const double z1 = rng.normal();
            const double z2 = rng.normal();
            p = sampler(z1, z2);
        }
    }

    BrownianPair aggregate(std::size_t begin, std::size_t end) const noexcept {
        BrownianPair acc;
        for (std::size_t i = begin; i < end; ++i) {
            accumulate_pair(acc, pairs[i], decay_tau);
        }
        return acc;
    }
};

struct ScalarUbu {
    double gamma;
    double h;
    UFlowCoefficients half;

    ScalarUbu(double gamma_, double h_) : gamma(gamma_), h(h_), half(gamma_, 0.5 * h_) {}

    template <class Grad>
    void step(const Grad& grad, KineticState& s, const BrownianPair& first, const BrownianPair& second) const {
        half.apply(s.x, s.v, u_noise_from_path(gamma, first));
        s.v -= h * grad(s.x);
        half.apply(s.x, s.v, u_noise_from_path(gamma, second));
    }
};

/// Advances a UBU chain of step `sub` (a divisor of the coarse step) over one
/// coarse step whose path is split into `intervals` finest pieces.
template <class Grad>
void ubu_over(const Grad& grad, const ScalarUbu& ubu, const FinePath& path, std::size_t per_half,
              KineticState& s) {
    for (std::size_t i = 0; i < path.pairs.size(); i += 2 * per_half) {
        ubu.step(grad, s, path.aggregate(i, i + per_half), path.aggregate(i + per_half, i + 2 * per_half));
    }
}

/// Kinetic Euler with step 2 * tau * per_step over one coarse step.
template <class Grad>
void euler_over(const Grad& grad, double gamma, const FinePath& path, std::size_t per_step, KineticState& s) {
    const double h = path.tau * static_cast<double>(per_step);
    const double noise = std::sqrt(2.0 * gamma);
    for (std::size_t i = 0; i < path.pairs.size(); i += per_step) {
        double dB = 0.0;
        for (std::size_t j = i; j < i + per_step; ++j) {
            dB += path.pairs[j].increment;
        }
        const double x = s.x;
        s.x += h * s.v;
        s.v += h * (-grad(x) - gamma * s.v) + noise * dB;
    }
}

template <class Grad>
void reference_over(const Grad& grad, KineticReference kind, double gamma, const ScalarUbu& fine_ubu,
                     const FinePath& path, std::size_t per_half, KineticState& s) {
    if (kind == KineticReference::FineUbu) {
        ubu_over(grad, fine_ubu, path, per_half, s);
    } else {
        euler_over(grad, gamma, path, 2 * per_half, s);
    }
}

}  // namespace

PotentialSpec PotentialSpec::quadratic(double a) {
    PotentialSpec p{PotentialKind::Quadratic, a, 0.0};
    p.validate();
    return p;
}

PotentialSpec PotentialSpec::perturbed_quadratic(double a, double b) {
    PotentialSpec p{PotentialKind::PerturbedQuadratic, a, b};
    p.validate();
    return p;
}

void PotentialSpec::validate() const {
    if (!(a > 0.0)) {
        throw InvalidArgument("potential: a must be positive");
    }
    if (kind == PotentialKind::PerturbedQuadratic && !(std::abs(b) < a)) {
        throw InvalidArgument("potential: |b| < a is required for strong convexity");
    }
}

double PotentialSpec::value(double x) const noexcept {
    double u = 0.5 * a * x * x;
    if (kind == PotentialKind::PerturbedQuadratic) {
        u += b * std::log(std::cosh(x));
    }
    return u;
}

PotentialKind parse_potential_kind(std::string_view name) {
    if (name == "quadratic") return PotentialKind::Quadratic;
    if (name == "perturbed_quadratic") return PotentialKind::PerturbedQuadratic;
    throw InvalidArgument("unknown potential '" + std::string(name) + "'");
}

std::string_view to_string(PotentialKind k) noexcept {
    return k == PotentialKind::Quadratic ? "quadratic" : "perturbed_quadratic";
}

Scheme parse_scheme(std::string_view name) {
    if (name == "ula" || name == "ULA") return Scheme::ULA;
    if (name == "ubu" || name == "UBU") return Scheme::UBU;
    if (name == "hmc" || name == "HMC" || name == "hmc_unadjusted") return Scheme::HMC;
    throw InvalidArgument("unknown scheme '" + std::string(name) + "'");
}

std::string_view to_string(Scheme s) noexcept {
    switch (s) {
        case Scheme::ULA: return "ula";
        case Scheme::UBU: return "ubu";
        case Scheme::HMC: return "hmc";
    }
    return "unknown";
}

bool has_integer_inverse(double delta) noexcept {
    if (!(delta > 0.0) || !std::isfinite(delta)) {
        return false;
    }
    const double inv = 1.0 / delta;
    const double nearest = std::round(inv);
    return nearest >= 1.0 && std::abs(inv - nearest) <= 1e-9 * inv;
}

int leapfrog_steps(double flow_time, double eps) {
    if (!(eps > 0.0) || !(flow_time > 0.0)) {
        throw InvalidArgument("leapfrog_steps: flow time and eps must be positive");
    }
    const double n = std::round(flow_time / eps);
    if (n < 1.0) {
        throw InvalidArgument("leapfrog_steps: eps exceeds the flow time");
    }
    return static_cast<int>(n);
}

ErrorCurve ula_strong_error(const PotentialSpec& pot, double delta, double horizon, std::size_t n_reps,
                            std::uint64_t seed, const DiscretizationOptions& opts) {
    pot.validate();
    check_reps(horizon, n_reps);
    const ChainPlan plan = chain_plan(delta, horizon, opts);
    const double noise = opts.zero_noise ? 0.0 : kSqrt2;
    ErrorCurve curve;

    if (pot.kind == PotentialKind::Quadratic) {
        const BrownianPairSampler pair(pot.a, delta);
        const double decay = std::exp(-pot.a * delta);
        curve = detail::run_replicas(plan.times, n_reps, opts.threads, [&](std::size_t rep) {
            RngStream rng = make_stream(seed, {kUlaTag, rep, 0});
            double chain = opts.x0;
            double exact = opts.x0;
            std::vector<double> trace(plan.times.size());
            walk(
                plan,
                [&](std::size_t k) {
                    const double z1 = rng.normal();
                    const double z2 = rng.normal();
                    const BrownianPair p = pair(z1, z2);
                    chain += -pot.grad(chain) * delta + noise * p.increment;
                    exact = decay * exact + noise * p.weighted;
                    check_finite(chain, exact, k);
                },
                [&](std::size_t j) { trace[j] = (chain - exact) * (chain - exact); });
            return trace;
        });
    } else {
        const std::size_t factor = opts.reference_factor > 0 ? opts.reference_factor : kDefaultUlaFactor;
        const double tau = delta / static_cast<double>(factor);
        const double sqrt_tau = std::sqrt(tau);
        curve = detail::run_replicas(plan.times, n_reps, opts.threads, [&](std::size_t rep) {
            RngStream rng = make_stream(seed, {kUlaTag, rep, 0});
            double chain = opts.x0;
            double ref = opts.x0;
            std::vector<double> trace(plan.times.size());
            walk(
                plan,
                [&](std::size_t k) {
                    double dB = 0.0;
                    for (std::size_t f = 0; f < factor; ++f) {
                        const double w = sqrt_tau * rng.normal();
                        ref += -pot.grad(ref) * tau + noise * w;
                        dB += w;
                    }
                    chain += -pot.grad(chain) * delta + noise * dB;
                    check_finite(chain, ref, k);
                },
                [&](std::size_t j) { trace[j] = (chain - ref) * (chain - ref); });
            return trace;
        });
        if (opts.floor_reps > 0) {
            apply_floor_rule(curve, ula_fine_reference_floor(pot, delta, plan, factor,
                                                             std::max<std::size_t>(opts.floor_reps, 2), seed, opts));
        }
    }
    curve.meta = {"discretization/ula", delta, n_reps, seed};
    return curve;
}

ErrorCurve ubu_strong_error(const PotentialSpec& pot, double gamma, double delta, double horizon, std::size_t n_reps,
                            std::uint64_t seed, const DiscretizationOptions& opts) {
    pot.validate();
    check_reps(horizon, n_reps);
    if (!(gamma > 0.0)) {
        throw InvalidArgument("ubu_strong_error: gamma must be positive");
    }
    const ChainPlan plan = chain_plan(delta, horizon, opts);
    const std::size_t factor = opts.reference_factor > 0 ? opts.reference_factor : kDefaultUbuFactor;
    const bool flat = opts.zero_gradient;
    auto grad = [&pot, flat](double x) { return flat ? 0.0 : pot.grad(x); };

    const ScalarUbu coarse(gamma, delta);
    const ScalarUbu fine(gamma, delta / static_cast<double>(factor));
    const double tau = delta / static_cast<double>(2 * factor);

    ErrorCurve curve = detail::run_replicas(plan.times, n_reps, opts.threads, [&](std::size_t rep) {
        RngStream rng = make_stream(seed, {kUbuTag, rep, 0});
        FinePath path(gamma, tau, 2 * factor);
        KineticState chain{opts.x0, opts.v0};
        KineticState ref{opts.x0, opts.v0};
        std::vector<double> trace(plan.times.size());
        walk(
            plan,
            [&](std::size_t k) {
                path.draw(rng);
                reference_over(grad, opts.kinetic_reference, gamma, fine, path, 1, ref);
                ubu_over(grad, coarse, path, factor, chain);
                check_finite(chain.x + chain.v, ref.x + ref.v, k);
            },
            [&](std::size_t j) {
                const double dx = chain.x - ref.x;
                const double dv = chain.v - ref.v;
                trace[j] = dx * dx + dv * dv;
            });
        return trace;
    });
    curve.meta = {"discretization/ubu", delta, n_reps, seed};

    if (opts.floor_reps > 0) {
        const ScalarUbu finer(gamma, delta / static_cast<double>(2 * factor));
        const double tau2 = 0.5 * tau;
        ErrorCurve floor =
            detail::run_replicas(plan.times, std::max<std::size_t>(opts.floor_reps, 2), opts.threads,
                                 [&](std::size_t rep) {
                                     RngStream rng = make_stream(seed, {kUbuFloorTag, rep, 0});
                                     FinePath path(gamma, tau2, 4 * factor);
                                     KineticState a{opts.x0, opts.v0};
                                     KineticState b{opts.x0, opts.v0};
                                     std::vector<double> trace(plan.times.size());
                                     walk(
                                         plan,
                                         [&](std::size_t k) {
                                             path.draw(rng);
                                             reference_over(grad, opts.kinetic_reference, gamma, fine, path, 2, a);
                                             reference_over(grad, opts.kinetic_reference, gamma, finer, path, 1, b);
                                             check_finite(a.x + a.v, b.x + b.v, k);
                                         },
                                         [&](std::size_t j) {
                                             const double dx = a.x - b.x;
                                             const double dv = a.v - b.v;
                                             trace[j] = dx * dx + dv * dv;
                                         });
                                     return trace;
                                 });
        apply_floor_rule(curve, floor);
    }
    return curve;
}

ErrorCurve hmc_bias_curve(const PotentialSpec& pot, double eps, int n_leapfrog, std::size_t chain_len,
                          std::size_t n_reps, std::uint64_t seed, const DiscretizationOptions& opts) {
    pot.validate();
    if (pot.kind != PotentialKind::Quadratic) {
        throw InvalidArgument("hmc_bias_curve: the exact chain exists only for quadratic potentials");
    }
    if (n_leapfrog < 1 || eps < 0.0) {
        throw InvalidArgument("hmc_bias_curve: need L >= 1 and eps >= 0");
    }
    if (chain_len < 1 || n_reps < 2) {
        throw InvalidArgument("hmc_bias_curve: need chain_len >= 1 and n_reps >= 2");
    }
    const double omega = std::sqrt(pot.a);
    const double angle = omega * eps * n_leapfrog;
    const double k = std::round(angle / (0.5 * std::numbers::pi));
    if (k >= 1.0 && std::abs(angle - k * 0.5 * std::numbers::pi) < 1e-3) {
        throw InvalidArgument("hmc_bias_curve: flow angle is within 1e-3 of a multiple of pi/2");
    }
    const double c = std::cos(angle);
    const double s = std::sin(angle) / omega;

    const auto out_idx = output_indices(chain_len, opts.n_out);
    std::vector<double> times(out_idx.begin(), out_idx.end());
    const ChainPlan plan{chain_len, out_idx, times};
    auto grad = [&pot](std::span<const double> x, std::span<double> out) { out[0] = pot.grad(x[0]); };

    ErrorCurve curve = detail::run_replicas(plan.times, n_reps, opts.threads, [&](std::size_t rep) {
        RngStream rng = make_stream(seed, {kHmcTag, rep, 0});
        double exact = opts.x0;
        double approx = opts.x0;
        double scratch = 0.0;
        std::vector<double> trace(plan.times.size());
        walk(
            plan,
            [&](std::size_t) {
                const double momentum = rng.normal();
                exact = c * exact + s * momentum;
                double v = momentum;
                leapfrog_inplace(grad, std::span<double>(&approx, 1), std::span<double>(&v, 1), eps, n_leapfrog,
                                 std::span<double>(&scratch, 1));
            },
            [&](std::size_t j) { trace[j] = (exact - approx) * (exact - approx); });
        return trace;
    });
    curve.meta = {"discretization/hmc", eps, n_reps, seed};
    return curve;
}

ErrorCurve exact_hmc_variance(const PotentialSpec& pot, double flow_time, std::size_t chain_len, std::size_t n_reps,
                              std::uint64_t seed, const DiscretizationOptions& opts) {
    pot.validate();
    if (pot.kind != PotentialKind::Quadratic) {
        throw InvalidArgument("exact_hmc_variance: quadratic potentials only");
    }
    if (chain_len < 1 || n_reps < 2) {
        throw InvalidArgument("exact_hmc_variance: need chain_len >= 1 and n_reps >= 2");
    }
    const double omega = std::sqrt(pot.a);
    const double c = std::cos(omega * flow_time);
    const double s = std::sin(omega * flow_time) / omega;
    const auto out_idx = output_indices(chain_len, opts.n_out);
    std::vector<double> times(out_idx.begin(), out_idx.end());
    const ChainPlan plan{chain_len, out_idx, times};
    ErrorCurve curve = detail::run_replicas(plan.times, n_reps, opts.threads, [&](std::size_t rep) {
        RngStream rng = make_stream(seed, {kHmcTag, rep, 1});
        double x = rng.normal() / omega;
        std::vector<double> trace(plan.times.size());
        walk(
            plan, [&](std::size_t) { x = c * x + s * rng.normal(); }, [&](std::size_t j) { trace[j] = x * x; });
        return trace;
    });
    curve.meta = {"discretization/hmc_exact_variance", flow_time, n_reps, seed};
    return curve;
}

OrderResult order_from_curves(std::span<const double> steps, std::vector<ErrorCurve> curves) {
    if (steps.size() != curves.size()) {
        throw InvalidArgument("order_from_curves: one curve per step is required");
    }
    std::vector<std::pair<double, double>> sup_pts;
    std::vector<std::pair<double, double>> end_pts;
    for (std::size_t i = 0; i < curves.size(); ++i) {
        if (curves[i].flagged()) {
            throw FitFailure("order_from_curves: curve for step " + std::to_string(steps[i]) + " is flagged (" +
                             curves[i].flags.front() + ")");
        }
        sup_pts.emplace_back(steps[i], std::sqrt(sup_of(curves[i])));
        end_pts.emplace_back(steps[i], std::sqrt(curves[i].values.back()));
    }
    OrderResult out;
    out.sup_fit = fit_power_law(sup_pts);
    out.terminal_fit = fit_power_law(end_pts);
    out.curves = std::move(curves);
    return out;
}

OrderResult order_of_convergence(const SchemeId& scheme, const PotentialSpec& pot, std::span<const double> steps,
                                 double horizon, std::size_t n_reps, std::uint64_t seed,
                                 const DiscretizationOptions& opts) {
    std::vector<ErrorCurve> curves;
    curves.reserve(steps.size());
    for (double step : steps) {
        switch (scheme.scheme) {
            case Scheme::ULA:
                curves.push_back(ula_strong_error(pot, step, horizon, n_reps, seed, opts));
                break;
            case Scheme::UBU:
                curves.push_back(ubu_strong_error(pot, scheme.gamma, step, horizon, n_reps, seed, opts));
                break;
            case Scheme::HMC:
                curves.push_back(hmc_bias_curve(pot, step, leapfrog_steps(scheme.flow_time, step),
                                                static_cast<std::size_t>(std::llround(horizon)), n_reps, seed, opts));
                break;
        }
    }
    return order_from_curves(steps, std::move(curves));
}

}  // namespace uitlab
