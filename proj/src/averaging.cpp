#include "uitlab/averaging.hpp"

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

const double kInvSqrtE = std::exp(-0.5);
constexpr double kSqrt2 = std::numbers::sqrt2;

enum Role : std::uint64_t { kSlowNoise = 0, kFastNoise = 1 };

const std::uint64_t kStrongTag = experiment_tag("averaging/strong");
const std::uint64_t kFloorTag = experiment_tag("averaging/floor");
const std::uint64_t kMomentTag = experiment_tag("averaging/moment");
const std::uint64_t kContractionTag = experiment_tag("averaging/contraction");

struct SlowFastKernel {
    double r;
    double inv_delta;
    double fast_noise;  // sqrt(2 / delta)

    explicit SlowFastKernel(const SlowFastModel& m)
        : r(m.r), inv_delta(1.0 / m.delta), fast_noise(std::sqrt(2.0 / m.delta)) {}

    void step(double& x, double& y, double h, double dW, double dB) const noexcept {
        const double nx = x + (-x - r * std::cos(y)) * h + kSqrt2 * dW;
        const double ny = y + inv_delta * (-y + r * std::sin(x)) * h + fast_noise * dB;
        x = nx;
        y = ny;
    }
};

inline double averaged_step(double x, double r, double h, double dW) noexcept {
    return x + averaged_drift(x, r) * h + kSqrt2 * dW;
}

inline void check_finite(double a, double b, std::size_t step) {
    if (!std::isfinite(a) || !std::isfinite(b)) {
        throw NumericalBlowup(step);
    }
}

void check_run(double horizon, std::size_t n_reps, std::size_t min_reps) {
    if (!(horizon > 0.0)) {
        throw InvalidArgument("horizon must be positive");
    }
    if (n_reps < min_reps) {
        throw InvalidArgument("n_reps must be at least " + std::to_string(min_reps));
    }
}

struct Plan {
    double h;
    std::size_t n_steps;
    std::vector<std::size_t> out_idx;
    std::vector<double> times;
};

Plan make_plan(double h, double horizon, std::size_t n_out) {
    Plan p;
    p.h = h;
    p.n_steps = steps_for(horizon, h);
    p.out_idx = output_indices(p.n_steps, n_out);
    p.times = detail::times_of(p.out_idx, h);
    return p;
}

/// Runs the coupled slow-fast / averaged pair and hands (x, y, xbar) at each
/// output point to `record`.
template <class Record>
void coupled_path(const SlowFastModel& m, const Plan& plan, const AveragingOptions& opts, std::uint64_t seed,
                  std::uint64_t tag, std::size_t rep, Record&& record) {
    const SlowFastKernel kernel(m);
    RngStream w = make_stream(seed, {tag, rep, kSlowNoise});
    RngStream b = make_stream(seed, {tag, rep, kFastNoise});
    const double sqrt_h = std::sqrt(plan.h);
    double x = opts.x0;
    double y = opts.y0;
    double xbar = opts.x0;
    std::size_t next = 0;
    for (std::size_t k = 0; k <= plan.n_steps; ++k) {
        if (k == plan.out_idx[next]) {
            record(next, x, y, xbar);
            if (++next == plan.out_idx.size()) {
                break;
            }
        }
        const double dW = sqrt_h * w.normal();
        const double dB = sqrt_h * b.normal();
        kernel.step(x, y, plan.h, dW, dB);
        xbar = averaged_step(xbar, m.r, plan.h, dW);
        check_finite(x + y, xbar, k);
    }
}

}  // namespace

void SlowFastModel::validate() const {
    if (!(delta > 0.0) || !std::isfinite(delta)) {
        throw InvalidArgument("SlowFastModel: delta must be positive");
    }
    if (!std::isfinite(r)) {
        throw InvalidArgument("SlowFastModel: r must be finite");
    }
}

double AveragedModel::lipschitz_bound() const noexcept { return 1.0 + std::abs(r) * kInvSqrtE; }

double AveragedModel::contraction_rate_bound() const noexcept { return 1.0 - r * kInvSqrtE; }

double coupled_step_size(double delta, double h_base) {
    if (!(delta > 0.0) || !(h_base > 0.0)) {
        throw InvalidArgument("coupled_step_size: delta and h_base must be positive");
    }
    return std::min(h_base, delta / 20.0);
}

SlowFastState slowfast_step(const SlowFastModel& m, SlowFastState s, double h, double dW, double dB,
                            std::size_t step_index) {
    m.validate();
    if (!(h > 0.0)) {
        throw InvalidArgument("slowfast_step: h must be positive");
    }
    if (h > m.delta / 20.0 * (1.0 + 1e-12)) {
        throw InvalidArgument("slowfast_step: step exceeds delta / 20");
    }
    SlowFastKernel(m).step(s.x, s.y, h, dW, dB);
    check_finite(s.x, s.y, step_index);
    return s;
}

double averaged_drift(double x, double r) noexcept { return -x - r * kInvSqrtE * std::cos(r * std::sin(x)); }

ErrorCurve simulate_strong_error(const SlowFastModel& m, double horizon, std::size_t n_reps, std::uint64_t seed,
                                 const AveragingOptions& opts) {
    m.validate();
    check_run(horizon, n_reps, 100);
    const Plan plan = make_plan(coupled_step_size(m.delta, opts.h_base), horizon, opts.n_out);
    ErrorCurve curve = detail::run_replicas(plan.times, n_reps, opts.threads, [&](std::size_t rep) {
        std::vector<double> trace(plan.times.size());
        coupled_path(m, plan, opts, seed, kStrongTag, rep, [&](std::size_t j, double x, double, double xbar) {
            const double d = x - xbar;
            trace[j] = d * d;
        });
        return trace;
    });
    curve.meta = {"averaging/strong", m.delta, n_reps, seed};
    if (opts.floor_reps > 0) {
        const ErrorCurve floor = discretisation_floor(m, horizon, std::max<std::size_t>(opts.floor_reps, 2), seed, opts);
        const double sup_err = *std::max_element(curve.values.begin(), curve.values.end());
        const double sup_floor = *std::max_element(floor.values.begin(), floor.values.end());
        if (!(sup_err >= 5.0 * sup_floor)) {
            curve.flags.push_back("discretisation_floor");
        }
    }
    return curve;
}

ErrorCurve discretisation_floor(const SlowFastModel& m, double horizon, std::size_t n_reps, std::uint64_t seed,
                                const AveragingOptions& opts) {
    m.validate();
    check_run(horizon, n_reps, 2);
    const Plan plan = make_plan(coupled_step_size(m.delta, opts.h_base), horizon, opts.n_out);
    const double h = plan.h;
    const double hf = 0.5 * h;
    const double sqrt_hf = std::sqrt(hf);
    const SlowFastKernel kernel(m);
    ErrorCurve curve = detail::run_replicas(plan.times, n_reps, opts.threads, [&](std::size_t rep) {
        RngStream w = make_stream(seed, {kFloorTag, rep, kSlowNoise});
        RngStream b = make_stream(seed, {kFloorTag, rep, kFastNoise});
        double x = opts.x0, y = opts.y0, xbar = opts.x0;
        double xf = opts.x0, yf = opts.y0, xbarf = opts.x0;
        std::vector<double> trace(plan.times.size());
        std::size_t next = 0;
        for (std::size_t k = 0; k <= plan.n_steps; ++k) {
            if (k == plan.out_idx[next]) {
                const double dx = x - xf;
                const double db = xbar - xbarf;
                trace[next] = dx * dx + db * db;
                if (++next == plan.out_idx.size()) {
                    break;
                }
            }
            double dW = 0.0;
            double dB = 0.0;
            for (int half = 0; half < 2; ++half) {
                const double w1 = sqrt_hf * w.normal();
                const double b1 = sqrt_hf * b.normal();
                kernel.step(xf, yf, hf, w1, b1);
                xbarf = averaged_step(xbarf, m.r, hf, w1);
                dW += w1;
                dB += b1;
            }
            kernel.step(x, y, h, dW, dB);
            xbar = averaged_step(xbar, m.r, h, dW);
            check_finite(x + y + xbar, xf + yf + xbarf, k);
        }
        return trace;
    });
    curve.meta = {"averaging/floor", m.delta, n_reps, seed};
    return curve;
}

TestFunction parse_test_function(std::string_view name) {
    if (name == "tanh") return TestFunction::Tanh;
    if (name == "cos") return TestFunction::Cos;
    if (name == "inverse_quadratic") return TestFunction::InverseQuadratic;
    if (name == "constant") return TestFunction::Constant;
    throw InvalidArgument("unknown test function '" + std::string(name) + "'");
}

std::string_view to_string(TestFunction f) noexcept {
    switch (f) {
        case TestFunction::Tanh: return "tanh";
        case TestFunction::Cos: return "cos";
        case TestFunction::InverseQuadratic: return "inverse_quadratic";
        case TestFunction::Constant: return "constant";
    }
    return "unknown";
}

double evaluate(TestFunction f, double x) noexcept {
    switch (f) {
        case TestFunction::Tanh: return std::tanh(x);
        case TestFunction::Cos: return std::cos(x);
        case TestFunction::InverseQuadratic: return 1.0 / (1.0 + x * x);
        case TestFunction::Constant: return 1.0;
    }
    return 0.0;
}

ErrorCurve simulate_weak_error(const SlowFastModel& m, TestFunction f, double horizon, std::size_t n_reps,
                               std::uint64_t seed, const AveragingOptions& opts) {
    m.validate();
    check_run(horizon, n_reps, 100);
    const Plan plan = make_plan(coupled_step_size(m.delta, opts.h_base), horizon, opts.n_out);
    ErrorCurve curve = detail::run_replicas(plan.times, n_reps, opts.threads, [&](std::size_t rep) {
        std::vector<double> trace(plan.times.size());
        coupled_path(m, plan, opts, seed, kStrongTag, rep, [&](std::size_t j, double x, double, double xbar) {
            trace[j] = evaluate(f, x) - evaluate(f, xbar);
        });
        return trace;
    });
    for (auto& v : curve.values) {
        v = std::abs(v);
    }
    curve.meta = {"averaging/weak/" + std::string(to_string(f)), m.delta, n_reps, seed};
    return curve;
}

ContractionEstimate estimate_contraction(const AveragedModel& model, double x0, double x0_prime, double horizon,
                                         std::size_t n_reps, std::uint64_t seed, const ContractionOptions& opts) {
    if (x0 == x0_prime) {
        throw InvalidArgument("estimate_contraction: initial points must differ");
    }
    check_run(horizon, n_reps, 2);
    const Plan plan = make_plan(opts.h, horizon, opts.n_out);
    const double decay = std::exp(-plan.h);
    const double gain = -std::expm1(-plan.h);
    const BrownianPairSampler pair(1.0, plan.h);
    const double r = model.r;
    auto nonlinear = [r](double x) { return -r * kInvSqrtE * std::cos(r * std::sin(x)); };

    ErrorCurve curve = detail::run_replicas(plan.times, n_reps, opts.threads, [&](std::size_t rep) {
        RngStream w = make_stream(seed, {kContractionTag, rep, kSlowNoise});
        double a = x0;
        double b = x0_prime;
        std::vector<double> trace(plan.times.size());
        std::size_t next = 0;
        for (std::size_t k = 0; k <= plan.n_steps; ++k) {
            if (k == plan.out_idx[next]) {
                trace[next] = (a - b) * (a - b);
                if (++next == plan.out_idx.size()) {
                    break;
                }
            }
            const double z1 = w.normal();
            const double z2 = w.normal();
            const double noise = kSqrt2 * pair(z1, z2).weighted;
            a = decay * a + gain * nonlinear(a) + noise;
            b = decay * b + gain * nonlinear(b) + noise;
            check_finite(a, b, k);
        }
        return trace;
    });
    curve.meta = {"averaging/contraction", r, n_reps, seed};

    ContractionEstimate est;
    est.fit = fit_exp_decay(curve, {0.0, horizon});
    est.lambda = 0.5 * est.fit.exponent;
    est.curve = std::move(curve);
    return est;
}

MomentTraces moment_trace(const SlowFastModel& m, double horizon, std::size_t n_reps, std::uint64_t seed,
                          const AveragingOptions& opts) {
    m.validate();
    check_run(horizon, n_reps, 2);
    const Plan plan = make_plan(coupled_step_size(m.delta, opts.h_base), horizon, opts.n_out);
    const std::size_t n_out = plan.times.size();
    auto curves = detail::run_replicas(plan.times, 2, n_reps, opts.threads, [&](std::size_t rep) {
        std::vector<double> trace(2 * n_out);
        coupled_path(m, plan, opts, seed, kMomentTag, rep, [&](std::size_t j, double x, double y, double) {
            trace[j] = x * x;
            trace[n_out + j] = y * y;
        });
        return trace;
    });
    curves[0].meta = {"averaging/moment_x", m.delta, n_reps, seed};
    curves[1].meta = {"averaging/moment_y", m.delta, n_reps, seed};
    return {std::move(curves[0]), std::move(curves[1])};
}

double slow_moment_bound(double t, double x0_second_moment, double r) noexcept {
    return std::exp(-t) * x0_second_moment + r * r + 1.0;
}

double fast_moment_bound(double t, double y0_second_moment, double r, double delta) noexcept {
    return std::exp(-t / delta) * y0_second_moment + r * r + 1.0;
}

}  // namespace uitlab
