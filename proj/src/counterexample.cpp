#include "uitlab/counterexample.hpp"

#include <cmath>
#include <string>

#include "uitlab/errors.hpp"
#include "uitlab/stochastic_core.hpp"

namespace uitlab {
namespace {

const std::uint64_t kTag = experiment_tag("counterexample");

bool on_grid(double t, double h) {
    const double k = std::round(t / h);
    return std::abs(k * h - t) <= 1e-9 * std::max(1.0, t);
}

std::size_t grid_index(double t, double h) { return static_cast<std::size_t>(std::llround(t / h)); }

struct Plan {
    std::size_t n_steps;
    std::size_t start;
    std::size_t end;
};

Plan plan_for(const AppendixModel& m, double horizon, const CounterexampleOptions& opts) {
    m.validate();
    if (!(horizon >= m.window_end() + 2.0)) {
        throw InvalidArgument("counterexample: horizon must be at least 1/delta + 3");
    }
    if (opts.stride == 0) {
        throw InvalidArgument("counterexample: stride must be positive");
    }
    return {steps_for(horizon, m.h), grid_index(m.window_start(), m.h), grid_index(m.window_end(), m.h)};
}

template <class Step>
ErrorCurve run(const AppendixModel& m, const Plan& p, const CounterexampleOptions& opts, Step&& step) {
    ErrorCurve c;
    for (std::size_t k = 0; k <= p.n_steps; ++k) {
        if (k % opts.stride == 0 || k == p.n_steps) {
            c.times.push_back(static_cast<double>(k) * m.h);
            c.values.push_back(step.value());
            c.std_errors.push_back(0.0);
        }
        if (k < p.n_steps) {
            // Left-endpoint indicator on [start, end): exactly end - start forced steps.
            step.advance(k, k >= p.start && k < p.end ? 1.0 : 0.0);
        }
    }
    return c;
}

}  // namespace

void AppendixModel::validate() const {
    if (!(delta > 0.0) || !(h > 0.0)) {
        throw InvalidArgument("counterexample: delta and h must be positive");
    }
    if (!on_grid(window_start(), h) || !on_grid(window_end(), h)) {
        throw InvalidArgument("counterexample: window endpoints 1/delta and 1/delta + 1 must be multiples of h");
    }
}

double analytic_error(double t, double delta) {
    const double s = 1.0 / delta;
    if (t <= s) {
        return 0.0;
    }
    if (t <= s + 1.0) {
        return t - s;
    }
    return std::exp(-(t - (s + 1.0)));
}

double exact_difference(double t, double delta) {
    const double s = 1.0 / delta;
    if (t <= s) {
        return 0.0;
    }
    if (t <= s + 1.0) {
        return -std::expm1(-(t - s));
    }
    return -std::expm1(-1.0) * std::exp(-(t - (s + 1.0)));
}

ErrorCurve simulate_counterexample(const AppendixModel& m, double horizon, std::uint64_t seed,
                                   const CounterexampleOptions& opts) {
    const Plan p = plan_for(m, horizon, opts);
    struct {
        RngStream rng;
        double h;
        double sqrt_h;
        double x;
        double xd;
        double value() const { return std::abs(xd - x); }
        void advance(std::size_t, double forcing) {
            const double dW = sqrt_h * rng.normal();
            x += -x * h + dW;
            xd += (-xd + forcing) * h + dW;
        }
    } state{make_stream(seed, {kTag, 0, 0}), m.h, std::sqrt(m.h), opts.x0, opts.x0};
    ErrorCurve c = run(m, p, opts, state);
    c.meta = {"counterexample/simulated", m.delta, 1, seed};
    return c;
}

ErrorCurve integrate_difference(const AppendixModel& m, double horizon, const CounterexampleOptions& opts) {
    const Plan p = plan_for(m, horizon, opts);
    struct {
        double h;
        double z = 0.0;
        double value() const { return z; }
        void advance(std::size_t, double forcing) { z += (-z + forcing) * h; }
    } state{m.h};
    ErrorCurve c = run(m, p, opts, state);
    c.meta = {"counterexample/difference", m.delta, 1, 0};
    return c;
}

}  // namespace uitlab
