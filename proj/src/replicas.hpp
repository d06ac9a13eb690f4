#pragma once

#include <cstddef>
#include <vector>

#include "uitlab/errors.hpp"
#include "uitlab/metrics.hpp"
#include "uitlab/parallel.hpp"

namespace uitlab::detail {

/// Runs fn(rep) for every replica. fn returns n_curves traces laid out
/// back to back, each of times.size() entries. Reduction is in replica order.
template <class Fn>
std::vector<ErrorCurve> run_replicas(const std::vector<double>& times, std::size_t n_curves, std::size_t n_reps,
                                     std::size_t threads, Fn&& fn) {
    const std::size_t n_out = times.size();
    std::vector<std::vector<double>> traces(n_reps);
    parallel_for(n_reps, threads, [&](std::size_t rep) {
        try {
            traces[rep] = fn(rep);
        } catch (const NumericalBlowup& e) {
            throw e.with_trajectory(rep);
        }
    });
    std::vector<ErrorCurve> curves;
    curves.reserve(n_curves);
    std::vector<std::vector<double>> split(n_reps, std::vector<double>(n_out));
    for (std::size_t c = 0; c < n_curves; ++c) {
        for (std::size_t rep = 0; rep < n_reps; ++rep) {
            for (std::size_t k = 0; k < n_out; ++k) {
                split[rep][k] = traces[rep][c * n_out + k];
            }
        }
        curves.push_back(curve_from_samples(times, split));
    }
    return curves;
}

template <class Fn>
ErrorCurve run_replicas(const std::vector<double>& times, std::size_t n_reps, std::size_t threads, Fn&& fn) {
    return std::move(run_replicas(times, 1, n_reps, threads, std::forward<Fn>(fn)).front());
}

inline std::vector<double> times_of(const std::vector<std::size_t>& indices, double h) {
    std::vector<double> t(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        t[i] = static_cast<double>(indices[i]) * h;
    }
    return t;
}

}  // namespace uitlab::detail
