#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace uitlab {

/// Uniform time grid. Point k sits at t0 + k*dt, computed by multiplication.
class TimeGrid {
  public:
    TimeGrid(double t0, double dt, std::size_t n_steps);

    double t0() const noexcept { return t0_; }
    double dt() const noexcept { return dt_; }
    std::size_t n_steps() const noexcept { return n_steps_; }

    double time(std::size_t k) const noexcept { return t0_ + static_cast<double>(k) * dt_; }
    double end() const noexcept { return time(n_steps_); }

  private:
    double t0_;
    double dt_;
    std::size_t n_steps_;
};

/// Evenly spread step indices 0 = k_0 < ... < k_{n_out-1} = n_steps used as
/// output points of a simulation. n_out is clamped to n_steps + 1.
std::vector<std::size_t> output_indices(std::size_t n_steps, std::size_t n_out);

/// Number of steps of size h needed to reach `horizon` (rounded to nearest
/// when within 1e-9 relative, else rounded up).
std::size_t steps_for(double horizon, double h);

/// Stable 64-bit tag for an experiment name (FNV-1a).
std::uint64_t experiment_tag(std::string_view name) noexcept;

struct StreamId {
    std::uint64_t tag = 0;
    std::uint64_t trajectory = 0;
    std::uint64_t role = 0;

    friend bool operator==(const StreamId&, const StreamId&) = default;
};

/// Philox4x32-10 block function. Exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key) noexcept;

/// Counter-based random stream. The key is derived from (seed, tag, role) and
/// the trajectory index occupies the upper half of the Philox counter, so any
/// two distinct ids address disjoint counter/key spaces.
class RngStream {
  public:
    RngStream(std::uint64_t master_seed, StreamId id) noexcept;

    std::uint64_t master_seed() const noexcept { return seed_; }
    const StreamId& id() const noexcept { return id_; }

    std::uint64_t next_u64() noexcept;
    /// Uniform on the open interval (0, 1).
    double uniform() noexcept;
    double normal() noexcept;
    void fill_normal(std::span<double> out) noexcept;

    /// Rewind to the first draw.
    void reset() noexcept;

  private:
    void refill() noexcept;

    std::uint64_t seed_;
    StreamId id_;
    std::array<std::uint32_t, 2> key_{};
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, 2> words_{};
    int word_pos_ = 2;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

RngStream make_stream(std::uint64_t master_seed, StreamId id) noexcept;

/// Brownian increments on a grid, n_steps x dim, row-major.
class IncrementArray {
  public:
    IncrementArray(TimeGrid grid, std::size_t dim, std::vector<double> values);

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t n_steps() const noexcept { return grid_.n_steps(); }

    std::span<const double> row(std::size_t k) const noexcept {
        return {values_.data() + k * dim_, dim_};
    }
    double operator()(std::size_t k, std::size_t d) const noexcept { return values_[k * dim_ + d]; }
    const std::vector<double>& values() const noexcept { return values_; }

  private:
    TimeGrid grid_;
    std::size_t dim_;
    std::vector<double> values_;
};

IncrementArray gaussian_increments(RngStream& stream, const TimeGrid& grid, std::size_t dim);

/// Sums consecutive blocks of `factor` fine increments onto the coarse grid.
IncrementArray coarsen_increments(const IncrementArray& fine, std::size_t factor);

}  // namespace uitlab
