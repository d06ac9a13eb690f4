#include "uitlab/stochastic_core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "uitlab/errors.hpp"

namespace uitlab {
namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace

TimeGrid::TimeGrid(double t0, double dt, std::size_t n_steps)
    : t0_(t0), dt_(dt), n_steps_(n_steps) {
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw InvalidArgument("TimeGrid: dt must be positive and finite");
    }
    if (n_steps == 0) {
        throw InvalidArgument("TimeGrid: n_steps must be at least 1");
    }
    if (!std::isfinite(t0)) {
        throw InvalidArgument("TimeGrid: t0 must be finite");
    }
}

std::vector<std::size_t> output_indices(std::size_t n_steps, std::size_t n_out) {
    if (n_out < 2) {
        throw InvalidArgument("output_indices: need at least 2 output points");
    }
    n_out = std::min(n_out, n_steps + 1);
    std::vector<std::size_t> idx(n_out);
    for (std::size_t j = 0; j < n_out; ++j) {
        idx[j] = static_cast<std::size_t>(std::llround(static_cast<double>(j) * static_cast<double>(n_steps) /
                                                       static_cast<double>(n_out - 1)));
    }
    return idx;
}

std::size_t steps_for(double horizon, double h) {
    if (!(horizon > 0.0) || !(h > 0.0)) {
        throw InvalidArgument("steps_for: horizon and step must be positive");
    }
    const double ratio = horizon / h;
    const double nearest = std::round(ratio);
    if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, ratio)) {
        return static_cast<std::size_t>(nearest);
    }
    return static_cast<std::size_t>(std::ceil(ratio));
}

std::uint64_t experiment_tag(std::string_view name) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) noexcept {
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kPhiloxW0;
        key[1] += kPhiloxW1;
    }
    return ctr;
}

RngStream::RngStream(std::uint64_t master_seed, StreamId id) noexcept : seed_(master_seed), id_(id) {
    std::uint64_t k = splitmix64(master_seed);
    k = splitmix64(k ^ id.tag);
    k = splitmix64(k ^ (id.role * 0xd1b54a32d192ed03ull));
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

void RngStream::reset() noexcept {
    block_ = 0;
    word_pos_ = 2;
    has_spare_ = false;
}

void RngStream::refill() noexcept {
    const std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
        static_cast<std::uint32_t>(id_.trajectory), static_cast<std::uint32_t>(id_.trajectory >> 32)};
    const auto out = philox4x32_10(ctr, key_);
    words_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
    words_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
    ++block_;
    word_pos_ = 0;
}

std::uint64_t RngStream::next_u64() noexcept {
    if (word_pos_ >= 2) {
        refill();
    }
    return words_[word_pos_++];
}

double RngStream::uniform() noexcept {
    constexpr double kScale = 0x1.0p-53;
    return (static_cast<double>(next_u64() >> 11) + 0.5) * kScale;
}

double RngStream::normal() noexcept {
    if (has_spare_) {
        has_spare_ = false;
        return spare_normal_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_normal_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

void RngStream::fill_normal(std::span<double> out) noexcept {
    for (auto& v : out) {
        v = normal();
    }
}

RngStream make_stream(std::uint64_t master_seed, StreamId id) noexcept {
    return RngStream(master_seed, id);
}

IncrementArray::IncrementArray(TimeGrid grid, std::size_t dim, std::vector<double> values)
    : grid_(grid), dim_(dim), values_(std::move(values)) {
    if (dim_ == 0) {
        throw InvalidArgument("IncrementArray: dim must be at least 1");
    }
    if (values_.size() != grid_.n_steps() * dim_) {
        throw InvalidArgument("IncrementArray: values size does not match n_steps * dim");
    }
}

IncrementArray gaussian_increments(RngStream& stream, const TimeGrid& grid, std::size_t dim) {
    if (dim == 0) {
        throw InvalidArgument("gaussian_increments: dim must be at least 1");
    }
    const double scale = std::sqrt(grid.dt());
    std::vector<double> values(grid.n_steps() * dim);
    for (auto& v : values) {
        v = scale * stream.normal();
    }
    return IncrementArray(grid, dim, std::move(values));
}

IncrementArray coarsen_increments(const IncrementArray& fine, std::size_t factor) {
    if (factor == 0 || fine.n_steps() % factor != 0) {
        throw InvalidArgument("coarsen_increments: n_steps must be divisible by factor");
    }
    const std::size_t dim = fine.dim();
    const std::size_t n_coarse = fine.n_steps() / factor;
    std::vector<double> values(n_coarse * dim, 0.0);
    for (std::size_t j = 0; j < n_coarse; ++j) {
        for (std::size_t f = 0; f < factor; ++f) {
            const auto src = fine.row(j * factor + f);
            for (std::size_t d = 0; d < dim; ++d) {
                values[j * dim + d] += src[d];
            }
        }
    }
    const TimeGrid& g = fine.grid();
    return IncrementArray(TimeGrid(g.t0(), g.dt() * static_cast<double>(factor), n_coarse), dim,
                          std::move(values));
}

}  // namespace uitlab
