// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace attentrack {

/// splitmix64 step; used for seeding and for deriving independent streams.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Mix several integers into one seed (order-sensitive).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) noexcept;

/// xoshiro256** generator with hand-written distributions so that every
/// sampled value is identical across standard libraries and platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept;

    std::uint64_t next_u64() noexcept;

    /// Uniform in [0, 1).
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept;
    /// Uniform integer in [0, n). n must be > 0.
    std::size_t below(std::size_t n) noexcept;
    bool bernoulli(double p) noexcept;
    double normal() noexcept;
    double normal(double mean, double stddev) noexcept;
    /// Knuth's multiplication method; fine for the small rates used here.
    std::size_t poisson(double rate) noexcept;
    /// Marsaglia-Tsang, shape > 0.
    double gamma(double shape) noexcept;
    double beta(double a, double b) noexcept;

    std::array<std::uint64_t, 4> state() const noexcept { return s_; }

private:
    std::array<std::uint64_t, 4> s_{};
    bool has_spare_normal_ = false;
    double spare_normal_ = 0.0;
};

}  // namespace attentrack
