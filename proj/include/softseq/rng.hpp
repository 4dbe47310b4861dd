#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace softseq {

/// Seedable, splittable random stream.
///
/// Draws come from std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Integer and real draws are derived from the raw 64-bit words here
/// (not through std::*_distribution, whose algorithms are implementation
/// defined), so a seed reproduces the same stream on every platform.
///
/// split(id) derives an independent child stream by hashing (seed, id) with
/// SplitMix64; it does not advance the parent.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64();

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_index(std::uint64_t n);

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01();

    Rng split(std::uint64_t stream_id) const;
    Rng split(std::string_view stream_name) const;

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace softseq
