#pragma once

#include <cstdint>
#include <vector>

namespace ludor {

/// Counter-based generator: the n-th draw is a pure function of (seed, n), so
/// streams are identical across platforms and can be resumed from a recorded
/// position.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0, std::uint64_t counter = 0) : seed_(seed), counter_(counter) {}

    std::uint64_t next_u64();
    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Independent stream derived from this generator's seed and a tag.
    Rng fork(std::uint64_t tag) const;

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t counter() const noexcept { return counter_; }

    /// k distinct indices from [0, n), returned in increasing order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

  private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace ludor
