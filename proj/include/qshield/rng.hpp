#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace qshield {

/// Seedable 64-bit generator passed explicitly to every sampling operation.
/// Only the raw mt19937_64 stream is used; all derived draws are computed
/// here so results are identical across standard library implementations.
class Rng {
  public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }
    result_type operator()() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    int bit() { return static_cast<int>(engine_() >> 63); }

    /// Unbiased integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    /// Standard normal draw (Box-Muller, no cached second value).
    double normal();

    void fill(std::span<std::uint8_t> out);

  private:
    std::mt19937_64 engine_;
};

/// Mixes a base seed with stream tags (round, device, purpose...) into an
/// independent child seed. Pure function; does not consume generator state.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags);

} // namespace qshield
