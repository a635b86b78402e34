#pragma once

#include <cstdint>

namespace sbd {

/// SplitMix64 finalizer (Steele, Lea & Flood 2014). Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic random stream addressed by (seed, stream index).
///
/// The stream state is initialised to mix64(mix64(seed) ^ (index * golden))
/// and then advanced as a plain SplitMix64 generator. Outputs depend only on
/// the pair, never on evaluation order, so per-pixel streams can be drawn in
/// parallel and still reproduce bit-for-bit on every platform.
class CounterRng {
public:
    static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

    CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
        : state_(mix64(mix64(seed) ^ (stream * kGolden + 0x632be59bd9b4e019ULL))) {}

    std::uint64_t next_u64() noexcept {
        state_ += kGolden;
        return mix64(state_);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1).
    double uniform_open() noexcept { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    /// Standard normal via Box-Muller (one value per call; the pair's second half is discarded).
    double normal() noexcept;

private:
    std::uint64_t state_;
};

/// Draws a Poisson variate with the given rate.
///
/// Rates below 10 use inversion by sequential search; larger rates use
/// Hormann's transformed rejection with squeeze (PTRS). rate == 0 returns 0.
std::uint64_t sample_poisson(double rate, CounterRng& rng);

}  // namespace sbd
