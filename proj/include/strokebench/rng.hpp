#pragma once

#include <cstdint>
#include <span>
#include <utility>

namespace strokebench {

/// SplitMix64 generator. The output sequence is fixed: for seed 0 the first
/// three outputs are 0xe220a8397b1dcdaf, 0x6e789e6aa1b965f4, 0x06c45d188009454f.
/// All randomness in the library (weight init, shuffling, synthetic data)
/// comes from this generator so runs are reproducible across platforms.
class SplitMix64 {
public:
    explicit constexpr SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

    constexpr std::uint64_t next() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    constexpr double uniform() noexcept {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    constexpr double uniform(double lo, double hi) noexcept {
        return lo + (hi - lo) * uniform();
    }

    /// Uniform integer in [0, bound), bound > 0 (multiply-high reduction).
    constexpr std::uint64_t below(std::uint64_t bound) noexcept {
        __extension__ using wide_t = unsigned __int128;
        const auto wide = static_cast<wide_t>(next()) * bound;
        return static_cast<std::uint64_t>(wide >> 64);
    }

    constexpr std::uint64_t state() const noexcept { return state_; }

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

/// Independent stream for (seed, index), e.g. the shuffle order of one epoch.
constexpr SplitMix64 derive_stream(std::uint64_t seed, std::uint64_t index) noexcept {
    return SplitMix64(SplitMix64::mix(seed ^ SplitMix64::mix(index + 0x632be59bd9b4e019ULL)));
}

/// Fisher-Yates shuffle driven by SplitMix64 (std::shuffle is not portable).
template <class T>
void shuffle(std::span<T> items, SplitMix64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        using std::swap;
        swap(items[i - 1], items[j]);
    }
}

}  // namespace strokebench
