#pragma once

// Portable pseudo-random streams. Everything stochastic in the library
// (splits, shuffles, dropout masks, initialization, synthetic data) draws
// from SplitMix64 so that any implementation following the same recipe
// reproduces the same sequences.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string_view>
#include <utility>

namespace saber {

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

/// SplitMix64 output finalizer (Stafford variant 13).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Hash of a byte string followed by the 8 little-endian bytes of `seed`.
/// h starts at 0; for every byte b: h = mix64(h + kGoldenGamma + b).
constexpr std::uint64_t hash_key(std::string_view key, std::uint64_t seed) noexcept {
    std::uint64_t h = 0;
    for (unsigned char b : key) h = mix64(h + kGoldenGamma + b);
    for (int i = 0; i < 8; ++i) h = mix64(h + kGoldenGamma + ((seed >> (8 * i)) & 0xffU));
    return h;
}

/// Maps 64 random bits to [0, 1) using the top 53 bits.
constexpr double unit_interval(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Derives an independent stream seed from a parent seed and a role tag.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) noexcept {
    return hash_key(tag, seed);
}

class SplitMix64 {
public:
    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    constexpr std::uint64_t next() noexcept {
        state_ += kGoldenGamma;
        return mix64(state_);
    }

    /// Uniform in [0, 1).
    constexpr double uniform() noexcept { return unit_interval(next()); }

    /// Uniform integer in [0, bound) via the high half of a 128-bit product.
    std::uint64_t below(std::uint64_t bound) noexcept {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * bound) >> 64);
    }

    /// Standard normal via Box-Muller; the sine branch is cached for the next call.
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] keeps the log finite.
        const double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    std::uint64_t state() const noexcept { return state_; }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Fisher-Yates from the back: for i = n-1..1, swap(i, below(i+1)).
template <typename T>
void shuffle(std::span<T> items, SplitMix64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        using std::swap;
        swap(items[i - 1], items[j]);
    }
}

} // namespace saber
