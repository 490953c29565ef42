#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace btda {

inline constexpr std::uint64_t kGolden64 = 0x9e3779b97f4a7c15ull;

/// SplitMix64 finalizer. The single fixed mixing primitive behind every
/// stream and every derived seed in this library; documented in the README
/// so results are portable across implementations.
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += kGolden64;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

/// derive(master, label, index) = splitmix64(splitmix64(fnv1a64(label) ^
/// splitmix64(master)) ^ splitmix64(index)).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                                    std::uint64_t index) noexcept {
    std::uint64_t h = splitmix64(fnv1a64(label) ^ splitmix64(master));
    return splitmix64(h ^ splitmix64(index));
}

/// Counter-based stream: output k is a pure function of (seed, stream_id, k),
/// so replay is exact and distinct streams can run on any schedule.
class RngStream {
public:
    RngStream() noexcept : RngStream(0, 0) {}
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0) noexcept
        : seed_(seed),
          stream_(stream_id),
          key_(splitmix64(splitmix64(seed) ^ (stream_id * kGolden64))) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_; }
    std::uint64_t counter() const noexcept { return counter_; }

    /// Independent child stream; same parent seed, derived stream id.
    RngStream substream(std::uint64_t k) const noexcept {
        return RngStream(seed_, splitmix64(stream_ ^ splitmix64(k)));
    }

    std::uint64_t next_u64() noexcept { return splitmix64(key_ + counter_++ * kGolden64); }

    /// Uniform in [0, 1), 53-bit resolution.
    double next_double() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * next_double(); }

    /// Unbiased integer in [0, n); rejection sampling on the top of the range.
    std::uint64_t below(std::uint64_t n) noexcept {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t u = next_u64();
        while (u >= limit) u = next_u64();
        return u % n;
    }

    /// Standard normal via Box-Muller; consumes exactly two uniforms per call.
    double gaussian() noexcept {
        const double u1 = 1.0 - next_double();  // (0, 1]
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

}  // namespace btda
