#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace panorad {

/// 64-bit seed for every stochastic operation.
struct Seed {
    std::uint64_t value = 0;
    friend bool operator==(const Seed&, const Seed&) = default;
};

/// SplitMix64 finaliser; a bijective mixing function on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Counter-based generator: draw i of stream s under key k is
/// mix64(k ^ mix64(s) + i). Streams split off deterministically, so any
/// consumer can derive an independent sequence from (seed, purpose) without
/// sharing state.
class CounterRng {
public:
    explicit CounterRng(Seed seed, std::uint64_t stream = 0)
        : key_(mix64(seed.value) ^ mix64(stream + 0x632BE59BD9B4E019ull)) {}

    /// Independent child generator labelled by `stream`.
    CounterRng split(std::uint64_t stream) const {
        return CounterRng(Seed{key_}, stream);
    }

    std::uint64_t next_u64() { return mix64(key_ + mix64(counter_++)); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n); n must be positive.
    std::uint64_t below(std::uint64_t n) {
        // Lemire's multiply-shift with rejection for exact uniformity.
        while (true) {
            const unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
            const auto low = static_cast<std::uint64_t>(m);
            if (low >= (-n) % n) {
                return static_cast<std::uint64_t>(m >> 64);
            }
        }
    }

    int uniform_int(int lo, int hi_inclusive) {
        return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi_inclusive - lo + 1)));
    }

    /// Standard normal via Box-Muller (one draw per call, deterministic).
    double normal() {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2 * std::numbers::pi * u2);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace panorad
