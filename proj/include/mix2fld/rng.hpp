#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mix2fld {

// Deterministic counter-based random stream (SplitMix64). Independent
// streams are derived from a master seed and a textual label, so results
// do not depend on evaluation order across devices, rounds, or threads.
//
// Stream derivation: FNV-1a(label) xor master seed, scrambled once.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : state_(scramble(seed)) {}

    static RngStream derive(std::uint64_t master_seed, std::string_view label) {
        std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a 64
        for (unsigned char c : label) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
        return RngStream(master_seed ^ scramble(h));
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform index in [0, n). n must be > 0.
    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    // Unit-mean exponential by inverse CDF (means a Rayleigh power fade).
    double exponential(double mean = 1.0) { return -mean * std::log1p(-next_double()); }

    // Standard normal via Box-Muller, second draw cached.
    double normal(double mu = 0.0, double sigma = 1.0) {
        if (has_cached_) {
            has_cached_ = false;
            return mu + sigma * cached_;
        }
        double u1 = next_double();
        double u2 = next_double();
        double r = std::sqrt(-2.0 * std::log1p(-u1));
        double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return mu + sigma * r * std::cos(a);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static std::uint64_t scramble(std::uint64_t z) {
        z = (z ^ (z >> 33)) * 0xff51afd7ed558ccdull;
        z = (z ^ (z >> 33)) * 0xc4ceb9fe1a85ec53ull;
        return z ^ (z >> 33);
    }

    std::uint64_t state_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace mix2fld
