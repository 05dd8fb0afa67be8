#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string_view>
#include <vector>

namespace qfl {

/// Finalizer from SplitMix64 (Steele, Lea & Flood 2014). Bijective on u64.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// FNV-1a over a string, used to fold purpose tags into seeds.
inline std::uint64_t hash_tag(std::string_view tag) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

/// Derives an independent 64-bit stream seed from (master, round, client, tag).
/// Each input is absorbed through mix64 with a distinct odd multiplier, so
/// distinct triples land in distinct streams. Stable across platforms.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t round,
                                 std::uint64_t client, std::string_view tag) {
    std::uint64_t h = mix64(master ^ 0x6A09E667F3BCC909ULL);
    h = mix64(h ^ (round * 0x9E3779B97F4A7C15ULL));
    h = mix64(h ^ (client * 0xC2B2AE3D27D4EB4FULL));
    h = mix64(h ^ hash_tag(tag));
    return h;
}

/// SplitMix64 stream with hand-rolled distributions. The standard library's
/// distributions and std::shuffle are implementation-defined, which would
/// break byte-identical transcripts across toolchains; everything here is
/// pinned down to exact integer and IEEE double operations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        return mix64(z);
    }

    /// Uniform double in [0, 1), 53 random bits.
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1]; safe as a log() argument.
    double next_double_open() {
        return double((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Uniform integer in [0, bound). Lemire's multiply-shift with rejection.
    std::uint64_t next_below(std::uint64_t bound) {
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < bound) {
            const std::uint64_t threshold = -bound % bound;
            while (lo < threshold) {
                m = static_cast<unsigned __int128>(next_u64()) * bound;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal via Box-Muller (cosine branch only).
    double normal() {
        const double u1 = next_double_open();
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Gamma(alpha, 1) via Marsaglia-Tsang; alpha < 1 boosted through
    /// Gamma(alpha+1) * U^(1/alpha).
    double gamma(double alpha) {
        if (alpha < 1.0) {
            const double g = gamma(alpha + 1.0);
            return g * std::pow(next_double_open(), 1.0 / alpha);
        }
        const double d = alpha - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            const double u = next_double_open();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    /// Symmetric Dirichlet(alpha) over k categories.
    std::vector<double> dirichlet(double alpha, int k) {
        std::vector<double> p(k);
        double sum = 0.0;
        for (int i = 0; i < k; ++i) {
            p[i] = gamma(alpha);
            sum += p[i];
        }
        if (sum < 1e-300) {
            std::fill(p.begin(), p.end(), 1.0 / k);
            return p;
        }
        for (double& v : p) v /= sum;
        return p;
    }

    /// In-place Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = next_below(i);
            std::swap(items[i - 1], items[j]);
        }
    }

    /// k distinct values from [0, n), ascending.
    std::vector<int> sample_without_replacement(int n, int k) {
        std::vector<int> pool(n);
        std::iota(pool.begin(), pool.end(), 0);
        for (int i = 0; i < k; ++i) {
            const std::size_t j = i + next_below(std::uint64_t(n - i));
            std::swap(pool[i], pool[j]);
        }
        pool.resize(k);
        std::sort(pool.begin(), pool.end());
        return pool;
    }

private:
    std::uint64_t state_;
};

}  // namespace qfl
