#pragma once

// Counter-based random number streams (Philox4x32-10, Salmon et al. 2011).
// Streams are addressed by (seed, stream); values within a stream by a
// 64-bit position. Results are identical on every platform with IEEE
// doubles, and any two distinct (seed, stream, position) triples are
// statistically independent, so parallel code can hand out streams freely.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "mpd/mathutil.hpp"

namespace mpd {

namespace detail {

inline void philox_round(std::array<std::uint32_t, 4>& ctr, std::array<std::uint32_t, 2>& key) {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * ctr[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += 0x9E3779B9u;
    key[1] += 0xBB67AE85u;
}

}  // namespace detail

/// One Philox4x32-10 block: four 32-bit words for a given key/counter.
inline std::array<std::uint32_t, 4> philox4x32(std::uint64_t seed, std::uint64_t stream,
                                               std::uint64_t pos) {
    std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(pos), static_cast<std::uint32_t>(pos >> 32),
        static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed),
                                        static_cast<std::uint32_t>(seed >> 32)};
    for (int r = 0; r < 10; ++r) detail::philox_round(ctr, key);
    return ctr;
}

/// Mixes a salt into a seed to derive child seeds (splitmix64 finalizer).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// A single logical random stream. Copyable; state is (seed, stream, position).
class RngStream {
  public:
    RngStream(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

    /// Uniform on the open interval (0,1), 53 significant bits.
    double uniform() {
        const std::uint64_t z = next_u64() >> 11;
        return (static_cast<double>(z) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via inverse-CDF transform of one uniform.
    double normal() { return inverse_normal_cdf(uniform()); }

    /// Gamma(shape, scale) by Marsaglia-Tsang squeeze.
    double gamma(double shape, double scale) {
        if (shape <= 0.0 || scale <= 0.0) throw std::invalid_argument("gamma: shape/scale must be > 0");
        if (shape < 1.0) {
            const double u = uniform();
            return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v * scale;
        }
    }

    /// Poisson(lambda) by inversion; intended for moderate lambda.
    std::uint64_t poisson(double lambda) {
        if (lambda < 0.0) throw std::invalid_argument("poisson: lambda must be >= 0");
        if (lambda == 0.0) return 0;
        const double limit = std::exp(-lambda);
        std::uint64_t k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform();
        } while (p > limit);
        return k - 1;
    }

    std::uint64_t next_u64() {
        if (avail_ == 0) {
            block_ = philox4x32(seed_, stream_, pos_++);
            avail_ = 2;
        }
        const int i = 2 * (2 - avail_);
        --avail_;
        return (static_cast<std::uint64_t>(block_[i]) << 32) | block_[i + 1];
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

  private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t pos_ = 0;
    std::array<std::uint32_t, 4> block_{};
    int avail_ = 0;
};

}  // namespace mpd
