// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#ifndef WSIM_RNG_HPP
#define WSIM_RNG_HPP

#include <complex>
#include <cstdint>
#include <string_view>

namespace wsim {

// splitmix64, used for seeding and stream derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// xoshiro256++ with named sub-stream derivation. All randomness in the
// project flows through explicit RngStream instances; sub-streams are derived
// as: derive(label)  -> seed' = mix(seed_key ^ fnv1a64(label))
//     derive(index)  -> seed' = mix(seed_key + index)
// where mix runs the new key through splitmix64. A stream's draws never
// affect its siblings.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_key_(seed) { reseed(seed); }

    RngStream derive(std::string_view label) const {
        return RngStream(hash_key(seed_key_ ^ fnv1a64(label)));
    }
    RngStream derive(std::uint64_t index) const {
        return RngStream(hash_key(seed_key_ + 0x9e3779b97f4a7c15ULL * (index + 1)));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

    // standard normal via Box-Muller (first of the pair; the mate is dropped
    // so stream position does not depend on call parity)
    double gaussian();

    double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

    // circularly-symmetric complex gaussian with E|z|^2 = variance
    std::complex<double> complex_gaussian(double variance);

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    static std::uint64_t hash_key(std::uint64_t k) {
        std::uint64_t s = k;
        return splitmix64(s);
    }
    void reseed(std::uint64_t seed) {
        std::uint64_t s = seed;
        for (auto& w : s_) w = splitmix64(s);
    }

    std::uint64_t seed_key_;
    std::uint64_t s_[4];
};

} // namespace wsim

#endif
