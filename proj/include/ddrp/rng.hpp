#pragma once

#include <cmath>
#include <cstdint>

namespace ddrp::rng {

// splitmix64 finalizer. Bijective on 64-bit words, good avalanche; the basis
// for both seed derivation and the stream below.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derive a child seed from (seed, salt). Used everywhere a module needs its
// own stream from a user-facing seed: per-trial streams (salt = trial index)
// and per-module domain separation (salt = a Domain tag), so e.g. the matrix
// sampled for trial 0 never shares a stream with synthetic data drawn from
// the same user seed. Parallel and serial execution consume identical
// streams because each unit of work derives its own.
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t salt) {
    return mix64(seed ^ (salt * 0xd1b54a32d192ed03ULL + 0x8cb92ba72f3d8dd7ULL));
}

// Fixed per-module stream tags.
enum class Domain : std::uint64_t {
    Projection = 0x01,
    Synth = 0x02,
    PhiMonteCarlo = 0x03,
    Learn = 0x04,
    PairSampling = 0x05,
};

inline std::uint64_t derive(std::uint64_t seed, Domain d) {
    return derive(seed, static_cast<std::uint64_t>(d));
}

// Counter-based splitmix64 stream. State is a single word; output i is a
// pure function of (seed, i), so streams never collide once their seeds
// differ and results do not depend on thread scheduling.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via the polar (Marsaglia) method; the second deviate of
    // each accepted pair is cached, so draws stay deterministic per stream.
    double next_gaussian() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u, v, s;
        do {
            u = 2.0 * next_uniform() - 1.0;
            v = 2.0 * next_uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        cached_ = v * m;
        have_cached_ = true;
        return u * m;
    }

    // Laplace(0, scale) by CDF inversion.
    double next_laplace(double scale = 1.0) {
        const double u = next_uniform() - 0.5;
        const double mag = -std::log(1.0 - 2.0 * std::abs(u));
        return (u < 0.0 ? -scale : scale) * mag;
    }

private:
    std::uint64_t state_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

} // namespace ddrp::rng
