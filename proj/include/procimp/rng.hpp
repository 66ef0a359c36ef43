#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

#include <Eigen/Core>

namespace procimp {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Child seed for an integer stream index (draw k, chain c, ...).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Child seed from a sequence of text labels, stable across platforms (FNV-1a + SplitMix).
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::string_view> labels) {
    std::uint64_t h = mix64(seed);
    for (auto label : labels) {
        std::uint64_t f = 0xcbf29ce484222325ULL;
        for (unsigned char c : label) {
            f ^= c;
            f *= 0x100000001b3ULL;
        }
        h = mix64(h ^ f);
    }
    return h;
}

inline double std_normal(Rng& rng) {
    return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Inverse-gamma draw with shape/rate parameterization: 1 / Gamma(shape, rate).
inline double inverse_gamma(double shape, double rate, Rng& rng) {
    std::gamma_distribution<double> g(shape, 1.0 / rate);
    return 1.0 / g(rng);
}

inline Eigen::Vector2d normal2(Rng& rng) {
    const double a = std_normal(rng);
    const double b = std_normal(rng);
    return {a, b};
}

}  // namespace procimp
