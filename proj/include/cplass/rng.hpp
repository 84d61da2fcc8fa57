#pragma once

// Random streams. Every chain, replicate and bootstrap owns one Rng seeded
// by derive_seed(master, stream...), so results never depend on which
// worker thread ran them or in what order.

#include <cstdint>
#include <random>

namespace cplass {

/// One SplitMix64 step.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of child stream `stream` under `master`.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    return derive_seed(derive_seed(master, a), b);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1].
    double uniform_positive() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

    /// Uniform integer in [0, count).
    std::int64_t index(std::int64_t count) {
        return std::uniform_int_distribution<std::int64_t>(0, count - 1)(engine_);
    }

    bool bernoulli(double p) { return uniform() < p; }

    double normal() { return normal_(engine_); }

    /// Gamma with the given shape and rate.
    double gamma(double shape, double rate) { return std::gamma_distribution<double>(shape, 1.0 / rate)(engine_); }

    double exponential(double mean) { return std::exponential_distribution<double>(1.0 / mean)(engine_); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace cplass
