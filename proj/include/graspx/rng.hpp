#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "graspx/errors.hpp"

namespace graspx {

/// splitmix64 finalizer. Used as the mixing step of all seed derivation so
/// that independent random streams can be reproduced by other implementations.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// FNV-1a over bytes; folds strings into the seed derivation.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Stable per-trial seed derivation. Every random stream in an experiment is
/// keyed by (master seed, object label, policy name, rollout, trial, stream
/// tag); distinct tuples give distinct, uncorrelated streams.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view object_label,
                                    std::string_view policy, std::uint64_t rollout,
                                    std::uint64_t trial, std::string_view stream) noexcept {
    std::uint64_t h = mix64(master);
    h = mix64(h ^ fnv1a64(object_label));
    h = mix64(h ^ fnv1a64(policy));
    h = mix64(h ^ rollout);
    h = mix64(h ^ trial);
    h = mix64(h ^ fnv1a64(stream));
    return h;
}

/// Seeded random stream. Wraps a fixed engine so that simulation code never
/// touches implicit global state; one instance per trial.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::mt19937_64& engine() noexcept { return engine_; }

    /// Uniform double in [0, 1).
    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }

    /// Uniform integer in [0, n).
    int uniform_int(int n) { return std::uniform_int_distribution<int>(0, n - 1)(engine_); }

    bool bernoulli(double p) { return uniform() < p; }

    double gamma(double shape) {
        return std::gamma_distribution<double>(shape, 1.0)(engine_);
    }

    double beta(double alpha, double beta) {
        const double x = gamma(alpha);
        const double y = gamma(beta);
        const double s = x + y;
        return s > 0.0 ? x / s : 0.5;
    }

    /// Samples an index from a probability vector by CDF scan. The vector is
    /// assumed to sum to ~1; accumulated rounding falls through to the last
    /// positive entry.
    int categorical(std::span<const double> probs) {
        if (probs.empty()) throw IndexOutOfRange("categorical: empty distribution");
        const double u = uniform();
        double cum = 0.0;
        int last_positive = -1;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            if (probs[i] > 0.0) last_positive = static_cast<int>(i);
            cum += probs[i];
            if (u < cum) return static_cast<int>(i);
        }
        if (last_positive < 0) throw IndexOutOfRange("categorical: all-zero distribution");
        return last_positive;
    }

    /// Symmetric Dirichlet draw via normalized gammas.
    std::vector<double> dirichlet(std::size_t n, double concentration) {
        std::vector<double> x(n);
        double total = 0.0;
        for (auto& v : x) {
            v = gamma(concentration);
            total += v;
        }
        if (total <= 0.0) {
            // all-zero gamma draws only happen for pathologically small
            // concentration; fall back to uniform
            for (auto& v : x) v = 1.0 / static_cast<double>(n);
            return x;
        }
        for (auto& v : x) v /= total;
        return x;
    }

private:
    std::mt19937_64 engine_;
};

} // namespace graspx
