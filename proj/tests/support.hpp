// Shared test utilities: an independent chi-square oracle (regularized
// incomplete gamma), small statistics helpers, and a hand-rolled random
// object generator kept separate from the library's synth module so that
// property tests do not depend on the code they check.
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "graspx/object_spec.hpp"

namespace testsupport {

// Regularized lower incomplete gamma P(a, x) by series expansion.
inline double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < 10000; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a, x) by Lentz continued fraction.
inline double gamma_q_contfrac(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-15) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

/// P(ChiSquare(dof) > stat).
inline double chi_square_pvalue(double stat, int dof) {
    if (stat <= 0.0) return 1.0;
    const double a = 0.5 * dof;
    const double x = 0.5 * stat;
    return x < a + 1.0 ? 1.0 - gamma_p_series(a, x) : gamma_q_contfrac(a, x);
}

/// Chi-square goodness-of-fit p-value of observed counts against expected
/// probabilities, pooling cells whose expected count falls below 10.
inline double chi_square_gof_pvalue(const std::vector<std::uint64_t>& observed,
                                    const std::vector<double>& probs, double n_samples) {
    double stat = 0.0;
    int cells = 0;
    double pooled_obs = 0.0, pooled_exp = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double expected = probs[i] * n_samples;
        if (expected < 10.0) {
            pooled_obs += static_cast<double>(observed[i]);
            pooled_exp += expected;
            continue;
        }
        const double diff = static_cast<double>(observed[i]) - expected;
        stat += diff * diff / expected;
        ++cells;
    }
    if (pooled_exp >= 10.0) {
        const double diff = pooled_obs - pooled_exp;
        stat += diff * diff / pooled_exp;
        ++cells;
    }
    return cells > 1 ? chi_square_pvalue(stat, cells - 1) : 1.0;
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

inline MeanSe mean_se(const std::vector<double>& xs) {
    MeanSe out;
    out.n = xs.size();
    if (xs.empty()) return out;
    double sum = 0.0;
    for (double x : xs) sum += x;
    out.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - out.mean) * (x - out.mean);
        out.se = std::sqrt(ss / static_cast<double>(xs.size() - 1) /
                           static_cast<double>(xs.size()));
    }
    return out;
}

/// Independent random-object builder (dense toppling, uniform qualities).
/// Deliberately not the library's generator.
inline graspx::ObjectSpec rand_spec(std::mt19937_64& eng, int max_poses = 6, int max_grasps = 8,
                                    double min_quality = 0.05, bool toppling = true) {
    std::uniform_int_distribution<int> n_dist(1, max_poses), k_dist(1, max_grasps);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = n_dist(eng);
    const int k = k_dist(eng);

    graspx::ObjectSpec raw;
    raw.n_poses = n;
    raw.grasps_per_pose = k;
    raw.label = "test-rand";

    raw.landing_probs.assign(n, 0.0);
    double mass = 0.0;
    for (auto& v : raw.landing_probs) {
        v = 0.05 + u(eng);
        mass += v;
    }
    for (auto& v : raw.landing_probs) v /= mass;

    raw.grasp_quality.assign(n, std::vector<double>(k, 0.0));
    for (auto& row : raw.grasp_quality) {
        for (auto& q : row) q = u(eng);
        row[0] = std::max(row[0], min_quality); // keep epsilon bounded away from 0
    }

    raw.topple_matrix.assign(n, std::vector<double>(n, 0.0));
    for (int s = 0; s < n; ++s) {
        auto& row = raw.topple_matrix[s];
        if (!toppling) {
            row[s] = 1.0;
            continue;
        }
        double total = 0.0;
        for (auto& v : row) {
            v = u(eng);
            total += v;
        }
        for (auto& v : row) v /= total;
    }
    return graspx::validate_object(std::move(raw));
}

/// Unique scratch path under the system temp directory; removed on destruction.
class TempDir {
public:
    TempDir() {
        const auto base = std::filesystem::temp_directory_path();
        std::random_device rd;
        dir_ = base / ("graspx-test-" + std::to_string(rd()) + "-" + std::to_string(::getpid()));
        std::filesystem::create_directories(dir_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(dir_, ec);
    }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

private:
    std::filesystem::path dir_;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::string out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return out;
}

} // namespace testsupport
