#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "graspx/object_spec.hpp"
#include "graspx/rng.hpp"

namespace graspx {

namespace detail {

inline std::string fmt_g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

} // namespace detail

/// Parameters for the sensitivity family: every pose carries exactly one
/// grasp of quality epsilon (all others zero), one pose carries landing
/// probability lambda_min with the remaining mass spread uniformly over the
/// other poses, and toppling defaults to off.
struct SensitivityParams {
    int n_poses = 5;
    int grasps_per_pose = 100;
    double epsilon = 0.5;
    double lambda_min = 0.1;
    bool toppling = false;
    double topple_mass = 0.0; // row mass moved off the diagonal when toppling is on
};

inline void validate(const SensitivityParams& p) {
    if (p.n_poses < 1 || p.grasps_per_pose < 1)
        throw InvalidParams("sensitivity: need n_poses >= 1 and grasps_per_pose >= 1");
    if (p.epsilon <= 0.0 || p.epsilon > 1.0)
        throw InvalidParams("sensitivity: epsilon must be in (0, 1]");
    if (p.lambda_min <= 0.0 || p.lambda_min > 1.0 / p.n_poses + 1e-12)
        throw InvalidParams("sensitivity: lambda_min must be in (0, 1/N]");
    if (p.toppling && (p.topple_mass < 0.0 || p.topple_mass >= 1.0))
        throw InvalidParams("sensitivity: topple_mass must be in [0, 1)");
}

/// Builds one sensitivity object. The placement of each pose's good grasp is
/// the only randomness; everything else is determined by the parameters.
/// Pose 0 is the rare pose.
inline ObjectSpec gen_sensitivity_object(const SensitivityParams& p, Rng& rng) {
    validate(p);
    const int n = p.n_poses;
    const int k = p.grasps_per_pose;

    ObjectSpec spec;
    spec.n_poses = n;
    spec.grasps_per_pose = k;
    spec.label = "sens-n" + std::to_string(n) + "-k" + std::to_string(k) + "-eps" +
                 detail::fmt_g(p.epsilon) + "-lam" + detail::fmt_g(p.lambda_min);

    spec.landing_probs.assign(n, 0.0);
    if (n == 1) {
        spec.landing_probs[0] = 1.0;
    } else {
        spec.landing_probs[0] = p.lambda_min;
        for (int s = 1; s < n; ++s)
            spec.landing_probs[s] = (1.0 - p.lambda_min) / static_cast<double>(n - 1);
    }

    spec.grasp_quality.assign(n, std::vector<double>(k, 0.0));
    for (int s = 0; s < n; ++s) spec.grasp_quality[s][rng.uniform_int(k)] = p.epsilon;

    spec.topple_matrix.assign(n, std::vector<double>(n, 0.0));
    for (int s = 0; s < n; ++s) {
        if (!p.toppling || p.topple_mass == 0.0 || n == 1) {
            spec.topple_matrix[s][s] = 1.0;
            continue;
        }
        spec.topple_matrix[s][s] = 1.0 - p.topple_mass;
        for (int t = 0; t < n; ++t)
            if (t != s) spec.topple_matrix[s][t] = p.topple_mass / static_cast<double>(n - 1);
    }
    return validate_object(std::move(spec));
}

/// Parameters for random benchmark objects. Grasp qualities follow a
/// Beta(quality_alpha, quality_beta) distribution (skewed low by default:
/// most grasps are poor); any pose whose best draw falls below eps_floor
/// gets one grasp re-drawn uniformly from [eps_floor, 1]. Landing
/// probabilities are symmetric-Dirichlet; topple rows keep 1 - topple_mass
/// on the diagonal and spread the rest over topple_density random targets.
struct RandomObjectParams {
    int n_poses = 5;
    int grasps_per_pose = 100;
    double dirichlet_concentration = 3.0;
    double quality_alpha = 0.5;
    double quality_beta = 8.0;
    double eps_floor = 0.1;
    int topple_density = 2;
    double topple_mass = 0.0;
};

inline void validate(const RandomObjectParams& p) {
    if (p.n_poses < 1 || p.grasps_per_pose < 1)
        throw InvalidParams("random object: need n_poses >= 1 and grasps_per_pose >= 1");
    if (p.dirichlet_concentration <= 0.0)
        throw InvalidParams("random object: dirichlet_concentration must be > 0");
    if (p.quality_alpha <= 0.0 || p.quality_beta <= 0.0)
        throw InvalidParams("random object: quality shape parameters must be > 0");
    if (p.eps_floor <= 0.0 || p.eps_floor > 1.0)
        throw InvalidParams("random object: eps_floor must be in (0, 1]");
    if (p.topple_mass < 0.0 || p.topple_mass >= 1.0)
        throw InvalidParams("random object: topple_mass must be in [0, 1)");
    if (p.topple_density < 0)
        throw InvalidParams("random object: topple_density must be >= 0");
}

inline ObjectSpec gen_random_object(const RandomObjectParams& p, Rng& rng) {
    validate(p);
    const int n = p.n_poses;
    const int k = p.grasps_per_pose;

    ObjectSpec spec;
    spec.n_poses = n;
    spec.grasps_per_pose = k;
    spec.label = "rand-n" + std::to_string(n) + "-k" + std::to_string(k);

    spec.landing_probs = rng.dirichlet(n, p.dirichlet_concentration);

    spec.grasp_quality.assign(n, std::vector<double>(k, 0.0));
    for (int s = 0; s < n; ++s) {
        auto& row = spec.grasp_quality[s];
        for (int a = 0; a < k; ++a) row[a] = rng.beta(p.quality_alpha, p.quality_beta);
        if (*std::max_element(row.begin(), row.end()) < p.eps_floor)
            row[rng.uniform_int(k)] = rng.uniform(p.eps_floor, 1.0);
    }

    spec.topple_matrix.assign(n, std::vector<double>(n, 0.0));
    const int density = std::min(p.topple_density, n - 1);
    for (int s = 0; s < n; ++s) {
        auto& row = spec.topple_matrix[s];
        if (p.topple_mass == 0.0 || density == 0) {
            row[s] = 1.0;
            continue;
        }
        row[s] = 1.0 - p.topple_mass;
        // sample `density` distinct targets != s with exponential weights
        std::vector<int> targets;
        for (int t = 0; t < n; ++t)
            if (t != s) targets.push_back(t);
        for (int i = 0; i < density; ++i)
            std::swap(targets[i], targets[i + rng.uniform_int(static_cast<int>(targets.size()) - i)]);
        std::vector<double> w(density);
        double w_sum = 0.0;
        for (auto& v : w) {
            v = -std::log(1.0 - rng.uniform());
            w_sum += v;
        }
        for (int i = 0; i < density; ++i) row[targets[i]] = p.topple_mass * w[i] / w_sum;
    }
    return validate_object(std::move(spec));
}

/// Synthetic stand-in for a general-purpose planner's predicted qualities:
/// q = fidelity * phi + (1 - fidelity) * noise, clamped to [0,1]. Fidelity 1
/// reproduces the ground truth; fidelity 0 is pure noise.
inline std::vector<std::vector<double>> gen_prior(const ObjectSpec& spec, double fidelity,
                                                  Rng& rng) {
    if (fidelity < 0.0 || fidelity > 1.0)
        throw InvalidParams("gen_prior: fidelity must be in [0, 1]");
    std::vector<std::vector<double>> q(spec.n_poses,
                                       std::vector<double>(spec.grasps_per_pose, 0.0));
    for (int s = 0; s < spec.n_poses; ++s)
        for (int a = 0; a < spec.grasps_per_pose; ++a)
            q[s][a] = std::clamp(fidelity * spec.grasp_quality[s][a] +
                                     (1.0 - fidelity) * rng.uniform(),
                                 0.0, 1.0);
    return q;
}

/// Copy of `spec` with a synthetic prior of the given fidelity attached.
inline ObjectSpec with_prior(ObjectSpec spec, double fidelity, Rng& rng) {
    spec.prior_quality = gen_prior(spec, fidelity, rng);
    return spec;
}

} // namespace graspx
