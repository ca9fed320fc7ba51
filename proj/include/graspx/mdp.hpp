#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "graspx/linalg.hpp"
#include "graspx/object_spec.hpp"
#include "graspx/rng.hpp"

namespace graspx {

enum class Cause : std::uint8_t {
    GraspedAndReleased, // grasp succeeded; pose redrawn from landing probabilities
    Toppled,            // grasp failed and the object fell into a different pose
    Stayed,             // grasp failed and the pose did not change
};

inline const char* to_string(Cause c) {
    switch (c) {
    case Cause::GraspedAndReleased: return "grasped";
    case Cause::Toppled: return "toppled";
    case Cause::Stayed: return "stayed";
    }
    return "?";
}

/// One environment transition: reward 1 iff the grasp succeeded, in which
/// case the next pose is a fresh draw from the landing distribution;
/// otherwise the next pose follows the topple row of the current pose.
struct TransitionOutcome {
    int reward = 0;
    int next_pose = 0;
    Cause cause = Cause::Stayed;
};

/// Samples one grasp attempt. Draw order is fixed (success Bernoulli first,
/// then the categorical pose draw) so traces replay bit-identically from the
/// same stream.
inline TransitionOutcome step(const ObjectSpec& spec, int pose, int grasp, Rng& rng) {
    if (pose < 0 || pose >= spec.n_poses)
        throw IndexOutOfRange("step: pose " + std::to_string(pose) + " out of range");
    if (grasp < 0 || grasp >= spec.grasps_per_pose)
        throw IndexOutOfRange("step: grasp " + std::to_string(grasp) + " out of range");

    TransitionOutcome out;
    if (rng.bernoulli(spec.grasp_quality[pose][grasp])) {
        out.reward = 1;
        out.next_pose = rng.categorical(spec.landing_probs);
        out.cause = Cause::GraspedAndReleased;
    } else {
        out.reward = 0;
        out.next_pose = rng.categorical(spec.topple_matrix[pose]);
        out.cause = out.next_pose == pose ? Cause::Stayed : Cause::Toppled;
    }
    return out;
}

/// Pose-to-pose transition matrix under a fixed deterministic policy:
/// P[s,s'] = phi(s, a) * lambda(s') + (1 - phi(s, a)) * delta(s, s')
/// with a = policy_map[s].
inline Matrix induced_chain(const ObjectSpec& spec, std::span<const int> policy_map) {
    const int n = spec.n_poses;
    if (static_cast<int>(policy_map.size()) != n)
        throw DimensionMismatch("induced_chain: policy_map must cover every pose");
    Matrix p(n, n);
    for (int s = 0; s < n; ++s) {
        const int a = policy_map[s];
        if (a < 0 || a >= spec.grasps_per_pose)
            throw IndexOutOfRange("induced_chain: grasp index out of range for pose " +
                                  std::to_string(s));
        const double phi = spec.grasp_quality[s][a];
        for (int t = 0; t < n; ++t)
            p(s, t) = phi * spec.landing_probs[t] + (1.0 - phi) * spec.topple_matrix[s][t];
    }
    return p;
}

/// Greedy (highest success probability) grasp per pose, lowest index on ties.
inline std::vector<int> greedy_policy(const ObjectSpec& spec) {
    std::vector<int> pi(spec.n_poses, 0);
    for (int s = 0; s < spec.n_poses; ++s) {
        const auto& row = spec.grasp_quality[s];
        pi[s] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return pi;
}

/// Drops poses whose best grasp quality is below quality_floor or whose
/// landing probability is below mass_floor, then renormalizes. Topple rows
/// redistribute the removed mass proportionally over surviving entries; a
/// row with no surviving mass becomes a self-loop. Returns the reduced spec
/// and the removed pose indices (in original numbering).
///
/// Idempotent: survivors keep best quality >= quality_floor, and
/// renormalization only raises landing probabilities.
inline std::pair<ObjectSpec, std::vector<int>>
remove_dead_poses(const ObjectSpec& spec, double quality_floor = 1e-9, double mass_floor = 1e-3) {
    const int n = spec.n_poses;
    std::vector<int> keep;
    std::vector<int> removed;
    for (int s = 0; s < n; ++s) {
        const auto& row = spec.grasp_quality[s];
        const double best = *std::max_element(row.begin(), row.end());
        if (best < quality_floor || spec.landing_probs[s] < mass_floor)
            removed.push_back(s);
        else
            keep.push_back(s);
    }
    if (keep.empty()) throw AllPosesRemoved("remove_dead_poses: no pose survives the floors");
    if (removed.empty()) return {spec, removed};

    ObjectSpec out;
    out.n_poses = static_cast<int>(keep.size());
    out.grasps_per_pose = spec.grasps_per_pose;
    out.label = spec.label;

    double mass = 0.0;
    for (int s : keep) mass += spec.landing_probs[s];
    if (mass <= 0.0) throw AllPosesRemoved("remove_dead_poses: surviving poses carry zero mass");
    out.landing_probs.reserve(keep.size());
    for (int s : keep) out.landing_probs.push_back(spec.landing_probs[s] / mass);

    for (std::size_t i = 0; i < keep.size(); ++i) {
        out.grasp_quality.push_back(spec.grasp_quality[keep[i]]);
        std::vector<double> row;
        row.reserve(keep.size());
        double row_mass = 0.0;
        for (int t : keep) {
            row.push_back(spec.topple_matrix[keep[i]][t]);
            row_mass += row.back();
        }
        if (row_mass <= 0.0) {
            std::fill(row.begin(), row.end(), 0.0);
            row[i] = 1.0; // nothing to topple to: treat as Stayed
        } else {
            for (double& v : row) v /= row_mass;
        }
        out.topple_matrix.push_back(std::move(row));
    }
    if (spec.prior_quality) {
        std::vector<std::vector<double>> prior;
        prior.reserve(keep.size());
        for (int s : keep) prior.push_back((*spec.prior_quality)[s]);
        out.prior_quality = std::move(prior);
    }
    return {validate_object(std::move(out)), removed};
}

/// Diagnostics for the reachability assumptions:
///  - epsilon: min over poses of the best grasp's success probability
///  - lambda_min: smallest landing probability
///  - assumption4_violation: max over s != s' of delta(s,s') - epsilon * lambda(s');
///    <= 0 means toppling never beats grasp-and-release into any pose
///  - sink_poses: poses that are inescapable or unreachable under the
///    greedy policy + toppling; empty iff that induced chain is irreducible
struct AssumptionReport {
    double epsilon = 0.0;
    double lambda_min = 0.0;
    double assumption4_violation = 0.0;
    std::vector<int> sink_poses;
};

inline AssumptionReport assumption_report(const ObjectSpec& spec) {
    const int n = spec.n_poses;
    AssumptionReport rep;

    rep.epsilon = 1.0;
    for (const auto& row : spec.grasp_quality)
        rep.epsilon = std::min(rep.epsilon, *std::max_element(row.begin(), row.end()));
    rep.lambda_min =
        *std::min_element(spec.landing_probs.begin(), spec.landing_probs.end());

    // max over ordered pairs s != s'; 0 by convention when N = 1
    rep.assumption4_violation = n > 1 ? -std::numeric_limits<double>::infinity() : 0.0;
    for (int s = 0; s < n; ++s)
        for (int t = 0; t < n; ++t) {
            if (s == t) continue;
            rep.assumption4_violation =
                std::max(rep.assumption4_violation,
                         spec.topple_matrix[s][t] - rep.epsilon * spec.landing_probs[t]);
        }

    // Sink detection on the support graph of the greedy-policy chain union
    // the toppling support. Let R be the set of poses occupiable from the
    // landing support. A pose is a sink if it lies outside R (unreachable)
    // or cannot itself reach all of R (inescapable: the process gets stuck
    // in a strict subset once there). Empty iff the chain restricted to the
    // occupiable world is irreducible over all poses.
    const Matrix p = induced_chain(spec, greedy_policy(spec));
    auto adj = support_graph(p);
    for (int s = 0; s < n; ++s)
        for (int t = 0; t < n; ++t)
            if (spec.topple_matrix[s][t] > 0.0 &&
                std::find(adj[s].begin(), adj[s].end(), t) == adj[s].end())
                adj[s].push_back(t);

    std::vector<bool> occupiable(n, false);
    for (int s = 0; s < n; ++s) {
        if (spec.landing_probs[s] <= 0.0 || occupiable[s]) continue;
        const auto seen = reachable_from(adj, s);
        for (int t = 0; t < n; ++t)
            if (seen[t]) occupiable[t] = true;
    }
    for (int s = 0; s < n; ++s) {
        if (!occupiable[s]) {
            rep.sink_poses.push_back(s);
            continue;
        }
        const auto seen = reachable_from(adj, s);
        for (int t = 0; t < n; ++t)
            if (occupiable[t] && !seen[t]) {
                rep.sink_poses.push_back(s);
                break;
            }
    }
    return rep;
}

} // namespace graspx
