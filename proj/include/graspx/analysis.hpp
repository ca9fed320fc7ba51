#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "graspx/linalg.hpp"
#include "graspx/mdp.hpp"
#include "graspx/object_spec.hpp"
#include "graspx/policy_factory.hpp"
#include "graspx/trace.hpp"

namespace graspx {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Stationary distribution of an irreducible row-stochastic matrix, by a
/// dense solve of the balance equations with the normalization constraint
/// replacing one row.
inline std::vector<double> stationary_distribution(const Matrix& p) {
    const std::size_t n = p.rows();
    if (p.cols() != n) throw DimensionMismatch("stationary_distribution: matrix not square");
    if (n == 1) return {1.0};

    Matrix a(n, n);
    std::vector<double> b(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) = p(j, i) - (i == j ? 1.0 : 0.0);
    for (std::size_t j = 0; j < n; ++j) a(n - 1, j) = 1.0;
    b[n - 1] = 1.0;

    std::vector<double> pi = solve_dense(std::move(a), std::move(b));
    double total = 0.0;
    for (double& v : pi) {
        if (v < 0.0) {
            if (v < -1e-9) throw SingularSystem("stationary_distribution: chain not irreducible");
            v = 0.0;
        }
        total += v;
    }
    for (double& v : pi) v /= total;

    for (std::size_t j = 0; j < n; ++j) {
        double flow = 0.0;
        for (std::size_t i = 0; i < n; ++i) flow += pi[i] * p(i, j);
        if (std::abs(flow - pi[j]) > 1e-8)
            throw SingularSystem("stationary_distribution: balance residual too large");
    }
    return pi;
}

/// Expected hitting times T[s][s'] of a Markov chain: diagonal 0, infinity
/// where s' is hit with probability < 1 from s. Finite entries solve
/// h_s = 1 + sum_{u != s'} P[s,u] h_u by a dense linear solve per target.
inline Matrix hitting_times(const Matrix& p) {
    const std::size_t n = p.rows();
    if (p.cols() != n) throw DimensionMismatch("hitting_times: matrix not square");

    const auto adj = support_graph(p);
    std::vector<std::vector<bool>> reach(n);
    for (std::size_t s = 0; s < n; ++s) reach[s] = reachable_from(adj, static_cast<int>(s));

    Matrix t(n, n, kInf);
    for (std::size_t target = 0; target < n; ++target) {
        t(target, target) = 0.0;

        // adjacency with the target's outgoing edges removed: walks stop there
        auto trunc = adj;
        trunc[target].clear();

        // T(s -> target) is finite iff the walk hits the target almost
        // surely, i.e. every state reachable from s while avoiding the
        // target can itself still reach the target
        std::vector<std::size_t> finite;
        std::vector<int> idx(n, -1);
        for (std::size_t s = 0; s < n; ++s) {
            if (s == target || !reach[s][target]) continue;
            const auto avoid = reachable_from(trunc, static_cast<int>(s));
            bool escapes = false;
            for (std::size_t u = 0; u < n && !escapes; ++u)
                if (avoid[u] && !reach[u][target]) escapes = true;
            if (!escapes) {
                idx[s] = static_cast<int>(finite.size());
                finite.push_back(s);
            }
        }
        if (finite.empty()) continue;

        Matrix a(finite.size(), finite.size());
        std::vector<double> b(finite.size(), 1.0);
        for (std::size_t i = 0; i < finite.size(); ++i)
            for (std::size_t j = 0; j < finite.size(); ++j)
                a(i, j) = (i == j ? 1.0 : 0.0) - p(finite[i], finite[j]);
        const auto h = solve_dense(std::move(a), std::move(b));
        for (std::size_t i = 0; i < finite.size(); ++i) t(finite[i], target) = h[i];
    }
    return t;
}

/// Stationary distribution plus the full expected-hitting-time matrix of an
/// induced pose chain.
struct ChainAnalysis {
    std::vector<double> stationary;
    Matrix hitting;
};

inline ChainAnalysis analyze_chain(const Matrix& p) {
    return ChainAnalysis{stationary_distribution(p), hitting_times(p)};
}

namespace detail {

/// Union-over-actions support: edge s -> u iff some grasp makes the
/// transition possible.
inline std::vector<std::vector<int>> action_union_graph(const ObjectSpec& spec) {
    const int n = spec.n_poses;
    std::vector<std::vector<int>> adj(n);
    for (int s = 0; s < n; ++s) {
        const auto& row = spec.grasp_quality[s];
        const double phi_max = *std::max_element(row.begin(), row.end());
        const double phi_min = *std::min_element(row.begin(), row.end());
        for (int u = 0; u < n; ++u) {
            const bool via_grasp = phi_max > 0.0 && spec.landing_probs[u] > 0.0;
            const bool via_topple = phi_min < 1.0 && spec.topple_matrix[s][u] > 0.0;
            if (via_grasp || via_topple) adj[s].push_back(u);
        }
    }
    return adj;
}

/// Min-over-policies expected hitting times to one target pose, by
/// stochastic-shortest-path value iteration. The Bellman update
///   h(s) = min_a [ 1 + sum_{u != target} P(u|s,a) h(u) ]
/// reduces to a choice between the pose's best and worst grasp because the
/// action enters the expectation linearly through phi.
inline std::vector<double> min_hitting_to(const ObjectSpec& spec, int target, double tol,
                                          std::size_t sweep_cap) {
    const int n = spec.n_poses;
    std::vector<double> phi_max(n), phi_min(n);
    for (int s = 0; s < n; ++s) {
        const auto& row = spec.grasp_quality[s];
        phi_max[s] = *std::max_element(row.begin(), row.end());
        phi_min[s] = *std::min_element(row.begin(), row.end());
    }

    std::vector<double> h(n, 0.0);
    for (std::size_t sweep = 0; sweep < sweep_cap; ++sweep) {
        double land = 0.0; // sum_{u != target} lambda_u h(u)
        for (int u = 0; u < n; ++u)
            if (u != target) land += spec.landing_probs[u] * h[u];

        double change = 0.0;
        for (int s = 0; s < n; ++s) {
            if (s == target) continue;
            double topple = 0.0;
            for (int u = 0; u < n; ++u)
                if (u != target) topple += spec.topple_matrix[s][u] * h[u];
            // 1 + topple + phi * (land - topple): pick phi extreme by sign
            const double phi = land <= topple ? phi_max[s] : phi_min[s];
            const double next = 1.0 + topple + phi * (land - topple);
            change = std::max(change, std::abs(next - h[s]));
            h[s] = next;
        }
        if (change < tol) return h;
    }
    throw Error("min_hitting_to: value iteration did not converge");
}

} // namespace detail

/// MDP diameter: max over ordered pose pairs of the min-over-policies
/// expected hitting time. Throws Unreachable when some pose cannot reach
/// some other pose under any policy.
inline double diameter(const ObjectSpec& spec, double tol = 1e-10,
                       std::size_t sweep_cap = 20'000'000) {
    const int n = spec.n_poses;
    if (n == 1) return 0.0;

    const auto adj = detail::action_union_graph(spec);
    std::vector<std::vector<bool>> reach(n);
    for (int s = 0; s < n; ++s) reach[s] = reachable_from(adj, s);
    for (int s = 0; s < n; ++s)
        for (int u = 0; u < n; ++u)
            if (!reach[s][u])
                throw Unreachable("diameter: pose " + std::to_string(u) +
                                  " unreachable from pose " + std::to_string(s));

    double d = 0.0;
    for (int target = 0; target < n; ++target) {
        const auto h = detail::min_hitting_to(spec, target, tol, sweep_cap);
        for (int s = 0; s < n; ++s)
            if (s != target) d = std::max(d, h[s]);
    }
    return d;
}

/// Closed-form diameter upper bound 1 / (epsilon * lambda_min).
inline double diameter_bound(const ObjectSpec& spec) {
    const AssumptionReport rep = assumption_report(spec);
    if (rep.epsilon <= 0.0 || rep.lambda_min <= 0.0)
        throw DegenerateBound("diameter_bound: requires epsilon > 0 and lambda_min > 0");
    return 1.0 / (rep.epsilon * rep.lambda_min);
}

/// Gain and policy from relative value iteration over the full MDP
/// (maximizing average reward). Uses the damped update h <- h + (Lh - h)/2,
/// which preserves optimal policies and gain while forcing aperiodicity.
struct AvgRewardVi {
    double gain = 0.0;
    std::vector<int> policy;
    bool converged = false;
    std::size_t sweeps = 0;
};

inline AvgRewardVi average_reward_value_iteration(const ObjectSpec& spec, double span_tol = 1e-9,
                                                  std::size_t sweep_cap = 1'000'000) {
    const int n = spec.n_poses;
    const int k = spec.grasps_per_pose;
    AvgRewardVi out;
    out.policy.assign(n, 0);

    std::vector<double> h(n, 0.0), lh(n, 0.0);
    for (out.sweeps = 1; out.sweeps <= sweep_cap; ++out.sweeps) {
        double land = 0.0;
        for (int u = 0; u < n; ++u) land += spec.landing_probs[u] * h[u];

        for (int s = 0; s < n; ++s) {
            double topple = 0.0;
            for (int u = 0; u < n; ++u) topple += spec.topple_matrix[s][u] * h[u];
            // value of grasp a: topple + phi_{s,a} * (1 + land - topple)
            const double slope = 1.0 + land - topple;
            double best = -kInf;
            int best_a = 0;
            for (int a = 0; a < k; ++a) {
                const double v = topple + spec.grasp_quality[s][a] * slope;
                if (v > best) {
                    best = v;
                    best_a = a;
                }
            }
            lh[s] = best;
            out.policy[s] = best_a;
        }

        double d_min = kInf, d_max = -kInf;
        for (int s = 0; s < n; ++s) {
            const double d = lh[s] - h[s];
            d_min = std::min(d_min, d);
            d_max = std::max(d_max, d);
        }
        if (d_max - d_min < span_tol) {
            out.gain = 0.5 * (d_max + d_min);
            out.converged = true;
            return out;
        }
        for (int s = 0; s < n; ++s) h[s] += 0.5 * (lh[s] - h[s]);
        const double base = h[0];
        for (double& v : h) v -= base;
    }
    out.converged = false;
    return out;
}

/// Optimal limit average reward J* with the achieving policy. The greedy
/// policy is optimal whenever toppling never dominates grasp-and-release
/// (assumption4_violation <= 0); when that is violated, full value
/// iteration runs as well and the better of the two is returned.
struct OptimalAverageReward {
    double j_star = 0.0;
    std::vector<int> policy;
    double greedy_value = 0.0;
    bool vi_ran = false;
    bool vi_converged = false;
    double vi_value = std::numeric_limits<double>::quiet_NaN();
    bool differs = false; // value iteration beat the greedy policy
};

inline OptimalAverageReward optimal_average_reward(const ObjectSpec& spec) {
    const AssumptionReport rep = assumption_report(spec);
    if (!rep.sink_poses.empty())
        throw Unreachable("optimal_average_reward: object has sink poses");

    OptimalAverageReward out;
    out.policy = greedy_policy(spec);
    const Matrix p = induced_chain(spec, out.policy);
    const auto pi = stationary_distribution(p);
    for (int s = 0; s < spec.n_poses; ++s)
        out.greedy_value += pi[s] * spec.grasp_quality[s][out.policy[s]];
    out.j_star = out.greedy_value;

    if (rep.assumption4_violation > 0.0) {
        const AvgRewardVi vi = average_reward_value_iteration(spec);
        out.vi_ran = true;
        out.vi_converged = vi.converged;
        if (vi.converged) {
            out.vi_value = vi.gain;
            if (vi.gain > out.greedy_value + 1e-7) {
                out.j_star = vi.gain;
                out.policy = vi.policy;
                out.differs = true;
            }
        }
    }
    return out;
}

/// Per-pose slice of a trace: empirical occupancy and pose-local mean
/// reward, next to the occupancy the optimal policy would have.
struct PoseRegretEntry {
    int pose = 0;
    double occupancy = 0.0;
    double pose_avg_reward = 0.0;
    double optimal_occupancy = 0.0;
};

struct RegretCurve {
    double optimal_avg_reward = 0.0;
    std::vector<double> per_timestep_regret;
    std::vector<PoseRegretEntry> decomposition;
};

/// Regret of one trace against J*: entry t is J* minus the smoothed average
/// reward at t. The decomposition reports empirical pose occupancies and
/// pose-local reward rates against the optimal chain's stationary weights.
inline RegretCurve regret_curve(const TraceRecord& trace, const ObjectSpec& spec, int window) {
    if (trace.horizon() == 0) throw InvalidParams("regret_curve: empty trace");

    const OptimalAverageReward opt = optimal_average_reward(spec);
    RegretCurve out;
    out.optimal_avg_reward = opt.j_star;

    const auto smoothed = smooth(trace.rewards, window);
    out.per_timestep_regret.reserve(smoothed.size());
    for (double v : smoothed) out.per_timestep_regret.push_back(opt.j_star - v);

    const auto pi_star = stationary_distribution(induced_chain(spec, opt.policy));
    std::vector<std::uint64_t> visits(spec.n_poses, 0), wins(spec.n_poses, 0);
    for (std::size_t t = 0; t < trace.horizon(); ++t) {
        visits[trace.poses[t]] += 1;
        wins[trace.poses[t]] += trace.rewards[t];
    }
    for (int s = 0; s < spec.n_poses; ++s) {
        PoseRegretEntry e;
        e.pose = s;
        e.occupancy = static_cast<double>(visits[s]) / static_cast<double>(trace.horizon());
        e.pose_avg_reward =
            visits[s] ? static_cast<double>(wins[s]) / static_cast<double>(visits[s]) : 0.0;
        e.optimal_occupancy = pi_star[s];
        out.decomposition.push_back(e);
    }
    return out;
}

/// Closed-form upper bound on the expected number of grasps to visit every
/// pose: (K / epsilon) * sum_j 1 / (1 - sum of the j-1 largest landing
/// probabilities). Requires epsilon > 0 and every landing probability > 0.
inline double cover_time_bound(const ObjectSpec& spec, int grasps_per_pose, double epsilon) {
    if (epsilon <= 0.0) throw DegenerateBound("cover_time_bound: epsilon must be > 0");
    std::vector<double> lam = spec.landing_probs;
    std::sort(lam.begin(), lam.end(), std::greater<>());

    double total = 0.0;
    double cum = 0.0; // sum of the largest j-1 probabilities
    for (std::size_t j = 0; j < lam.size(); ++j) {
        const double denom = 1.0 - cum;
        if (denom <= 1e-15)
            throw DegenerateBound("cover_time_bound: zero landing probability makes the bound "
                                  "infinite");
        total += 1.0 / denom;
        cum += lam[j];
    }
    return static_cast<double>(grasps_per_pose) / epsilon * total;
}

inline double cover_time_bound(const ObjectSpec& spec) {
    return cover_time_bound(spec, spec.grasps_per_pose, assumption_report(spec).epsilon);
}

struct CoverTimeEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t episodes = 0;
};

/// Monte Carlo cover time under a named policy: episodes start from a fresh
/// landing draw (which counts as step 1) and run until every pose has been
/// seen. A fresh policy instance is used per episode.
inline CoverTimeEstimate cover_time_mc(const ObjectSpec& spec, const std::string& policy_name,
                                       std::size_t episodes, Rng& rng,
                                       std::uint64_t step_cap = 10'000'000) {
    if (episodes == 0) throw InvalidParams("cover_time_mc: need at least one episode");
    const AssumptionReport rep = assumption_report(spec);
    if (!rep.sink_poses.empty()) throw Unreachable("cover_time_mc: object has sink poses");

    const int n = spec.n_poses;
    double sum = 0.0, sum_sq = 0.0;
    std::vector<bool> visited(n);
    for (std::size_t e = 0; e < episodes; ++e) {
        const auto policy = make_policy(policy_name, spec);
        std::fill(visited.begin(), visited.end(), false);
        int pose = rng.categorical(spec.landing_probs);
        visited[pose] = true;
        int left = n - 1;
        std::uint64_t grasps = 0;
        while (left > 0) {
            if (grasps >= step_cap)
                throw EpisodeCap("cover_time_mc: episode exceeded step cap " +
                                 std::to_string(step_cap));
            const int a = policy->decide(pose, grasps, rng);
            const TransitionOutcome o = step(spec, pose, a, rng);
            policy->update(pose, a, o.reward, o.next_pose);
            ++grasps;
            pose = o.next_pose;
            if (!visited[pose]) {
                visited[pose] = true;
                --left;
            }
        }
        const double cover = 1.0 + static_cast<double>(grasps);
        sum += cover;
        sum_sq += cover * cover;
    }

    CoverTimeEstimate est;
    est.episodes = episodes;
    est.mean = sum / static_cast<double>(episodes);
    if (episodes > 1) {
        const double var =
            std::max(0.0, (sum_sq - sum * sum / static_cast<double>(episodes)) /
                              static_cast<double>(episodes - 1));
        est.std_error = std::sqrt(var / static_cast<double>(episodes));
    }
    return est;
}

/// Flat per-object report mirroring the quantities printed above each
/// learning curve: assumption diagnostics, diameter and its bound, J*, and
/// (when sampled) the cover-time bound and Monte Carlo estimate.
struct AnalysisReport {
    std::string label;
    double epsilon = 0.0;
    double lambda_min = 0.0;
    double assumption4_violation = 0.0;
    std::vector<int> sink_poses;
    double diameter = std::numeric_limits<double>::quiet_NaN();
    double diameter_bound = std::numeric_limits<double>::quiet_NaN();
    double j_star = std::numeric_limits<double>::quiet_NaN();
    double cover_bound = std::numeric_limits<double>::quiet_NaN();
    double cover_mc_mean = std::numeric_limits<double>::quiet_NaN();
    double cover_mc_se = std::numeric_limits<double>::quiet_NaN();
};

/// Computes everything that is well-defined for the object: diameter and J*
/// are skipped (left NaN) when sink poses make them meaningless.
inline AnalysisReport analyze_object(const ObjectSpec& spec) {
    AnalysisReport r;
    r.label = spec.label;
    const AssumptionReport rep = assumption_report(spec);
    r.epsilon = rep.epsilon;
    r.lambda_min = rep.lambda_min;
    r.assumption4_violation = rep.assumption4_violation;
    r.sink_poses = rep.sink_poses;
    if (rep.epsilon > 0.0 && rep.lambda_min > 0.0)
        r.diameter_bound = 1.0 / (rep.epsilon * rep.lambda_min);
    if (rep.sink_poses.empty()) {
        r.diameter = diameter(spec);
        r.j_star = optimal_average_reward(spec).j_star;
    }
    return r;
}

inline nlohmann::json to_json(const AnalysisReport& r) {
    nlohmann::json j;
    j["label"] = r.label;
    j["epsilon"] = r.epsilon;
    j["lambda_min"] = r.lambda_min;
    j["assumption4_violation"] = r.assumption4_violation;
    j["sink_poses"] = r.sink_poses;
    j["diameter"] = r.diameter;
    j["diameter_bound"] = r.diameter_bound;
    j["j_star"] = r.j_star;
    j["cover_bound"] = r.cover_bound;
    j["cover_mc_mean"] = r.cover_mc_mean;
    j["cover_mc_se"] = r.cover_mc_se;
    return j;
}

} // namespace graspx
