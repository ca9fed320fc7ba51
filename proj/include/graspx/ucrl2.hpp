#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "graspx/policies.hpp"

namespace graspx {

/// Plausible-MDP model for extended value iteration: point estimates plus
/// confidence radii (scalar for rewards, L1 for transition rows), flattened
/// row-major over (state, action).
struct EviModel {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<double> r_hat;     // [s * A + a]
    std::vector<double> r_radius;  // [s * A + a]
    std::vector<double> p_hat;     // [(s * A + a) * S + s']
    std::vector<double> p_radius;  // [s * A + a]
};

struct EviResult {
    std::vector<int> policy;
    std::vector<double> u;
    bool converged = false;
    std::size_t sweeps = 0;
};

/// Value iteration over the optimistic MDP: each sweep picks, per (s,a), the
/// transition vector inside the L1 ball that maximizes expected value
/// (extra mass on the best state, shaved from the worst), and the reward at
/// the top of its interval capped at 1. Iterates the damped update
/// u <- u + (Lu - u)/2 (same optimal policy, guaranteed aperiodic) until
/// span(Lu - u) < span_tol.
inline EviResult extended_value_iteration(const EviModel& m, double span_tol,
                                          std::size_t sweep_cap,
                                          std::vector<double> warm_start = {}) {
    const std::size_t s_count = m.n_states;
    const std::size_t a_count = m.n_actions;

    EviResult res;
    res.u = warm_start.size() == s_count ? std::move(warm_start)
                                         : std::vector<double>(s_count, 0.0);
    res.policy.assign(s_count, 0);

    std::vector<std::size_t> order(s_count);
    std::vector<double> q(s_count);
    std::vector<double> lu(s_count);

    for (res.sweeps = 1; res.sweeps <= sweep_cap; ++res.sweeps) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return res.u[a] > res.u[b]; });

        for (std::size_t s = 0; s < s_count; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            int best_a = 0;
            for (std::size_t a = 0; a < a_count; ++a) {
                const std::size_t sa = s * a_count + a;
                const double* p = m.p_hat.data() + sa * s_count;
                q.assign(p, p + s_count);
                q[order.front()] = std::min(1.0, q[order.front()] + m.p_radius[sa] / 2.0);
                double total = std::accumulate(q.begin(), q.end(), 0.0);
                for (std::size_t l = s_count; l-- > 1 && total > 1.0;) {
                    const double cut = std::min(q[order[l]], total - 1.0);
                    q[order[l]] -= cut;
                    total -= cut;
                }
                double val = std::min(1.0, m.r_hat[sa] + m.r_radius[sa]);
                for (std::size_t t = 0; t < s_count; ++t) val += q[t] * res.u[t];
                if (val > best) {
                    best = val;
                    best_a = static_cast<int>(a);
                }
            }
            lu[s] = best;
            res.policy[s] = best_a;
        }

        double d_min = std::numeric_limits<double>::infinity();
        double d_max = -d_min;
        for (std::size_t s = 0; s < s_count; ++s) {
            const double d = lu[s] - res.u[s];
            d_min = std::min(d_min, d);
            d_max = std::max(d_max, d);
        }
        if (d_max - d_min < span_tol) {
            res.converged = true;
            return res;
        }

        for (std::size_t s = 0; s < s_count; ++s) res.u[s] += 0.5 * (lu[s] - res.u[s]);
        const double floor = *std::min_element(res.u.begin(), res.u.end());
        for (double& v : res.u) v -= floor;
    }
    res.sweeps = sweep_cap;
    return res;
}

struct Ucrl2Config {
    double confidence_delta = 0.05;
    std::size_t evi_sweep_cap = 10000;
};

/// Tabular optimistic RL over the full grasp MDP. Follows the standard
/// episode scheme: replan by extended value iteration whenever some
/// state-action pair doubles its pre-episode visit count, with confidence
/// radii shrinking as 1/sqrt(visits). The state space grows lazily as poses
/// are discovered; confidence sets range over discovered poses only.
class Ucrl2Policy final : public Policy {
public:
    explicit Ucrl2Policy(int grasps_per_pose, Ucrl2Config cfg = {}, std::string name = "ucrl2")
        : k_(grasps_per_pose), cfg_(cfg), name_(std::move(name)) {}

    int decide(int pose, std::uint64_t, Rng&) override {
        const int s = slot_for(pose);
        if (replan_pending_) plan_episode();
        return episode_policy_[s];
    }

    void update(int pose, int grasp, int reward, int next_pose) override {
        const int s = slot_for(pose);
        const int t = slot_for(next_pose);
        const std::size_t sa = static_cast<std::size_t>(s) * k_ + grasp;
        n_in_[sa] += 1;
        r_sum_[sa] += reward;
        trans_[sa][t] += 1;
        t_total_ += 1;
        if (n_in_[sa] >= std::max<std::uint64_t>(1, n_pre_[sa])) replan_pending_ = true;
    }

    const std::string& name() const override { return name_; }

    /// Folds the finished episode's counts into the model, rebuilds the
    /// confidence region, and runs extended value iteration with stopping
    /// span 1/sqrt(total steps). On non-convergence the previous episode
    /// policy is kept (new poses adopt the capped run's choice).
    void plan_episode() {
        const std::size_t s_count = pose_ids_.size();
        const std::size_t pairs = s_count * k_;
        for (std::size_t sa = 0; sa < pairs; ++sa) {
            n_pre_[sa] += n_in_[sa];
            n_in_[sa] = 0;
        }

        EviModel m;
        m.n_states = s_count;
        m.n_actions = static_cast<std::size_t>(k_);
        m.r_hat.assign(pairs, 0.0);
        m.r_radius.assign(pairs, 0.0);
        m.p_hat.assign(pairs * s_count, 0.0);
        m.p_radius.assign(pairs, 0.0);

        const double t_k = static_cast<double>(std::max<std::uint64_t>(1, t_total_));
        const double s_d = static_cast<double>(s_count);
        const double a_d = static_cast<double>(k_);
        const double log_r = std::log(2.0 * s_d * a_d * t_k / cfg_.confidence_delta);
        const double log_p = std::log(2.0 * a_d * t_k / cfg_.confidence_delta);

        for (std::size_t sa = 0; sa < pairs; ++sa) {
            const double n = static_cast<double>(std::max<std::uint64_t>(1, n_pre_[sa]));
            m.r_radius[sa] = std::sqrt(7.0 * log_r / (2.0 * n));
            m.p_radius[sa] = std::sqrt(14.0 * s_d * log_p / n);
            if (n_pre_[sa] == 0) {
                for (std::size_t t = 0; t < s_count; ++t) m.p_hat[sa * s_count + t] = 1.0 / s_d;
                continue;
            }
            m.r_hat[sa] = r_sum_[sa] / n;
            for (std::size_t t = 0; t < s_count; ++t)
                m.p_hat[sa * s_count + t] = static_cast<double>(trans_[sa][t]) / n;
        }

        u_.resize(s_count,
                  u_.empty() ? 0.0 : *std::max_element(u_.begin(), u_.end()));
        EviResult res = extended_value_iteration(m, 1.0 / std::sqrt(t_k), cfg_.evi_sweep_cap,
                                                 std::move(u_));
        u_ = res.u;
        if (!res.converged) {
            ++evi_failures_;
            for (std::size_t s = 0; s < s_count; ++s)
                if (s < episode_policy_.size()) res.policy[s] = episode_policy_[s];
        }
        episode_policy_ = std::move(res.policy);
        replan_pending_ = false;
        ++episodes_;
    }

    std::size_t discovered_poses() const { return pose_ids_.size(); }
    std::size_t episodes() const { return episodes_; }
    std::size_t evi_failures() const { return evi_failures_; }
    double confidence_delta() const { return cfg_.confidence_delta; }

    std::uint64_t visit_count(int pose, int grasp) const {
        const int s = slot_of(pose);
        if (s < 0) return 0;
        const std::size_t sa = static_cast<std::size_t>(s) * k_ + grasp;
        return n_pre_[sa] + n_in_[sa];
    }

    std::uint64_t transition_count(int pose, int grasp, int next_pose) const {
        const int s = slot_of(pose);
        const int t = slot_of(next_pose);
        if (s < 0 || t < 0) return 0;
        return trans_[static_cast<std::size_t>(s) * k_ + grasp][t];
    }

    double reward_sum(int pose, int grasp) const {
        const int s = slot_of(pose);
        if (s < 0) return 0.0;
        return r_sum_[static_cast<std::size_t>(s) * k_ + grasp];
    }

private:
    int slot_of(int pose) const {
        const auto it = pose_slot_.find(pose);
        return it == pose_slot_.end() ? -1 : it->second;
    }

    int slot_for(int pose) {
        const auto it = pose_slot_.find(pose);
        if (it != pose_slot_.end()) return it->second;
        const int s = static_cast<int>(pose_ids_.size());
        pose_ids_.push_back(pose);
        pose_slot_.emplace(pose, s);
        n_pre_.resize(pose_ids_.size() * k_, 0);
        n_in_.resize(pose_ids_.size() * k_, 0);
        r_sum_.resize(pose_ids_.size() * k_, 0.0);
        trans_.resize(pose_ids_.size() * k_);
        for (auto& row : trans_) row.resize(pose_ids_.size(), 0);
        episode_policy_.resize(pose_ids_.size(), 0);
        replan_pending_ = true; // new pose: the episode policy must cover it
        return s;
    }

    int k_;
    Ucrl2Config cfg_;
    std::string name_;

    std::vector<int> pose_ids_;            // slot -> original pose index
    std::unordered_map<int, int> pose_slot_;
    std::vector<std::uint64_t> n_pre_;     // [slot * K + a], before current episode
    std::vector<std::uint64_t> n_in_;      // [slot * K + a], within current episode
    std::vector<double> r_sum_;
    std::vector<std::vector<std::uint64_t>> trans_; // [slot * K + a][slot']
    std::vector<int> episode_policy_;
    std::vector<double> u_;
    std::uint64_t t_total_ = 0;
    std::size_t episodes_ = 0;
    std::size_t evi_failures_ = 0;
    bool replan_pending_ = true;
};

} // namespace graspx
