#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "graspx/mdp.hpp"
#include "graspx/object_spec.hpp"
#include "graspx/rng.hpp"

namespace graspx {

/// Beta posterior over one grasp's Bernoulli success probability.
struct BetaArm {
    double alpha = 1.0;
    double beta = 1.0;
    double mean() const { return alpha / (alpha + beta); }
};

/// Pull/success counts for one grasp under UCB1.
struct UcbArm {
    std::uint64_t pulls = 0;
    std::uint64_t successes = 0;
};

namespace detail {

/// Uniform choice among the indices maximizing `score`.
template <typename F>
int argmax_random_tie(int n, F&& score, Rng& rng) {
    double best = -std::numeric_limits<double>::infinity();
    int count = 0;
    int chosen = 0;
    // reservoir over ties keeps this a single pass
    for (int i = 0; i < n; ++i) {
        const double v = score(i);
        if (v > best) {
            best = v;
            count = 1;
            chosen = i;
        } else if (v == best) {
            ++count;
            if (rng.uniform_int(count) == 0) chosen = i;
        }
    }
    return chosen;
}

} // namespace detail

/// UCB1 over one pose's arms with the pose-local exploration clock t_pose
/// (number of grasps attempted in this pose, counting the current one).
/// Unpulled arms are forced first, uniformly at random; afterwards the
/// index is successes/pulls + sqrt(2 ln(t_pose) / pulls), ties uniform.
inline int ucb1_decide(std::span<const UcbArm> arms, std::uint64_t t_pose, Rng& rng) {
    int n_unpulled = 0;
    int chosen = -1;
    for (int i = 0; i < static_cast<int>(arms.size()); ++i) {
        if (arms[i].pulls != 0) continue;
        ++n_unpulled;
        if (rng.uniform_int(n_unpulled) == 0) chosen = i;
    }
    if (chosen >= 0) return chosen;

    const double log_t = std::log(static_cast<double>(std::max<std::uint64_t>(t_pose, 1)));
    return detail::argmax_random_tie(
        static_cast<int>(arms.size()),
        [&](int i) {
            const auto& a = arms[i];
            const double p = static_cast<double>(a.pulls);
            return static_cast<double>(a.successes) / p + std::sqrt(2.0 * log_t / p);
        },
        rng);
}

/// Thompson sampling: draw one success probability per arm from its Beta
/// posterior and play the argmax.
inline int thompson_decide(std::span<const BetaArm> arms, Rng& rng) {
    double best = -1.0;
    int chosen = 0;
    for (int i = 0; i < static_cast<int>(arms.size()); ++i) {
        const double theta = rng.beta(arms[i].alpha, arms[i].beta);
        if (theta > best) {
            best = theta;
            chosen = i;
        }
    }
    return chosen;
}

/// Beta arms seeded from predicted qualities: arm a starts at
/// Beta(1 + strength*q_a, 1 + strength*(1 - q_a)). Strength 0 recovers the
/// uniform prior.
inline std::vector<BetaArm> install_prior(std::span<const double> prior_quality, double strength) {
    std::vector<BetaArm> arms(prior_quality.size());
    for (std::size_t a = 0; a < prior_quality.size(); ++a) {
        arms[a].alpha = 1.0 + strength * prior_quality[a];
        arms[a].beta = 1.0 + strength * (1.0 - prior_quality[a]);
    }
    return arms;
}

/// Epsilon-greedy on a fixed predicted-quality vector; never learns.
inline int prior_greedy_decide(std::span<const double> prior_quality, double explore_prob,
                               Rng& rng) {
    if (rng.bernoulli(explore_prob)) return rng.uniform_int(static_cast<int>(prior_quality.size()));
    return detail::argmax_random_tie(
        static_cast<int>(prior_quality.size()), [&](int i) { return prior_quality[i]; }, rng);
}

/// Ground-truth best grasp, lowest index on ties.
inline int oracle_decide(const ObjectSpec& spec, int pose) {
    if (pose < 0 || pose >= spec.n_poses) throw IndexOutOfRange("oracle_decide: pose out of range");
    const auto& row = spec.grasp_quality[pose];
    return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

/// Uniform decide/update/name contract shared by every policy. One instance
/// per trial; instances own all learned state and are never shared across
/// threads. Per-pose state is allocated lazily on first visit: the agent
/// starts out knowing neither the poses nor their count.
class Policy {
public:
    virtual ~Policy() = default;

    /// Picks a grasp for the current pose. `t` is the global timestep
    /// (0-based); policies with pose-local clocks keep their own counters.
    virtual int decide(int pose, std::uint64_t t, Rng& rng) = 0;

    /// Feeds back one observed transition.
    virtual void update(int pose, int grasp, int reward, int next_pose) = 0;

    virtual const std::string& name() const = 0;
};

/// Independent Thompson-sampling bandit per discovered pose, optionally
/// warm-started from the object's prior qualities.
class ThompsonPolicy final : public Policy {
public:
    ThompsonPolicy(int grasps_per_pose, std::string name = "ts")
        : k_(grasps_per_pose), name_(std::move(name)) {}

    ThompsonPolicy(int grasps_per_pose, std::vector<std::vector<double>> prior, double strength,
                   std::string name)
        : k_(grasps_per_pose), prior_(std::move(prior)), strength_(strength),
          name_(std::move(name)) {}

    int decide(int pose, std::uint64_t, Rng& rng) override {
        return thompson_decide(arms_for(pose), rng);
    }

    void update(int pose, int grasp, int reward, int) override {
        auto& arm = arms_for(pose)[grasp];
        if (reward)
            arm.alpha += 1.0;
        else
            arm.beta += 1.0;
    }

    const std::string& name() const override { return name_; }

    std::size_t discovered_poses() const { return arms_.size(); }

    /// Learned state for one pose, or nullptr if the pose was never visited.
    const std::vector<BetaArm>* arms(int pose) const {
        const auto it = arms_.find(pose);
        return it == arms_.end() ? nullptr : &it->second;
    }

private:
    std::vector<BetaArm>& arms_for(int pose) {
        auto it = arms_.find(pose);
        if (it == arms_.end()) {
            std::vector<BetaArm> fresh =
                prior_.empty() ? std::vector<BetaArm>(k_)
                               : install_prior(prior_.at(pose), strength_);
            it = arms_.emplace(pose, std::move(fresh)).first;
        }
        return it->second;
    }

    int k_;
    std::vector<std::vector<double>> prior_; // empty = uniform Beta(1,1)
    double strength_ = 0.0;
    std::string name_;
    std::unordered_map<int, std::vector<BetaArm>> arms_;
};

/// Independent UCB1 bandit per discovered pose, with a pose-local clock.
class UcbPolicy final : public Policy {
public:
    explicit UcbPolicy(int grasps_per_pose, std::string name = "ucb")
        : k_(grasps_per_pose), name_(std::move(name)) {}

    int decide(int pose, std::uint64_t, Rng& rng) override {
        auto& st = state_for(pose);
        return ucb1_decide(st.arms, st.attempts + 1, rng);
    }

    void update(int pose, int grasp, int reward, int) override {
        auto& st = state_for(pose);
        st.attempts += 1;
        st.arms[grasp].pulls += 1;
        st.arms[grasp].successes += static_cast<std::uint64_t>(reward);
    }

    const std::string& name() const override { return name_; }

    std::size_t discovered_poses() const { return state_.size(); }

    const std::vector<UcbArm>* arms(int pose) const {
        const auto it = state_.find(pose);
        return it == state_.end() ? nullptr : &it->second.arms;
    }

    std::uint64_t pose_attempts(int pose) const {
        const auto it = state_.find(pose);
        return it == state_.end() ? 0 : it->second.attempts;
    }

private:
    struct PoseState {
        std::vector<UcbArm> arms;
        std::uint64_t attempts = 0;
    };

    PoseState& state_for(int pose) {
        auto it = state_.find(pose);
        if (it == state_.end())
            it = state_.emplace(pose, PoseState{std::vector<UcbArm>(k_), 0}).first;
        return it->second;
    }

    int k_;
    std::string name_;
    std::unordered_map<int, PoseState> state_;
};

/// Stand-in for a general-purpose grasp planner: greedy on the object's
/// prior qualities with a fixed exploration probability, no learning.
class PriorGreedyPolicy final : public Policy {
public:
    PriorGreedyPolicy(std::vector<std::vector<double>> prior, double explore_prob,
                      std::string name)
        : prior_(std::move(prior)), explore_prob_(explore_prob), name_(std::move(name)) {}

    int decide(int pose, std::uint64_t, Rng& rng) override {
        return prior_greedy_decide(prior_.at(pose), explore_prob_, rng);
    }

    void update(int, int, int, int) override {}

    const std::string& name() const override { return name_; }

private:
    std::vector<std::vector<double>> prior_;
    double explore_prob_;
    std::string name_;
};

class UniformPolicy final : public Policy {
public:
    explicit UniformPolicy(int grasps_per_pose) : k_(grasps_per_pose) {}

    int decide(int, std::uint64_t, Rng& rng) override { return rng.uniform_int(k_); }
    void update(int, int, int, int) override {}
    const std::string& name() const override { return name_; }

private:
    int k_;
    std::string name_ = "uniform";
};

/// Upper-bound baseline: always plays the ground-truth best grasp.
class OraclePolicy final : public Policy {
public:
    explicit OraclePolicy(const ObjectSpec& spec) {
        choice_.reserve(spec.n_poses);
        for (int s = 0; s < spec.n_poses; ++s) choice_.push_back(oracle_decide(spec, s));
    }

    int decide(int pose, std::uint64_t, Rng&) override { return choice_.at(pose); }
    void update(int, int, int, int) override {}
    const std::string& name() const override { return name_; }

private:
    std::vector<int> choice_;
    std::string name_ = "oracle";
};

} // namespace graspx
