#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "graspx/analysis.hpp"
#include "graspx/mdp.hpp"
#include "graspx/object_spec.hpp"
#include "graspx/policy_factory.hpp"
#include "graspx/rng.hpp"
#include "graspx/synth.hpp"
#include "graspx/trace.hpp"

namespace graspx {

struct PoseRemovalConfig {
    bool enabled = true;
    double quality_floor = 1e-9;
    double mass_floor = 1e-3;
};

/// An object column of the experiment matrix: either a fixed spec file or a
/// generator directive. Generator-backed objects are re-drawn for every
/// (rollout, trial) cell — fresh grasp placements per trial — from seeds that
/// do not depend on the policy, so all policies face the same realizations.
struct ObjectDirective {
    enum class Kind { File, Sensitivity, Random };
    Kind kind = Kind::File;
    std::string path;
    std::string label; // defaults to the file label / generator label
    SensitivityParams sensitivity;
    RandomObjectParams random;
    double prior_fidelity = -1.0; // >= 0: attach a synthetic prior of this fidelity
};

struct ExperimentConfig {
    std::vector<ObjectDirective> objects;
    std::vector<std::string> policies;
    std::size_t horizon = 10000;
    int rollouts = 10;
    int trials = 10;
    int window = 20;
    std::uint64_t master_seed = 0;
    bool toppling_enabled = true;
    PoseRemovalConfig pose_removal;
    bool keep_traces = false; // retain full traces (memory-heavy; small runs only)
};

inline void validate(const ExperimentConfig& cfg) {
    if (cfg.objects.empty()) throw InvalidParams("config: no objects");
    if (cfg.policies.empty()) throw InvalidParams("config: no policies");
    for (const auto& name : cfg.policies) validate_policy_name(name);
    if (cfg.window < 1) throw InvalidParams("config: window must be >= 1");
    if (cfg.horizon < static_cast<std::size_t>(cfg.window))
        throw InvalidParams("config: horizon must be >= window");
    if (cfg.rollouts < 1 || cfg.trials < 1)
        throw InvalidParams("config: rollouts and trials must be >= 1");
}

// --- config file ------------------------------------------------------------

namespace detail {

inline ObjectDirective object_directive_from_json(const nlohmann::json& j) {
    ObjectDirective d;
    if (j.is_string()) {
        d.kind = ObjectDirective::Kind::File;
        d.path = j.get<std::string>();
        return d;
    }
    if (!j.is_object()) throw InvalidParams("config: object entry must be a path or an object");
    if (j.contains("file")) {
        d.kind = ObjectDirective::Kind::File;
        d.path = j.at("file").get<std::string>();
        d.label = j.value("label", std::string());
        return d;
    }
    const std::string family = j.value("family", std::string());
    if (family == "sensitivity") {
        d.kind = ObjectDirective::Kind::Sensitivity;
        auto& p = d.sensitivity;
        p.n_poses = j.value("n", p.n_poses);
        p.grasps_per_pose = j.value("k", p.grasps_per_pose);
        p.epsilon = j.value("epsilon", p.epsilon);
        p.lambda_min = j.value("lambda_min", p.lambda_min);
        p.toppling = j.value("toppling", p.toppling);
        p.topple_mass = j.value("topple_mass", p.topple_mass);
    } else if (family == "random") {
        d.kind = ObjectDirective::Kind::Random;
        auto& p = d.random;
        p.n_poses = j.value("n", p.n_poses);
        p.grasps_per_pose = j.value("k", p.grasps_per_pose);
        p.dirichlet_concentration = j.value("dirichlet_concentration", p.dirichlet_concentration);
        p.quality_alpha = j.value("quality_alpha", p.quality_alpha);
        p.quality_beta = j.value("quality_beta", p.quality_beta);
        p.eps_floor = j.value("eps_floor", p.eps_floor);
        p.topple_density = j.value("topple_density", p.topple_density);
        p.topple_mass = j.value("topple_mass", p.topple_mass);
    } else {
        throw InvalidParams("config: object family must be 'sensitivity' or 'random'");
    }
    d.label = j.value("label", std::string());
    d.prior_fidelity = j.value("prior_fidelity", -1.0);
    return d;
}

} // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    try {
        for (const auto& o : j.at("objects"))
            cfg.objects.push_back(detail::object_directive_from_json(o));
        cfg.policies = j.at("policies").get<std::vector<std::string>>();
        cfg.horizon = j.value("horizon", cfg.horizon);
        cfg.rollouts = j.value("rollouts", cfg.rollouts);
        cfg.trials = j.value("trials", cfg.trials);
        cfg.window = j.value("window", cfg.window);
        cfg.master_seed = j.value("master_seed", cfg.master_seed);
        cfg.toppling_enabled = j.value("toppling_enabled", cfg.toppling_enabled);
        cfg.pose_removal.enabled = j.value("pose_removal", cfg.pose_removal.enabled);
        cfg.pose_removal.quality_floor = j.value("quality_floor", cfg.pose_removal.quality_floor);
        cfg.pose_removal.mass_floor = j.value("mass_floor", cfg.pose_removal.mass_floor);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidParams(std::string("config json: ") + e.what());
    }
    validate(cfg);
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("cannot parse config file " + path + ": " + e.what());
    }
    return config_from_json(j);
}

// --- object materialization ---------------------------------------------

/// Applies the configured environment variants: forcing the topple matrix to
/// the identity (no-toppling runs) happens before pose removal.
inline ObjectSpec preprocess_object(ObjectSpec spec, const ExperimentConfig& cfg) {
    if (!cfg.toppling_enabled) {
        for (int s = 0; s < spec.n_poses; ++s) {
            std::fill(spec.topple_matrix[s].begin(), spec.topple_matrix[s].end(), 0.0);
            spec.topple_matrix[s][s] = 1.0;
        }
    }
    if (cfg.pose_removal.enabled)
        spec = remove_dead_poses(spec, cfg.pose_removal.quality_floor,
                                 cfg.pose_removal.mass_floor)
                   .first;
    return spec;
}

inline std::string directive_label(const ObjectDirective& d) {
    if (!d.label.empty()) return d.label;
    switch (d.kind) {
    case ObjectDirective::Kind::File: {
        // strip directory and extension so CSV keys stay short
        std::string name = d.path;
        if (const auto slash = name.find_last_of("/\\"); slash != std::string::npos)
            name = name.substr(slash + 1);
        if (const auto dot = name.rfind(".json"); dot != std::string::npos) name = name.substr(0, dot);
        return name.empty() ? "object" : name;
    }
    case ObjectDirective::Kind::Sensitivity:
        return "sens-n" + std::to_string(d.sensitivity.n_poses) + "-k" +
               std::to_string(d.sensitivity.grasps_per_pose) + "-eps" +
               detail::fmt_g(d.sensitivity.epsilon) + "-lam" +
               detail::fmt_g(d.sensitivity.lambda_min);
    case ObjectDirective::Kind::Random:
        return "rand-n" + std::to_string(d.random.n_poses) + "-k" +
               std::to_string(d.random.grasps_per_pose);
    }
    return "object";
}

/// Builds the (rollout, trial) realization of a generator directive. The
/// seed ignores the policy so that every policy sees the same object draw.
inline ObjectSpec materialize_object(const ObjectDirective& d, const ExperimentConfig& cfg,
                                     int rollout, int trial) {
    const std::string label = directive_label(d);
    if (d.kind == ObjectDirective::Kind::File) {
        ObjectSpec spec = load_object(d.path);
        spec.label = label;
        return preprocess_object(std::move(spec), cfg);
    }
    Rng rng(derive_seed(cfg.master_seed, label, "", static_cast<std::uint64_t>(rollout),
                        static_cast<std::uint64_t>(trial), "object"));
    ObjectSpec spec = d.kind == ObjectDirective::Kind::Sensitivity
                          ? gen_sensitivity_object(d.sensitivity, rng)
                          : gen_random_object(d.random, rng);
    spec.label = label;
    if (d.prior_fidelity >= 0.0) spec = with_prior(std::move(spec), d.prior_fidelity, rng);
    return preprocess_object(std::move(spec), cfg);
}

// --- trial execution ------------------------------------------------------

/// Runs one trial: the initial pose is drawn from the landing distribution,
/// then horizon rounds of decide / environment step / update. Deterministic
/// given (spec, policy name, horizon, seed); policy and environment share
/// one stream in a fixed draw order.
inline TraceRecord run_trial(const ObjectSpec& spec, const std::string& policy_name,
                             std::size_t horizon, std::uint64_t seed) {
    if (horizon < 1) throw InvalidParams("run_trial: horizon must be >= 1");
    const auto policy = make_policy(policy_name, spec);
    Rng rng(seed);

    TraceRecord trace;
    trace.object_label = spec.label;
    trace.policy = policy_name;
    trace.seed = seed;
    trace.poses.reserve(horizon);
    trace.grasps.reserve(horizon);
    trace.rewards.reserve(horizon);
    trace.causes.reserve(horizon);

    int pose = rng.categorical(spec.landing_probs);
    for (std::size_t t = 0; t < horizon; ++t) {
        const int grasp = policy->decide(pose, t, rng);
        const TransitionOutcome out = step(spec, pose, grasp, rng);
        policy->update(pose, grasp, out.reward, out.next_pose);
        trace.poses.push_back(pose);
        trace.grasps.push_back(grasp);
        trace.rewards.push_back(static_cast<std::uint8_t>(out.reward));
        trace.causes.push_back(out.cause);
        pose = out.next_pose;
    }
    return trace;
}

// --- aggregation ------------------------------------------------------------

struct AnalysisScalars {
    double epsilon = std::numeric_limits<double>::quiet_NaN();
    double lambda_min = std::numeric_limits<double>::quiet_NaN();
    double j_star = std::numeric_limits<double>::quiet_NaN();
    double diameter = std::numeric_limits<double>::quiet_NaN();
    double diameter_bound = std::numeric_limits<double>::quiet_NaN();
    double assumption4_violation = std::numeric_limits<double>::quiet_NaN();
};

/// One (object, policy) cell: pointwise mean/std of the smoothed reward
/// curves, per-curve area-under-curve scalars (tagged with their rollout for
/// between-rollout error bars), and the object's analysis scalars.
struct CellResult {
    std::string object_label;
    std::string policy;
    std::size_t n_curves = 0;
    std::vector<double> mean_curve;
    std::vector<double> std_curve;
    double auc = std::numeric_limits<double>::quiet_NaN(); // mean smoothed reward over t, curves
    double final_window_mean = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> curve_auc;
    std::vector<int> curve_rollout;
    AnalysisScalars scalars;
    std::vector<TraceRecord> traces; // populated only with keep_traces
};

struct TrialFailure {
    std::string object_label;
    std::string policy;
    int rollout = 0;
    int trial = 0;
    std::string message;
};

struct ExperimentResult {
    std::vector<CellResult> cells;
    std::vector<TrialFailure> failures;
};

namespace detail {

struct CurveAccumulator {
    explicit CurveAccumulator(std::size_t horizon)
        : sum(horizon, 0.0), sum_sq(horizon, 0.0) {}

    void add(const std::vector<std::uint8_t>& rewards, int window, int rollout) {
        const auto curve = smooth(rewards, window);
        double auc = 0.0;
        for (std::size_t t = 0; t < curve.size(); ++t) {
            sum[t] += curve[t];
            sum_sq[t] += curve[t] * curve[t];
            auc += curve[t];
        }
        curve_auc.push_back(auc / static_cast<double>(curve.size()));
        curve_rollout.push_back(rollout);
    }

    void finalize(CellResult& cell, int window) const {
        const std::size_t n = curve_auc.size();
        cell.n_curves = n;
        cell.curve_auc = curve_auc;
        cell.curve_rollout = curve_rollout;
        if (n == 0) return;
        cell.mean_curve.resize(sum.size());
        cell.std_curve.resize(sum.size());
        for (std::size_t t = 0; t < sum.size(); ++t) {
            const double mean = sum[t] / static_cast<double>(n);
            cell.mean_curve[t] = mean;
            double var = 0.0;
            if (n > 1)
                var = std::max(0.0, (sum_sq[t] - static_cast<double>(n) * mean * mean) /
                                        static_cast<double>(n - 1));
            cell.std_curve[t] = std::sqrt(var);
        }
        double auc = 0.0;
        for (double a : curve_auc) auc += a;
        cell.auc = auc / static_cast<double>(n);
        double tail = 0.0;
        const std::size_t w = std::min<std::size_t>(window, cell.mean_curve.size());
        for (std::size_t t = cell.mean_curve.size() - w; t < cell.mean_curve.size(); ++t)
            tail += cell.mean_curve[t];
        cell.final_window_mean = tail / static_cast<double>(w);
    }

    std::vector<double> sum, sum_sq;
    std::vector<double> curve_auc;
    std::vector<int> curve_rollout;
};

inline AnalysisScalars scalars_for(const ObjectSpec& spec) {
    AnalysisScalars s;
    const AssumptionReport rep = assumption_report(spec);
    s.epsilon = rep.epsilon;
    s.lambda_min = rep.lambda_min;
    s.assumption4_violation = rep.assumption4_violation;
    if (rep.epsilon > 0.0 && rep.lambda_min > 0.0)
        s.diameter_bound = 1.0 / (rep.epsilon * rep.lambda_min);
    if (rep.sink_poses.empty()) {
        s.diameter = diameter(spec);
        s.j_star = optimal_average_reward(spec).j_star;
    }
    return s;
}

} // namespace detail

/// Groups traces by (object, policy) in first-seen order and aggregates
/// their smoothed curves. All traces must share one horizon.
inline std::vector<CellResult> aggregate(const std::vector<TraceRecord>& traces, int window) {
    if (traces.empty()) return {};
    const std::size_t horizon = traces.front().horizon();
    for (const auto& t : traces)
        if (t.horizon() != horizon) throw MixedHorizons("aggregate: traces differ in horizon");

    std::vector<std::pair<std::string, std::string>> order;
    std::map<std::pair<std::string, std::string>, detail::CurveAccumulator> acc;
    for (const auto& t : traces) {
        const auto key = std::make_pair(t.object_label, t.policy);
        auto it = acc.find(key);
        if (it == acc.end()) {
            it = acc.emplace(key, detail::CurveAccumulator(horizon)).first;
            order.push_back(key);
        }
        it->second.add(t.rewards, window, t.rollout);
    }

    std::vector<CellResult> cells;
    cells.reserve(order.size());
    for (const auto& key : order) {
        CellResult cell;
        cell.object_label = key.first;
        cell.policy = key.second;
        acc.at(key).finalize(cell, window);
        cells.push_back(std::move(cell));
    }
    return cells;
}

/// Runs the full rollouts x trials matrix over every (object, policy) cell.
/// Trials execute on up to `jobs` threads; each owns its policy, trace
/// buffer, and seed-derived random stream, and results land in preallocated
/// slots, so the output is byte-identical regardless of scheduling.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, int jobs = 1) {
    validate(cfg);
    const std::size_t n_obj = cfg.objects.size();
    const std::size_t n_pol = cfg.policies.size();
    const std::size_t per_cell =
        static_cast<std::size_t>(cfg.rollouts) * static_cast<std::size_t>(cfg.trials);
    const std::size_t n_tasks = n_obj * n_pol * per_cell;

    // Fixed objects load once up front; generator directives are validated by
    // materializing their (0, 0) realization, which also serves as the
    // reference realization for the analysis scalars.
    std::vector<std::optional<ObjectSpec>> fixed(n_obj);
    std::vector<std::string> labels(n_obj);
    std::vector<AnalysisScalars> scalars(n_obj);
    for (std::size_t i = 0; i < n_obj; ++i) {
        labels[i] = directive_label(cfg.objects[i]);
        ObjectSpec ref = materialize_object(cfg.objects[i], cfg, 0, 0);
        scalars[i] = detail::scalars_for(ref);
        if (cfg.objects[i].kind == ObjectDirective::Kind::File) fixed[i] = std::move(ref);
    }

    struct TrialSlot {
        std::vector<std::uint8_t> rewards;
        TraceRecord trace;
        std::string error;
        bool failed = false;
    };
    std::vector<TrialSlot> slots(n_tasks);

    auto run_task = [&](std::size_t task) {
        const std::size_t cell = task / per_cell;
        const std::size_t within = task % per_cell;
        const std::size_t obj = cell / n_pol;
        const std::size_t pol = cell % n_pol;
        const int rollout = static_cast<int>(within / cfg.trials);
        const int trial = static_cast<int>(within % cfg.trials);
        TrialSlot& slot = slots[task];
        try {
            const ObjectSpec spec = fixed[obj]
                                        ? *fixed[obj]
                                        : materialize_object(cfg.objects[obj], cfg, rollout, trial);
            const std::uint64_t seed =
                derive_seed(cfg.master_seed, labels[obj], cfg.policies[pol],
                            static_cast<std::uint64_t>(rollout), static_cast<std::uint64_t>(trial),
                            "trial");
            TraceRecord trace = run_trial(spec, cfg.policies[pol], cfg.horizon, seed);
            trace.rollout = rollout;
            trace.trial = trial;
            if (cfg.keep_traces) {
                slot.rewards = trace.rewards;
                slot.trace = std::move(trace);
            } else {
                slot.rewards = std::move(trace.rewards);
            }
        } catch (const std::exception& e) {
            slot.failed = true;
            slot.error = e.what();
        }
    };

    int n_threads = jobs > 0 ? jobs : static_cast<int>(std::thread::hardware_concurrency());
    n_threads = std::max(1, std::min<int>(n_threads, static_cast<int>(n_tasks)));
    if (n_threads == 1) {
        for (std::size_t task = 0; task < n_tasks; ++task) run_task(task);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (int w = 0; w < n_threads; ++w)
            pool.emplace_back([&] {
                for (std::size_t task = next.fetch_add(1); task < n_tasks;
                     task = next.fetch_add(1))
                    run_task(task);
            });
        for (auto& th : pool) th.join();
    }

    // Deterministic aggregation in slot order, after all workers finish.
    ExperimentResult result;
    for (std::size_t obj = 0; obj < n_obj; ++obj) {
        for (std::size_t pol = 0; pol < n_pol; ++pol) {
            const std::size_t cell = obj * n_pol + pol;
            detail::CurveAccumulator acc(cfg.horizon);
            CellResult out;
            out.object_label = labels[obj];
            out.policy = cfg.policies[pol];
            out.scalars = scalars[obj];
            for (std::size_t within = 0; within < per_cell; ++within) {
                const std::size_t task = cell * per_cell + within;
                TrialSlot& slot = slots[task];
                const int rollout = static_cast<int>(within / cfg.trials);
                const int trial = static_cast<int>(within % cfg.trials);
                if (slot.failed) {
                    result.failures.push_back(TrialFailure{labels[obj], cfg.policies[pol], rollout,
                                                           trial, slot.error});
                    continue;
                }
                acc.add(slot.rewards, cfg.window, rollout);
                if (cfg.keep_traces) out.traces.push_back(std::move(slot.trace));
            }
            acc.finalize(out, cfg.window);
            result.cells.push_back(std::move(out));
        }
    }
    return result;
}

// --- CSV emission -----------------------------------------------------------

namespace detail {

inline std::string csv_num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

} // namespace detail

/// One row per (object, policy, timestep): the pointwise mean and standard
/// deviation of the smoothed reward curves.
inline void write_curves_csv(const ExperimentResult& result, std::ostream& out) {
    out << "object,policy,t,mean_reward,std_reward,n_curves\n";
    for (const auto& cell : result.cells)
        for (std::size_t t = 0; t < cell.mean_curve.size(); ++t)
            out << cell.object_label << ',' << cell.policy << ',' << t << ','
                << detail::csv_num(cell.mean_curve[t]) << ',' << detail::csv_num(cell.std_curve[t])
                << ',' << cell.n_curves << '\n';
}

/// One row per (object, policy): learning-curve scalars next to the object's
/// analysis scalars.
inline void write_summary_csv(const ExperimentResult& result, std::ostream& out) {
    out << "object,policy,n_curves,auc,final_window_mean,j_star,epsilon,lambda_min,diameter,"
           "diameter_bound,assumption4_violation\n";
    for (const auto& cell : result.cells) {
        const auto& s = cell.scalars;
        out << cell.object_label << ',' << cell.policy << ',' << cell.n_curves << ','
            << detail::csv_num(cell.auc) << ',' << detail::csv_num(cell.final_window_mean) << ','
            << detail::csv_num(s.j_star) << ',' << detail::csv_num(s.epsilon) << ','
            << detail::csv_num(s.lambda_min) << ',' << detail::csv_num(s.diameter) << ','
            << detail::csv_num(s.diameter_bound) << ','
            << detail::csv_num(s.assumption4_violation) << '\n';
    }
}

inline void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << contents;
}

} // namespace graspx
