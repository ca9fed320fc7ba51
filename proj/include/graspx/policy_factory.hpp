#pragma once

#include <memory>
#include <string>

#include "graspx/policies.hpp"
#include "graspx/ucrl2.hpp"

namespace graspx {

namespace detail {

struct ParsedPolicyName {
    std::string head;
    double value = 0.0; // strength / explore_prob / delta, per head
};

inline double parse_suffix(const std::string& name, std::string_view head, double fallback) {
    if (name.size() == head.size()) return fallback;
    const std::string tail = name.substr(head.size() + 1);
    try {
        std::size_t used = 0;
        const double v = std::stod(tail, &used);
        if (used != tail.size()) throw std::invalid_argument(tail);
        return v;
    } catch (const std::exception&) {
        throw InvalidParams("policy '" + name + "': bad numeric parameter '" + tail + "'");
    }
}

/// Splits and range-checks a policy name without touching any object.
inline ParsedPolicyName parse_policy_name(const std::string& name) {
    ParsedPolicyName p;
    p.head = name.substr(0, name.find(':'));
    if (p.head == "ucb" || p.head == "ts" || p.head == "uniform" || p.head == "oracle") {
        if (name != p.head) throw InvalidParams("policy '" + name + "' takes no parameter");
        return p;
    }
    if (p.head == "ts-prior") {
        p.value = parse_suffix(name, p.head, 5.0);
        if (p.value < 0.0) throw InvalidParams("policy '" + name + "': strength must be >= 0");
        return p;
    }
    if (p.head == "prior-greedy") {
        p.value = parse_suffix(name, p.head, 0.05);
        if (p.value < 0.0 || p.value > 1.0)
            throw InvalidParams("policy '" + name + "': explore_prob must be in [0,1]");
        return p;
    }
    if (p.head == "ucrl2") {
        p.value = parse_suffix(name, p.head, 0.05);
        if (p.value <= 0.0 || p.value >= 1.0)
            throw InvalidParams("policy '" + name + "': delta must be in (0,1)");
        return p;
    }
    throw InvalidParams("unknown policy '" + name + "'");
}

} // namespace detail

/// Throws InvalidParams when `name` is not a recognizable policy string.
inline void validate_policy_name(const std::string& name) { detail::parse_policy_name(name); }

/// Builds a policy instance from its config-file name:
///   ucb | ts | ts-prior[:strength] | prior-greedy[:explore_prob] |
///   uniform | oracle | ucrl2[:delta]
/// Policies copy what they need from the spec, so the returned instance does
/// not retain references into it.
inline std::unique_ptr<Policy> make_policy(const std::string& name, const ObjectSpec& spec) {
    const auto parsed = detail::parse_policy_name(name);
    const int k = spec.grasps_per_pose;

    if (parsed.head == "ucb") return std::make_unique<UcbPolicy>(k);
    if (parsed.head == "ts") return std::make_unique<ThompsonPolicy>(k);
    if (parsed.head == "uniform") return std::make_unique<UniformPolicy>(k);
    if (parsed.head == "oracle") return std::make_unique<OraclePolicy>(spec);

    if (parsed.head == "ts-prior") {
        if (!spec.prior_quality)
            throw MissingPrior("policy '" + name + "' needs prior_quality on object '" +
                               spec.label + "'");
        return std::make_unique<ThompsonPolicy>(k, *spec.prior_quality, parsed.value, name);
    }
    if (parsed.head == "prior-greedy") {
        if (!spec.prior_quality)
            throw MissingPrior("policy '" + name + "' needs prior_quality on object '" +
                               spec.label + "'");
        return std::make_unique<PriorGreedyPolicy>(*spec.prior_quality, parsed.value, name);
    }
    return std::make_unique<Ucrl2Policy>(k, Ucrl2Config{parsed.value, 10000}, name);
}

} // namespace graspx
