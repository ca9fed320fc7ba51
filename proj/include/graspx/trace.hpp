#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "graspx/errors.hpp"
#include "graspx/mdp.hpp"

namespace graspx {

/// One trial's timestep-indexed record of (pose, grasp, reward, cause),
/// plus the identity of the run that produced it.
struct TraceRecord {
    std::string object_label;
    std::string policy;
    int rollout = 0;
    int trial = 0;
    std::uint64_t seed = 0;

    std::vector<std::int32_t> poses;
    std::vector<std::int32_t> grasps;
    std::vector<std::uint8_t> rewards;
    std::vector<Cause> causes;

    std::size_t horizon() const { return rewards.size(); }
};

/// Sliding-window mean with a left-truncated window: entry t averages the
/// inputs over [max(0, t-window+1), t]. Window 1 is the identity.
template <typename T>
std::vector<double> smooth(std::span<const T> values, int window) {
    if (window < 1) throw InvalidParams("smooth: window must be >= 1");
    std::vector<double> out(values.size());
    double running = 0.0;
    for (std::size_t t = 0; t < values.size(); ++t) {
        running += static_cast<double>(values[t]);
        if (t >= static_cast<std::size_t>(window))
            running -= static_cast<double>(values[t - window]);
        const auto len = std::min<std::size_t>(t + 1, static_cast<std::size_t>(window));
        out[t] = running / static_cast<double>(len);
    }
    return out;
}

inline std::vector<double> smooth(const std::vector<std::uint8_t>& values, int window) {
    return smooth(std::span<const std::uint8_t>(values), window);
}
inline std::vector<double> smooth(const std::vector<double>& values, int window) {
    return smooth(std::span<const double>(values), window);
}

} // namespace graspx
