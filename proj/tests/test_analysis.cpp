#include <catch2/catch_amalgamated.hpp>

#include "graspx/analysis.hpp"
#include "support.hpp"

using namespace graspx;

namespace {

Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    return m;
}

ObjectSpec make_spec(std::vector<double> lambda, std::vector<std::vector<double>> phi,
                     std::vector<std::vector<double>> delta) {
    ObjectSpec raw;
    raw.landing_probs = std::move(lambda);
    raw.grasp_quality = std::move(phi);
    raw.topple_matrix = std::move(delta);
    return validate_object(std::move(raw));
}

/// The equality construction for the diameter bound: one grasp of quality
/// eps per pose, all others zero, no toppling.
ObjectSpec equality_spec(std::vector<double> lambda, int k, double eps, std::mt19937_64& eng) {
    const int n = static_cast<int>(lambda.size());
    ObjectSpec raw;
    raw.landing_probs = std::move(lambda);
    raw.grasp_quality.assign(n, std::vector<double>(k, 0.0));
    std::uniform_int_distribution<int> arm(0, k - 1);
    for (auto& row : raw.grasp_quality) row[arm(eng)] = eps;
    raw.topple_matrix.assign(n, std::vector<double>(n, 0.0));
    for (int s = 0; s < n; ++s) raw.topple_matrix[s][s] = 1.0;
    return validate_object(std::move(raw));
}

} // namespace

TEST_CASE("stationary distribution: closed forms") {
    // symmetric 2-state chain
    auto pi = stationary_distribution(from_rows({{0.5, 0.5}, {0.5, 0.5}}));
    CHECK(pi[0] == Catch::Approx(0.5));

    // birth-death chain with known stationary ratio
    pi = stationary_distribution(from_rows({{0.9, 0.1}, {0.3, 0.7}}));
    CHECK(pi[0] == Catch::Approx(0.75));
    CHECK(pi[1] == Catch::Approx(0.25));
}

TEST_CASE("stationary distribution satisfies balance on random chains") {
    std::mt19937_64 eng(31);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (int rep = 0; rep < 30; ++rep) {
        const int n = 1 + static_cast<int>(eng() % 6);
        Matrix p(n, n);
        for (int i = 0; i < n; ++i) {
            double total = 0.0;
            for (int j = 0; j < n; ++j) {
                p(i, j) = u(eng);
                total += p(i, j);
            }
            for (int j = 0; j < n; ++j) p(i, j) /= total;
        }
        const auto pi = stationary_distribution(p);
        double mass = 0.0;
        for (int j = 0; j < n; ++j) {
            CHECK(pi[j] >= 0.0);
            mass += pi[j];
            double flow = 0.0;
            for (int i = 0; i < n; ++i) flow += pi[i] * p(i, j);
            CHECK(std::abs(flow - pi[j]) < 1e-10);
        }
        CHECK(mass == Catch::Approx(1.0));
    }
}

TEST_CASE("hitting times: geometric two-state case") {
    const Matrix t = hitting_times(from_rows({{0.5, 0.5}, {0.5, 0.5}}));
    CHECK(t(0, 0) == 0.0);
    CHECK(t(1, 1) == 0.0);
    CHECK(t(0, 1) == Catch::Approx(2.0));
    CHECK(t(1, 0) == Catch::Approx(2.0));
}

TEST_CASE("hitting times: absorbing source is flagged infinite") {
    const Matrix t = hitting_times(from_rows({{1.0, 0.0}, {0.5, 0.5}}));
    CHECK(std::isinf(t(0, 1)));
    CHECK(t(1, 0) == Catch::Approx(2.0));
}

TEST_CASE("hitting times: transient escape to an absorbing state is infinite") {
    // from state 0 the chain may fall into absorbing state 2, so the
    // expected time to reach state 1 is infinite
    const Matrix t = hitting_times(
        from_rows({{0.2, 0.4, 0.4}, {0.5, 0.5, 0.0}, {0.0, 0.0, 1.0}}));
    CHECK(std::isinf(t(0, 1)));
    CHECK(std::isinf(t(2, 0)));
    CHECK(t(1, 0) > 0.0);
    CHECK(std::isfinite(t(1, 0)));
}

TEST_CASE("hitting times match Monte Carlo on a random irreducible chain") {
    std::mt19937_64 eng(32);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    const int n = 4;
    Matrix p(n, n);
    for (int i = 0; i < n; ++i) {
        double total = 0.0;
        for (int j = 0; j < n; ++j) {
            p(i, j) = u(eng);
            total += p(i, j);
        }
        for (int j = 0; j < n; ++j) p(i, j) /= total;
    }
    const Matrix t = hitting_times(p);

    Rng rng(33);
    std::vector<double> samples;
    const int episodes = 100'000;
    for (int e = 0; e < episodes; ++e) {
        int s = 0;
        int steps = 0;
        while (true) {
            s = rng.categorical(p.row(s));
            ++steps;
            if (s == 3) break;
        }
        samples.push_back(steps);
    }
    const auto stat = testsupport::mean_se(samples);
    CHECK(std::abs(stat.mean - t(0, 3)) < 3 * stat.se);
}

TEST_CASE("diameter: equality construction hits the closed form") {
    std::mt19937_64 eng(34);
    const auto spec = equality_spec({0.1, 0.3, 0.3, 0.3}, 6, 0.5, eng);
    const double bound = diameter_bound(spec);
    CHECK(bound == Catch::Approx(1.0 / (0.5 * 0.1)));
    CHECK(std::abs(diameter(spec) - bound) <= 1e-6 * bound);
}

TEST_CASE("diameter: single pose is zero") {
    const auto spec = make_spec({1.0}, {{0.5}}, {{1.0}});
    CHECK(diameter(spec) == 0.0);
}

TEST_CASE("diameter: never exceeds the closed-form bound on random specs") {
    std::mt19937_64 eng(35);
    for (int rep = 0; rep < 40; ++rep) {
        const auto spec = testsupport::rand_spec(eng, 6, 6);
        const auto rep_a = assumption_report(spec);
        if (rep_a.epsilon <= 0.0 || rep_a.lambda_min <= 0.0) continue;
        CHECK(diameter(spec) <= diameter_bound(spec) + 1e-9);
    }
}

TEST_CASE("diameter: unreachable pose throws") {
    // pose 2 cannot be landed on or toppled into
    const auto spec = make_spec({0.5, 0.5, 0.0},
                                {{0.5}, {0.5}, {0.5}},
                                {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    CHECK_THROWS_AS(diameter(spec), Unreachable);
}

TEST_CASE("diameter bound arithmetic and degenerate cases") {
    std::mt19937_64 eng(36);
    const auto a = equality_spec({0.01, 0.99}, 3, 0.1, eng);
    CHECK(diameter_bound(a) == Catch::Approx(1000.0));

    const auto b = make_spec({1.0}, {{1.0}}, {{1.0}});
    CHECK(diameter_bound(b) == Catch::Approx(1.0));

    const auto c = equality_spec({0.25, 0.75}, 2, 0.5, eng);
    CHECK(diameter_bound(c) == Catch::Approx(8.0));

    const auto degenerate = make_spec({0.5, 0.5}, {{0.0}, {0.5}}, {{1, 0}, {0, 1}});
    CHECK_THROWS_AS(diameter_bound(degenerate), DegenerateBound);
}

TEST_CASE("optimal average reward: single pose") {
    const auto spec = make_spec({1.0}, {{0.2, 0.7, 0.1}}, {{1.0}});
    const auto opt = optimal_average_reward(spec);
    CHECK(opt.j_star == Catch::Approx(0.7));
    CHECK(opt.policy == std::vector<int>{1});
}

TEST_CASE("optimal average reward: two-pose stationary computation with MC oracle") {
    const auto spec = make_spec({0.5, 0.5}, {{0.8, 0.1}, {0.2, 0.6}}, {{1, 0}, {0, 1}});
    const auto opt = optimal_average_reward(spec);
    // greedy chain: rows (0.6, 0.4) and (0.3, 0.7); stationary (3/7, 4/7)
    CHECK(opt.j_star == Catch::Approx(3.0 / 7.0 * 0.8 + 4.0 / 7.0 * 0.6));

    // independent batched Monte Carlo of the greedy policy
    Rng rng(37);
    std::vector<double> batch_means;
    for (int b = 0; b < 40; ++b) {
        int pose = rng.categorical(spec.landing_probs);
        long total = 0;
        const int steps = 25'000;
        for (int t = 0; t < steps; ++t) {
            const auto out = step(spec, pose, opt.policy[pose], rng);
            total += out.reward;
            pose = out.next_pose;
        }
        batch_means.push_back(static_cast<double>(total) / steps);
    }
    const auto stat = testsupport::mean_se(batch_means);
    CHECK(std::abs(stat.mean - opt.j_star) < 3 * stat.se);
}

TEST_CASE("optimal average reward: constant-quality objects give J* = eps") {
    std::mt19937_64 eng(38);
    const auto spec = equality_spec({0.2, 0.2, 0.6}, 4, 0.35, eng);
    CHECK(optimal_average_reward(spec).j_star == Catch::Approx(0.35));
}

TEST_CASE("optimal average reward: sink poses throw") {
    const auto spec = make_spec({0.5, 0.5}, {{0.5}, {0.0}}, {{1, 0}, {0, 1}});
    CHECK_THROWS_AS(optimal_average_reward(spec), Unreachable);
}

TEST_CASE("greedy value equals relative value iteration on random specs") {
    std::mt19937_64 eng(39);
    int checked = 0;
    for (int rep = 0; rep < 40 && checked < 25; ++rep) {
        const auto spec = testsupport::rand_spec(eng, 5, 5);
        if (!assumption_report(spec).sink_poses.empty()) continue;
        const auto opt = optimal_average_reward(spec);
        const auto vi = average_reward_value_iteration(spec);
        REQUIRE(vi.converged);
        CHECK(std::abs(opt.greedy_value - vi.gain) < 1e-6);
        CHECK_FALSE(opt.differs);
        ++checked;
    }
    REQUIRE(checked >= 25);
}

TEST_CASE("regret curve: perfect policy has zero regret") {
    const auto spec = make_spec({1.0}, {{1.0, 0.0}}, {{1.0}});
    TraceRecord trace;
    trace.poses.assign(1000, 0);
    trace.grasps.assign(1000, 0);
    trace.rewards.assign(1000, 1);
    trace.causes.assign(1000, Cause::GraspedAndReleased);
    const auto curve = regret_curve(trace, spec, 20);
    CHECK(curve.optimal_avg_reward == Catch::Approx(1.0));
    for (double r : curve.per_timestep_regret) CHECK(std::abs(r) < 1e-12);
    CHECK(curve.decomposition[0].occupancy == Catch::Approx(1.0));
    CHECK(curve.decomposition[0].pose_avg_reward == Catch::Approx(1.0));
}

TEST_CASE("regret curve: uniform policy on a (1,0) bandit converges to 0.5 regret") {
    const auto spec = make_spec({1.0}, {{1.0, 0.0}}, {{1.0}});
    Rng rng(40);
    TraceRecord trace;
    const int horizon = 20'000;
    for (int t = 0; t < horizon; ++t) {
        const int a = rng.uniform_int(2);
        const auto out = step(spec, 0, a, rng);
        trace.poses.push_back(0);
        trace.grasps.push_back(a);
        trace.rewards.push_back(static_cast<std::uint8_t>(out.reward));
        trace.causes.push_back(out.cause);
    }
    const auto curve = regret_curve(trace, spec, 20);
    double tail = 0.0;
    const int tail_len = 2'000;
    for (int t = horizon - tail_len; t < horizon; ++t) tail += curve.per_timestep_regret[t];
    tail /= tail_len;
    CHECK(std::abs(tail - 0.5) < 0.05);
}

TEST_CASE("regret curve: decomposition bookkeeping") {
    const auto spec = make_spec({0.5, 0.5}, {{0.9}, {0.5}}, {{1, 0}, {0, 1}});
    Rng rng(41);
    TraceRecord trace;
    int pose = 0;
    for (int t = 0; t < 5'000; ++t) {
        const auto out = step(spec, pose, 0, rng);
        trace.poses.push_back(pose);
        trace.grasps.push_back(0);
        trace.rewards.push_back(static_cast<std::uint8_t>(out.reward));
        trace.causes.push_back(out.cause);
        pose = out.next_pose;
    }
    const auto curve = regret_curve(trace, spec, 20);
    double occ = 0.0;
    for (const auto& e : curve.decomposition) {
        occ += e.occupancy;
        CHECK(e.pose_avg_reward >= 0.0);
        CHECK(e.pose_avg_reward <= 1.0);
    }
    CHECK(occ == Catch::Approx(1.0));
    const auto pi = stationary_distribution(induced_chain(spec, greedy_policy(spec)));
    for (int s = 0; s < 2; ++s)
        CHECK(curve.decomposition[s].optimal_occupancy == Catch::Approx(pi[s]));

    TraceRecord empty;
    CHECK_THROWS_AS(regret_curve(empty, spec, 20), InvalidParams);
}

TEST_CASE("cover time bound: closed forms") {
    std::mt19937_64 eng(42);
    const auto spec = equality_spec({0.7, 0.3}, 10, 0.5, eng);
    CHECK(cover_time_bound(spec, 10, 0.5) ==
          Catch::Approx(10.0 / 0.5 * (1.0 + 1.0 / (1.0 - 0.7))));

    const auto single = equality_spec({1.0}, 7, 0.35, eng);
    CHECK(cover_time_bound(single, 7, 0.35) == Catch::Approx(7.0 / 0.35));

    CHECK_THROWS_AS(cover_time_bound(spec, 10, 0.0), DegenerateBound);
    const auto zero_mass = make_spec({1.0, 0.0}, {{0.5}, {0.5}}, {{0, 1}, {1, 0}});
    CHECK_THROWS_AS(cover_time_bound(zero_mass, 1, 0.5), DegenerateBound);
}

TEST_CASE("cover time mc: single pose always covers in one step") {
    const auto spec = make_spec({1.0}, {{0.5}}, {{1.0}});
    Rng rng(43);
    const auto est = cover_time_mc(spec, "uniform", 100, rng);
    CHECK(est.mean == Catch::Approx(1.0));
    CHECK(est.std_error == 0.0);
}

TEST_CASE("cover time mc: matches the coupon-collector closed form") {
    // certain grasp, uniform landing over two poses: cover = 1 + Geometric(1/2),
    // mean 3
    const auto spec = make_spec({0.5, 0.5}, {{1.0}, {1.0}}, {{1, 0}, {0, 1}});
    Rng rng(44);
    const auto est = cover_time_mc(spec, "oracle", 10'000, rng);
    CHECK(std::abs(est.mean - 3.0) < 3 * est.std_error);
}

TEST_CASE("cover time mc: bound holds on a worst-case instance, ts beats uniform") {
    std::mt19937_64 eng(45);
    const auto spec = equality_spec({0.15, 0.45, 0.4}, 4, 0.6, eng);
    const double bound = cover_time_bound(spec, 4, 0.6);

    Rng rng(46);
    const auto uniform = cover_time_mc(spec, "uniform", 4'000, rng);
    CHECK(uniform.mean <= bound + 3 * uniform.std_error);

    Rng rng2(47);
    const auto ts = cover_time_mc(spec, "ts", 4'000, rng2);
    CHECK(ts.mean <= uniform.mean + 3 * (ts.std_error + uniform.std_error));
}

TEST_CASE("cover time mc: episode cap and sink errors") {
    const auto slow = make_spec({0.5, 0.5}, {{0.01}, {0.01}}, {{1, 0}, {0, 1}});
    Rng rng(48);
    CHECK_THROWS_AS(cover_time_mc(slow, "uniform", 10, rng, 3), EpisodeCap);

    const auto sink = make_spec({0.5, 0.5}, {{0.5}, {0.0}}, {{1, 0}, {0, 1}});
    CHECK_THROWS_AS(cover_time_mc(sink, "uniform", 10, rng), Unreachable);
    CHECK_THROWS_AS(cover_time_mc(slow, "uniform", 0, rng), InvalidParams);
}

TEST_CASE("analyze_object fills the report and degrades gracefully on sinks") {
    const auto good = make_spec({0.4, 0.6}, {{0.5}, {0.8}}, {{1, 0}, {0, 1}});
    const auto r = analyze_object(good);
    CHECK(r.epsilon == Catch::Approx(0.5));
    CHECK(r.lambda_min == Catch::Approx(0.4));
    CHECK(std::isfinite(r.diameter));
    CHECK(std::isfinite(r.j_star));
    CHECK(r.diameter <= r.diameter_bound + 1e-9);

    const auto sink = make_spec({0.5, 0.5}, {{0.5}, {0.0}}, {{1, 0}, {0, 1}});
    const auto rs = analyze_object(sink);
    CHECK(rs.sink_poses == std::vector<int>{1});
    CHECK(std::isnan(rs.diameter));
    CHECK(std::isnan(rs.j_star));

    const auto j = to_json(r);
    CHECK(j.at("epsilon").get<double>() == Catch::Approx(0.5));
}
