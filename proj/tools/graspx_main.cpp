// Command-line front end: object generation, experiment runs, object
// analysis, sensitivity sweeps, and cover-time estimation over the JSON/CSV
// formats defined in the library headers.
//
// Exit codes: 0 success, 1 runtime/domain failure, 2 usage error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "graspx/analysis.hpp"
#include "graspx/harness.hpp"
#include "graspx/synth.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

// --- gen-object -------------------------------------------------------------

struct GenObjectArgs {
    std::string family;
    std::string out;
    std::string label;
    std::uint64_t seed = 0;
    double prior_fidelity = -1.0;
    int n = 5;
    int k = 100;
    // sensitivity
    double eps = -1.0;
    double lambda_min = -1.0;
    bool toppling = false;
    double topple_mass = 0.1;
    // random
    double dirichlet_conc = 3.0;
    double quality_alpha = 0.5;
    double quality_beta = 8.0;
    double eps_floor = 0.1;
    int topple_density = 2;
    double rand_topple_mass = 0.0;
};

int run_gen_object(const GenObjectArgs& a) {
    graspx::Rng rng(a.seed);
    graspx::ObjectSpec spec;
    if (a.family == "sensitivity") {
        if (a.eps < 0.0) throw UsageError("gen-object: --eps is required for --family sensitivity");
        if (a.lambda_min < 0.0)
            throw UsageError("gen-object: --lambda-min is required for --family sensitivity");
        graspx::SensitivityParams p;
        p.n_poses = a.n;
        p.grasps_per_pose = a.k;
        p.epsilon = a.eps;
        p.lambda_min = a.lambda_min;
        p.toppling = a.toppling;
        p.topple_mass = a.toppling ? a.topple_mass : 0.0;
        spec = graspx::gen_sensitivity_object(p, rng);
    } else if (a.family == "random") {
        graspx::RandomObjectParams p;
        p.n_poses = a.n;
        p.grasps_per_pose = a.k;
        p.dirichlet_concentration = a.dirichlet_conc;
        p.quality_alpha = a.quality_alpha;
        p.quality_beta = a.quality_beta;
        p.eps_floor = a.eps_floor;
        p.topple_density = a.topple_density;
        p.topple_mass = a.rand_topple_mass;
        spec = graspx::gen_random_object(p, rng);
    } else {
        throw UsageError("gen-object: --family must be 'sensitivity' or 'random'");
    }
    if (a.prior_fidelity >= 0.0) spec = graspx::with_prior(std::move(spec), a.prior_fidelity, rng);
    if (!a.label.empty()) spec.label = a.label;
    graspx::save_object(spec, a.out);
    std::cout << "wrote " << spec.label << " (" << spec.n_poses << " poses, "
              << spec.grasps_per_pose << " grasps/pose) to " << a.out << "\n";
    return kExitOk;
}

// --- run ---------------------------------------------------------------------

struct RunArgs {
    std::string config_path;
    std::vector<std::string> objects;
    std::vector<std::string> policies;
    std::size_t horizon = 10000;
    int rollouts = 10;
    int trials = 10;
    int window = 20;
    std::uint64_t seed = 0;
    bool no_toppling = false;
    bool keep_all_poses = false;
    double quality_floor = 1e-9;
    double mass_floor = 1e-3;
    int jobs = 1;
    std::string out_curves = "curves.csv";
    std::string out_summary = "summary.csv";
};

int emit_experiment(const graspx::ExperimentConfig& cfg, int jobs, const std::string& out_curves,
                    const std::string& out_summary) {
    const graspx::ExperimentResult result = graspx::run_experiment(cfg, jobs);

    std::ostringstream curves, summary;
    graspx::write_curves_csv(result, curves);
    graspx::write_summary_csv(result, summary);
    graspx::write_file(out_curves, curves.str());
    graspx::write_file(out_summary, summary.str());
    std::cout << "wrote " << result.cells.size() << " cells to " << out_curves << " and "
              << out_summary << "\n";

    if (!result.failures.empty()) {
        std::cerr << result.failures.size() << " trial(s) failed:\n";
        for (const auto& f : result.failures)
            std::cerr << "  " << f.object_label << " / " << f.policy << " rollout " << f.rollout
                      << " trial " << f.trial << ": " << f.message << "\n";
        return kExitFailure;
    }
    return kExitOk;
}

int run_run(const RunArgs& a, const CLI::App* cmd) {
    graspx::ExperimentConfig cfg;
    if (!a.config_path.empty()) {
        cfg = graspx::load_config(a.config_path);
        if (!a.objects.empty() || !a.policies.empty())
            throw UsageError("run: pass either --config or inline --object/--policy, not both");
        // flag overrides on top of the config file
        if (cmd->count("--horizon")) cfg.horizon = a.horizon;
        if (cmd->count("--rollouts")) cfg.rollouts = a.rollouts;
        if (cmd->count("--trials")) cfg.trials = a.trials;
        if (cmd->count("--window")) cfg.window = a.window;
        if (cmd->count("--seed")) cfg.master_seed = a.seed;
        if (cmd->count("--quality-floor")) cfg.pose_removal.quality_floor = a.quality_floor;
        if (cmd->count("--mass-floor")) cfg.pose_removal.mass_floor = a.mass_floor;
    } else {
        if (a.objects.empty()) throw UsageError("run: need --config or at least one --object");
        if (a.policies.empty()) throw UsageError("run: need at least one --policy");
        for (const auto& path : a.objects) {
            graspx::ObjectDirective d;
            d.kind = graspx::ObjectDirective::Kind::File;
            d.path = path;
            cfg.objects.push_back(std::move(d));
        }
        cfg.policies = a.policies;
        cfg.horizon = a.horizon;
        cfg.rollouts = a.rollouts;
        cfg.trials = a.trials;
        cfg.window = a.window;
        cfg.master_seed = a.seed;
        cfg.pose_removal.quality_floor = a.quality_floor;
        cfg.pose_removal.mass_floor = a.mass_floor;
    }
    if (a.no_toppling) cfg.toppling_enabled = false;
    if (a.keep_all_poses) cfg.pose_removal.enabled = false;
    try {
        graspx::validate(cfg);
    } catch (const graspx::InvalidParams& e) {
        throw UsageError(e.what());
    }
    return emit_experiment(cfg, a.jobs, a.out_curves, a.out_summary);
}

// --- analyze -----------------------------------------------------------------

struct AnalyzeArgs {
    std::string object_path;
    std::string json_out;
    bool strict = false;
    std::size_t cover_episodes = 0;
    std::string cover_policy = "uniform";
    std::uint64_t seed = 0;
};

void print_report(const graspx::AnalysisReport& r, std::ostream& out) {
    out << "label: " << r.label << "\n";
    out << "epsilon: " << fmt(r.epsilon) << "\n";
    out << "lambda_min: " << fmt(r.lambda_min) << "\n";
    out << "assumption4_violation: " << fmt(r.assumption4_violation) << "\n";
    out << "sink_poses:";
    for (int s : r.sink_poses) out << ' ' << s;
    out << (r.sink_poses.empty() ? " none" : "") << "\n";
    out << "diameter: " << fmt(r.diameter) << "\n";
    out << "diameter_bound: " << fmt(r.diameter_bound) << "\n";
    out << "j_star: " << fmt(r.j_star) << "\n";
    if (!std::isnan(r.cover_bound)) {
        out << "cover_bound: " << fmt(r.cover_bound) << "\n";
        out << "cover_mc_mean: " << fmt(r.cover_mc_mean) << "\n";
        out << "cover_mc_se: " << fmt(r.cover_mc_se) << "\n";
    }
}

int run_analyze(const AnalyzeArgs& a) {
    const graspx::ObjectSpec spec = graspx::load_object(a.object_path);
    graspx::AnalysisReport report = graspx::analyze_object(spec);
    if (a.cover_episodes > 0 && report.sink_poses.empty()) {
        report.cover_bound = graspx::cover_time_bound(spec);
        graspx::Rng rng(a.seed);
        const auto est = graspx::cover_time_mc(spec, a.cover_policy, a.cover_episodes, rng);
        report.cover_mc_mean = est.mean;
        report.cover_mc_se = est.std_error;
    }
    print_report(report, std::cout);
    if (!a.json_out.empty())
        graspx::write_file(a.json_out, graspx::to_json(report).dump(2) + "\n");
    if (a.strict && !report.sink_poses.empty()) {
        std::cerr << "strict mode: object has sink poses\n";
        return kExitFailure;
    }
    return kExitOk;
}

// --- sweep --------------------------------------------------------------------

struct SweepArgs {
    std::string grid;
    int n = 5;
    int k = 100;
    std::vector<std::string> policies;
    std::size_t horizon = 10000;
    int rollouts = 10;
    int trials = 10;
    int window = 20;
    std::uint64_t seed = 0;
    int jobs = 1;
    std::string out = "sweep_summary.csv";
    std::string out_curves;
};

std::vector<double> parse_values(const std::string& text, const std::string& dim) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError("sweep: bad value '" + item + "' in dimension '" + dim + "'");
        }
    }
    if (out.empty()) throw UsageError("sweep: dimension '" + dim + "' has no values");
    return out;
}

int run_sweep(const SweepArgs& a) {
    std::vector<double> eps{0.5}, lambda{0.1};
    std::vector<double> ks{static_cast<double>(a.k)};
    std::vector<double> ns{static_cast<double>(a.n)};
    bool any_dim = false;
    std::stringstream ss(a.grid);
    std::string part;
    while (std::getline(ss, part, ';')) {
        if (part.empty()) continue;
        const auto eq = part.find('=');
        if (eq == std::string::npos)
            throw UsageError("sweep: grid term '" + part + "' is not name=v1,v2,...");
        const std::string name = part.substr(0, eq);
        const auto values = parse_values(part.substr(eq + 1), name);
        if (name == "eps")
            eps = values;
        else if (name == "lambda")
            lambda = values;
        else if (name == "k")
            ks = values;
        else if (name == "n")
            ns = values;
        else
            throw UsageError("sweep: unknown grid dimension '" + name +
                             "' (expected eps, lambda, k, n)");
        any_dim = true;
    }
    if (!any_dim) throw UsageError("sweep: --grid has no dimensions");

    graspx::ExperimentConfig cfg;
    cfg.policies = a.policies.empty() ? std::vector<std::string>{"ts"} : a.policies;
    cfg.horizon = a.horizon;
    cfg.rollouts = a.rollouts;
    cfg.trials = a.trials;
    cfg.window = a.window;
    cfg.master_seed = a.seed;
    for (double n : ns)
        for (double k : ks)
            for (double e : eps)
                for (double l : lambda) {
                    graspx::ObjectDirective d;
                    d.kind = graspx::ObjectDirective::Kind::Sensitivity;
                    d.sensitivity.n_poses = static_cast<int>(n);
                    d.sensitivity.grasps_per_pose = static_cast<int>(k);
                    d.sensitivity.epsilon = e;
                    d.sensitivity.lambda_min = l;
                    try {
                        graspx::validate(d.sensitivity);
                    } catch (const graspx::InvalidParams& ex) {
                        throw UsageError(ex.what());
                    }
                    cfg.objects.push_back(std::move(d));
                }

    const graspx::ExperimentResult result = graspx::run_experiment(cfg, a.jobs);
    std::ostringstream summary;
    graspx::write_summary_csv(result, summary);
    graspx::write_file(a.out, summary.str());
    if (!a.out_curves.empty()) {
        std::ostringstream curves;
        graspx::write_curves_csv(result, curves);
        graspx::write_file(a.out_curves, curves.str());
    }
    std::cout << "wrote " << result.cells.size() << " summary rows to " << a.out << "\n";
    if (!result.failures.empty()) {
        std::cerr << result.failures.size() << " trial(s) failed\n";
        return kExitFailure;
    }
    return kExitOk;
}

// --- cover-time ----------------------------------------------------------------

struct CoverArgs {
    std::string object_path;
    std::string policy = "uniform";
    std::size_t episodes = 0;
    std::uint64_t seed = 0;
    std::uint64_t cap = 10'000'000;
};

int run_cover(const CoverArgs& a) {
    if (a.episodes == 0) throw UsageError("cover-time: --episodes must be >= 1");
    const graspx::ObjectSpec spec = graspx::load_object(a.object_path);
    const auto rep = graspx::assumption_report(spec);
    if (!rep.sink_poses.empty()) {
        std::cerr << "object has sink poses; cover time undefined\n";
        return kExitFailure;
    }
    const double bound = graspx::cover_time_bound(spec, spec.grasps_per_pose, rep.epsilon);
    graspx::Rng rng(a.seed);
    const auto est = graspx::cover_time_mc(spec, a.policy, a.episodes, rng, a.cap);
    std::cout << "label: " << spec.label << "\n";
    std::cout << "policy: " << a.policy << "\n";
    std::cout << "cover_bound: " << fmt(bound) << "\n";
    std::cout << "cover_mc_mean: " << fmt(est.mean) << "\n";
    std::cout << "cover_mc_se: " << fmt(est.std_error) << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Grasp-exploration MDP simulator, policies, and analysis"};
    app.require_subcommand(1);

    GenObjectArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-object", "Generate a synthetic object spec file");
    gen_cmd->add_option("--family", gen.family, "sensitivity | random")->required();
    gen_cmd->add_option("--out", gen.out, "output object JSON path")->required();
    gen_cmd->add_option("--label", gen.label, "override the object label");
    gen_cmd->add_option("--seed", gen.seed, "generator seed");
    gen_cmd->add_option("--n", gen.n, "number of poses");
    gen_cmd->add_option("--k", gen.k, "grasps per pose");
    gen_cmd->add_option("--eps", gen.eps, "sensitivity: quality of each pose's one good grasp");
    gen_cmd->add_option("--lambda-min", gen.lambda_min, "sensitivity: rare-pose landing probability");
    gen_cmd->add_flag("--toppling", gen.toppling, "sensitivity: enable uniform toppling");
    gen_cmd->add_option("--topple-mass", gen.topple_mass, "sensitivity: off-diagonal topple mass");
    gen_cmd->add_option("--dirichlet-conc", gen.dirichlet_conc, "random: landing Dirichlet concentration");
    gen_cmd->add_option("--quality-alpha", gen.quality_alpha, "random: quality Beta alpha");
    gen_cmd->add_option("--quality-beta", gen.quality_beta, "random: quality Beta beta");
    gen_cmd->add_option("--eps-floor", gen.eps_floor, "random: guaranteed best-grasp quality");
    gen_cmd->add_option("--topple-density", gen.topple_density, "random: topple targets per pose");
    gen_cmd->add_option("--rand-topple-mass", gen.rand_topple_mass, "random: off-diagonal topple mass");
    gen_cmd->add_option("--prior-fidelity", gen.prior_fidelity,
                        "attach a synthetic prior of this fidelity (0..1)");

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Run an experiment matrix and emit CSVs");
    run_cmd->add_option("--config", run.config_path, "experiment config JSON");
    run_cmd->add_option("--object", run.objects, "object spec file (repeatable)");
    run_cmd->add_option("--policy", run.policies, "policy name (repeatable)");
    run_cmd->add_option("--horizon", run.horizon, "timesteps per trial");
    run_cmd->add_option("--rollouts", run.rollouts, "rollouts per cell");
    run_cmd->add_option("--trials", run.trials, "trials per rollout");
    run_cmd->add_option("--window", run.window, "smoothing window");
    run_cmd->add_option("--seed", run.seed, "master seed");
    run_cmd->add_flag("--no-toppling", run.no_toppling, "force the topple matrix to identity");
    run_cmd->add_flag("--keep-all-poses", run.keep_all_poses, "skip pose removal");
    run_cmd->add_option("--quality-floor", run.quality_floor, "pose removal quality floor");
    run_cmd->add_option("--mass-floor", run.mass_floor, "pose removal landing-probability floor");
    run_cmd->add_option("--jobs", run.jobs, "worker threads (0 = hardware)");
    run_cmd->add_option("--out-curves", run.out_curves, "curves CSV path");
    run_cmd->add_option("--out-summary", run.out_summary, "summary CSV path");

    AnalyzeArgs an;
    auto* an_cmd = app.add_subcommand("analyze", "Print analysis scalars for one object");
    an_cmd->add_option("--object", an.object_path, "object spec file")->required();
    an_cmd->add_option("--json", an.json_out, "also write the report as JSON");
    an_cmd->add_flag("--strict", an.strict, "exit 1 when the object has sink poses");
    an_cmd->add_option("--cover-episodes", an.cover_episodes,
                       "also estimate cover time with this many episodes");
    an_cmd->add_option("--cover-policy", an.cover_policy, "policy for the cover-time estimate");
    an_cmd->add_option("--seed", an.seed, "seed for the cover-time estimate");

    SweepArgs sw;
    auto* sw_cmd = app.add_subcommand("sweep", "Run a sensitivity grid of objects");
    sw_cmd->add_option("--grid", sw.grid, "e.g. eps=0.1,0.5;lambda=0.01,0.1;k=100")->required();
    sw_cmd->add_option("--n", sw.n, "poses per sensitivity object");
    sw_cmd->add_option("--k", sw.k, "grasps per pose when k is not swept");
    sw_cmd->add_option("--policy", sw.policies, "policy name (repeatable; default ts)");
    sw_cmd->add_option("--horizon", sw.horizon, "timesteps per trial");
    sw_cmd->add_option("--rollouts", sw.rollouts, "rollouts per cell");
    sw_cmd->add_option("--trials", sw.trials, "trials per rollout");
    sw_cmd->add_option("--window", sw.window, "smoothing window");
    sw_cmd->add_option("--seed", sw.seed, "master seed");
    sw_cmd->add_option("--jobs", sw.jobs, "worker threads (0 = hardware)");
    sw_cmd->add_option("--out", sw.out, "summary CSV path");
    sw_cmd->add_option("--out-curves", sw.out_curves, "optional curves CSV path");

    CoverArgs cov;
    auto* cov_cmd = app.add_subcommand("cover-time", "Cover-time bound and Monte Carlo estimate");
    cov_cmd->add_option("--object", cov.object_path, "object spec file")->required();
    cov_cmd->add_option("--policy", cov.policy, "policy name");
    cov_cmd->add_option("--episodes", cov.episodes, "Monte Carlo episodes")->required();
    cov_cmd->add_option("--seed", cov.seed, "seed");
    cov_cmd->add_option("--cap", cov.cap, "per-episode step cap");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (gen_cmd->parsed()) return run_gen_object(gen);
        if (run_cmd->parsed()) return run_run(run, run_cmd);
        if (an_cmd->parsed()) return run_analyze(an);
        if (sw_cmd->parsed()) return run_sweep(sw);
        if (cov_cmd->parsed()) return run_cover(cov);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const graspx::InvalidParams& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}
