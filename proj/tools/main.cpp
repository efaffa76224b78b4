#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "diten/alloc.hpp"
#include "diten/fl.hpp"
#include "diten/harness.hpp"

namespace fs = std::filesystem;
using namespace diten;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

struct PlanArgs {
    std::string config;
    std::vector<std::string> algorithms{"ppo"};
    std::vector<int> servers{15};
    std::vector<double> emd{0.2};
    std::vector<std::uint64_t> seeds{1};
    int episodes = -1;
    std::string profile = "desk";
    std::string out = "results";
};

void add_plan_options(CLI::App* cmd, PlanArgs& a) {
    cmd->add_option("--config", a.config, "INI config file (defaults when omitted)");
    cmd->add_option("--algorithm", a.algorithms, "ppo, a2c, nearest, nearest-random, ddpg")->delimiter(',');
    cmd->add_option("--servers", a.servers, "comma-separated server counts")->delimiter(',');
    cmd->add_option("--emd", a.emd, "comma-separated EMD levels")->delimiter(',');
    cmd->add_option("--seed", a.seeds, "comma-separated seeds")->delimiter(',');
    cmd->add_option("--episodes", a.episodes, "episodes per cell (overrides the profile)");
    cmd->add_option("--profile", a.profile, "desk (T=100, P=300) or paper (T=750, P=500)");
    cmd->add_option("--out", a.out, "output directory");
}

ExperimentPlan build_plan(const PlanArgs& a) {
    ExperimentPlan plan;
    if (!a.config.empty()) {
        std::ifstream in(a.config, std::ios::binary);
        if (!in) throw ConfigError("cannot read config file " + a.config);
        std::ostringstream text;
        text << in.rdbuf();
        plan.config_text = text.str();
        plan.config = parse_config(plan.config_text);
    }
    apply_profile(plan.config, parse_profile(a.profile));
    plan.algorithms.clear();
    for (const auto& t : a.algorithms) plan.algorithms.push_back(parse_algorithm(t));
    plan.servers = a.servers;
    plan.emd = a.emd;
    plan.seeds = a.seeds;
    plan.episodes = a.episodes > 0 ? a.episodes : plan.config.ppo.episodes;
    if (a.episodes == 0) throw ConfigError("--episodes must be at least 1");
    plan.out_dir = a.out;
    plan.validate();
    return plan;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

int cmd_run(const PlanArgs& a) {
    const auto plan = build_plan(a);
    const auto cells = run_plan(plan);
    std::cout << "wrote " << cells.size() << " cell(s) to " << plan.out_dir.string() << '\n';
    return kOk;
}

int cmd_compare(const PlanArgs& a) {
    const auto plan = build_plan(a);
    if (plan.algorithms.size() < 2) throw ConfigError("compare needs at least two --algorithm tags");
    run_plan(plan);
    const auto table = compare_algorithms(plan.out_dir);
    write_file(plan.out_dir / "comparison_scores.csv", table.scores_csv());
    write_file(plan.out_dir / "comparison_lifts.csv", table.lifts_csv());
    std::cout << table.render();
    return kOk;
}

int cmd_plot(const std::string& dir, const std::string& family) {
    std::vector<PlotFamily> families;
    if (family == "all")
        families = {PlotFamily::reward, PlotFamily::objective, PlotFamily::utility_cost};
    else
        families = {parse_plot_family(family)};
    for (auto f : families) {
        const auto out = emit_plot_data(dir, f);
        for (const auto& w : out.warnings) std::cerr << "warning: " << w << '\n';
        std::cout << out.file.string() << ": " << out.rows << " rows\n";
    }
    return kOk;
}

int cmd_fl_verify(std::uint64_t seed, int instances, int rounds, const std::string& out) {
    if (instances < 1 || rounds < 1) throw ConfigError("--instances and --rounds must be positive");
    std::ostringstream csv;
    csv << "instance,round,gap,bound,pass\n";
    int violations = 0;
    for (int i = 0; i < instances; ++i) {
        auto rng = make_rng(seed, {static_cast<std::uint64_t>(i)});
        const auto prob = random_problem(rng);
        const double L = prob.smoothness();
        Eigen::VectorXd w0(prob.shards.front().A.rows());
        for (Eigen::Index k = 0; k < w0.size(); ++k) w0(k) = uniform(rng, -10.0, 10.0);
        const auto trace = run_federated(w0, prob, 1.0 / L, rounds);
        const auto rep = verify_bound(trace.losses, prob.loss(prob.minimizer()), L, prob.strong_convexity(), 1.0 / L);
        for (const auto& c : rep.rounds) {
            csv << i << ',' << c.round << ',' << format_double(c.gap) << ',' << format_double(c.bound) << ','
                << (c.pass ? 1 : 0) << '\n';
            violations += c.pass ? 0 : 1;
        }
    }
    if (out.empty() || out == "-")
        std::cout << csv.str();
    else
        write_file(out, csv.str());
    std::cerr << "bound violations: " << violations << '\n';
    return violations == 0 ? kOk : kRuntimeError;
}

int cmd_alloc_check(std::uint64_t seed, int instances, const std::string& config) {
    ExperimentConfig cfg;
    if (!config.empty()) cfg = load_config(config);
    cfg.scenario.num_users = 3;
    cfg.scenario.num_servers = 3;
    double worst_gap = 0.0, worst_dist = 0.0;
    for (int i = 0; i < instances; ++i) {
        auto rng = make_rng(seed, {static_cast<std::uint64_t>(i)});
        const auto state = make_scenario(cfg.scenario, rng);
        std::vector<int> pick(3);
        for (auto& p : pick) p = std::uniform_int_distribution<int>(0, 2)(rng);
        const auto prob = AllocProblem::from_state(state, cfg.scenario, Association(pick, 3));
        const auto sol = solve(prob, cfg.solver.tol, cfg.solver.max_iter);
        const auto grid = brute_force_oracle(prob, 0.01);
        worst_gap = std::max(worst_gap, sol.value - grid.value);
        double d = 0.0;
        for (int u = 0; u < 3; ++u) d = std::max(d, std::abs(sol.gamma[u] - grid.gamma[u]));
        worst_dist = std::max(worst_dist, d);
    }
    std::cout << "instances " << instances << "  worst objective gap (solver - grid) " << worst_gap
              << "  worst |gamma - gamma_grid|_inf " << worst_dist << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Association and data-allocation simulator for digital-twin edge networks"};
    app.require_subcommand(1);

    PlanArgs run_args, cmp_args;
    cmp_args.algorithms = {"ppo", "a2c", "nearest", "nearest-random", "ddpg"};
    auto* run = app.add_subcommand("run", "run an experiment plan");
    add_plan_options(run, run_args);
    auto* cmp = app.add_subcommand("compare", "run several algorithms on one grid and print the lift table");
    add_plan_options(cmp, cmp_args);

    std::string plot_dir = "results", family = "all";
    auto* plot = app.add_subcommand("plot-data", "emit long-format CSV for the figure families");
    plot->add_option("--out", plot_dir, "results directory of a previous run");
    plot->add_option("--family", family, "reward, objective, utility_cost or all");

    std::uint64_t fl_seed = 1;
    int fl_instances = 100, fl_rounds = 50;
    std::string fl_out;
    auto* fl = app.add_subcommand("fl-verify", "check the federated convergence bound on random quadratics");
    fl->add_option("--seed", fl_seed);
    fl->add_option("--instances", fl_instances);
    fl->add_option("--rounds", fl_rounds);
    fl->add_option("--out", fl_out, "CSV path (stdout when omitted)");

    std::uint64_t ac_seed = 1;
    int ac_instances = 20;
    std::string ac_config;
    auto* ac = app.add_subcommand("alloc-check", "compare the allocation solver with the grid oracle");
    ac->add_option("--seed", ac_seed);
    ac->add_option("--instances", ac_instances);
    ac->add_option("--config", ac_config);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*run) return cmd_run(run_args);
        if (*cmp) return cmd_compare(cmp_args);
        if (*plot) return cmd_plot(plot_dir, family);
        if (*fl) return cmd_fl_verify(fl_seed, fl_instances, fl_rounds, fl_out);
        if (*ac) return cmd_alloc_check(ac_seed, ac_instances, ac_config);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kOk;
}
