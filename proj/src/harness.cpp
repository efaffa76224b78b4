#include "diten/harness.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "diten/baselines.hpp"
#include "diten/ppo.hpp"

#ifndef DITEN_VERSION
#define DITEN_VERSION "unknown"
#endif

namespace diten {

namespace fs = std::filesystem;

std::string_view to_string(Algorithm a) {
    switch (a) {
        case Algorithm::ppo: return "ppo";
        case Algorithm::a2c: return "a2c";
        case Algorithm::nearest: return "nearest";
        case Algorithm::nearest_random: return "nearest-random";
        case Algorithm::ddpg: return "ddpg";
    }
    return "unknown";
}

Algorithm parse_algorithm(std::string_view tag) {
    for (auto a : {Algorithm::ppo, Algorithm::a2c, Algorithm::nearest, Algorithm::nearest_random, Algorithm::ddpg})
        if (tag == to_string(a)) return a;
    throw ConfigError("unknown algorithm '" + std::string(tag) + "' (expected ppo, a2c, nearest, nearest-random, ddpg)");
}

void ExperimentPlan::validate() const {
    if (algorithms.empty()) throw ConfigError("plan: no algorithms");
    if (servers.empty()) throw ConfigError("plan: no server counts");
    if (emd.empty()) throw ConfigError("plan: no EMD levels");
    if (seeds.empty()) throw ConfigError("plan: no seeds");
    if (episodes < 1) throw ConfigError("plan: episodes must be at least 1");
    for (int s : servers)
        if (s < 1) throw ConfigError("plan: server counts must be positive");
    for (double e : emd)
        if (!(e >= 0.0 && e <= 2.0)) throw ConfigError("plan: EMD levels must lie in [0, 2]");
    for (int s : servers)
        for (double e : emd) cell_config(config, s, e, episodes).validate();
}

std::string cell_name(const CellKey& k) {
    return std::string(to_string(k.algorithm)) + "_S" + std::to_string(k.servers) + "_emd" + format_double(k.emd) +
           "_seed" + std::to_string(k.seed);
}

ExperimentConfig cell_config(const ExperimentConfig& base, int servers, double emd, int episodes) {
    ExperimentConfig cfg = base;
    cfg.scenario.num_servers = servers;
    cfg.scenario.emd_mode = EmdMode::uniform;
    cfg.scenario.emd = emd;
    cfg.ppo.episodes = episodes;
    return cfg;
}

std::unique_ptr<Controller> make_controller(Algorithm alg, const ExperimentConfig& cfg, std::uint64_t seed) {
    switch (alg) {
        case Algorithm::ppo: return std::make_unique<PolicyGradientAgent>(cfg, seed, Surrogate::clipped);
        case Algorithm::a2c: return std::make_unique<PolicyGradientAgent>(cfg, seed, Surrogate::vanilla);
        case Algorithm::nearest: return std::make_unique<NearestController>(cfg);
        case Algorithm::nearest_random: return std::make_unique<NearestRandomController>(cfg, seed);
        case Algorithm::ddpg: return std::make_unique<DdpgAgent>(cfg, seed);
    }
    throw std::logic_error("make_controller: unhandled algorithm");
}

std::vector<EpisodeSummary> run_cell(const ExperimentConfig& cfg, Algorithm alg, std::uint64_t seed, MetricsSink& sink) {
    Environment env(cfg, seed);
    auto controller = make_controller(alg, cfg, seed);
    return run_episodes(env, *controller, cfg.ppo.episodes, sink);
}

double final_window_mean(const std::vector<EpisodeSummary>& episodes, int window, double EpisodeSummary::*field) {
    if (episodes.empty()) return 0.0;
    const std::size_t n = std::min(episodes.size(), static_cast<std::size_t>(std::max(window, 1)));
    double sum = 0.0;
    for (std::size_t i = episodes.size() - n; i < episodes.size(); ++i) sum += episodes[i].*field;
    return sum / static_cast<double>(n);
}

double lift(double a, double b) {
    if (b == 0.0) throw std::domain_error("lift: baseline value is zero");
    return (a - b) / std::abs(b);
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return out.str();
}

namespace {

std::vector<CellKey> plan_cells(const ExperimentPlan& plan) {
    std::vector<CellKey> keys;
    for (auto a : plan.algorithms)
        for (int s : plan.servers)
            for (double e : plan.emd)
                for (auto seed : plan.seeds) keys.push_back({a, s, e, seed});
    return keys;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string summary_csv(const std::vector<CellResult>& cells) {
    std::string out =
        "algorithm,servers,emd,seed,episodes,objective_first,objective_final,utility_final,cost_final,reward_final,"
        "feasible_final\n";
    for (const auto& c : cells) {
        std::vector<EpisodeSummary> first(c.episodes.begin(),
                                          c.episodes.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(c.episodes.size(), 100)));
        std::vector<EpisodeSummary> costs = c.episodes;
        for (auto& e : costs) e.cost_mig = e.cost_total();
        out += std::string(to_string(c.key.algorithm)) + ',' + std::to_string(c.key.servers) + ',' +
               format_double(c.key.emd) + ',' + std::to_string(c.key.seed) + ',' + std::to_string(c.episodes.size());
        for (double v : {final_window_mean(first, 100, &EpisodeSummary::objective),
                         final_window_mean(c.episodes, 100, &EpisodeSummary::objective),
                         final_window_mean(c.episodes, 100, &EpisodeSummary::utility_mean),
                         final_window_mean(costs, 100, &EpisodeSummary::cost_mig),
                         final_window_mean(c.episodes, 100, &EpisodeSummary::reward),
                         final_window_mean(c.episodes, 100, &EpisodeSummary::feasible)})
            out += ',' + format_double(v);
        out += '\n';
    }
    return out;
}

}  // namespace

std::vector<CellResult> run_plan(const ExperimentPlan& plan) {
    plan.validate();
    if (plan.out_dir.empty()) throw ConfigError("plan: no output directory");
    std::error_code ec;
    fs::create_directories(plan.out_dir / "cells", ec);
    if (ec) throw std::runtime_error("cannot create " + (plan.out_dir / "cells").string() + ": " + ec.message());
    {
        const auto probe = plan.out_dir / ".write-probe";
        std::ofstream p(probe);
        if (!p) throw std::runtime_error("output directory is not writable: " + plan.out_dir.string());
        p.close();
        fs::remove(probe, ec);
    }

    const auto keys = plan_cells(plan);
    std::vector<CellResult> results(keys.size());
    std::vector<std::exception_ptr> errors(keys.size());
    const int n = static_cast<int>(keys.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (int i = 0; i < n; ++i) {
        const auto& key = keys[static_cast<std::size_t>(i)];
        try {
            const auto cfg = cell_config(plan.config, key.servers, key.emd, plan.episodes);
            const auto base = plan.out_dir / "cells" / cell_name(key);
            FileSink sink(base.string() + ".jsonl", base.string() + ".episodes.csv");
            results[static_cast<std::size_t>(i)] = {key, run_cell(cfg, key.algorithm, key.seed, sink)};
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    write_text(plan.out_dir / "summary.csv", summary_csv(results));

    nlohmann::ordered_json m;
    m["code_version"] = DITEN_VERSION;
    m["config_hash"] = sha256_hex(plan.config_text.empty() ? render_config(plan.config) : plan.config_text);
    m["created"] = utc_timestamp();
    m["episodes"] = plan.episodes;
    m["slots"] = plan.config.scenario.slots;
    m["algorithms"] = nlohmann::json::array();
    for (auto a : plan.algorithms) m["algorithms"].push_back(std::string(to_string(a)));
    m["servers"] = plan.servers;
    m["emd"] = plan.emd;
    m["seeds"] = plan.seeds;
    m["cells"] = nlohmann::json::array();
    for (const auto& k : keys) {
        nlohmann::ordered_json c;
        c["algorithm"] = std::string(to_string(k.algorithm));
        c["servers"] = k.servers;
        c["emd"] = k.emd;
        c["seed"] = k.seed;
        c["jsonl"] = "cells/" + cell_name(k) + ".jsonl";
        c["episodes_csv"] = "cells/" + cell_name(k) + ".episodes.csv";
        m["cells"].push_back(c);
    }
    write_text(plan.out_dir / "manifest.json", m.dump(2) + "\n");
    return results;
}

// ---------------------------------------------------------------------------
// comparison

namespace {

struct GridKey {
    int servers;
    double emd;
    std::uint64_t seed;
    auto operator<=>(const GridKey&) const = default;
};

}  // namespace

ComparisonTable compare_algorithms(const std::vector<CellResult>& cells, int window) {
    ComparisonTable t;
    t.window = window;
    std::vector<Algorithm> algs;
    std::map<Algorithm, std::map<GridKey, double>> by_alg;
    for (const auto& c : cells) {
        if (std::find(algs.begin(), algs.end(), c.key.algorithm) == algs.end()) algs.push_back(c.key.algorithm);
        const double obj = final_window_mean(c.episodes, window, &EpisodeSummary::objective);
        by_alg[c.key.algorithm][{c.key.servers, c.key.emd, c.key.seed}] = obj;
        t.scores.push_back({c.key, obj});
    }
    if (algs.size() < 2) throw std::domain_error("compare_algorithms: need at least two algorithms");
    for (auto a : algs) {
        std::vector<GridKey> ga, gb;
        for (const auto& [k, v] : by_alg[a]) ga.push_back(k);
        for (const auto& [k, v] : by_alg[algs.front()]) gb.push_back(k);
        if (ga != gb) throw std::domain_error("compare_algorithms: algorithms were run on different cell grids");
    }
    for (auto a : algs) {
        for (auto b : algs) {
            if (a == b) continue;
            PairLift p{a, b, 0.0, 0};
            for (const auto& [k, vb] : by_alg[b]) {
                p.lift += lift(by_alg[a][k], vb);
                ++p.cells;
            }
            p.lift /= p.cells;
            t.lifts.push_back(p);
        }
    }
    return t;
}

ComparisonTable compare_algorithms(const fs::path& dir, int window) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw std::runtime_error("no manifest.json in " + dir.string());
    const auto m = nlohmann::json::parse(in);
    std::vector<CellResult> cells;
    for (const auto& c : m.at("cells")) {
        CellResult r;
        r.key = {parse_algorithm(c.at("algorithm").get<std::string>()), c.at("servers").get<int>(),
                 c.at("emd").get<double>(), c.at("seed").get<std::uint64_t>()};
        r.episodes = summarize_all(read_jsonl(dir / c.at("jsonl").get<std::string>()));
        cells.push_back(std::move(r));
    }
    return compare_algorithms(cells, window);
}

std::string ComparisonTable::render() const {
    std::ostringstream out;
    out << "mean objective over the final " << window << " episodes\n";
    out << std::left << std::setw(16) << "algorithm" << std::setw(9) << "servers" << std::setw(7) << "emd" << std::setw(8)
        << "seed" << "objective\n";
    for (const auto& s : scores)
        out << std::left << std::setw(16) << to_string(s.key.algorithm) << std::setw(9) << s.key.servers << std::setw(7)
            << format_double(s.key.emd) << std::setw(8) << s.key.seed << std::fixed << std::setprecision(6) << s.objective
            << std::defaultfloat << '\n';
    out << "\nlift (a - b) / |b|, i.e. \"times higher\", averaged over cells\n";
    for (const auto& l : lifts)
        out << std::left << std::setw(16) << to_string(l.better) << "vs " << std::setw(16) << to_string(l.baseline)
            << std::fixed << std::setprecision(4) << l.lift << std::defaultfloat << '\n';
    return out.str();
}

std::string ComparisonTable::scores_csv() const {
    std::string out = "algorithm,servers,emd,seed,objective\n";
    for (const auto& s : scores)
        out += std::string(to_string(s.key.algorithm)) + ',' + std::to_string(s.key.servers) + ',' +
               format_double(s.key.emd) + ',' + std::to_string(s.key.seed) + ',' + format_double(s.objective) + '\n';
    return out;
}

std::string ComparisonTable::lifts_csv() const {
    std::string out = "algorithm,baseline,lift,cells\n";
    for (const auto& l : lifts)
        out += std::string(to_string(l.better)) + ',' + std::string(to_string(l.baseline)) + ',' + format_double(l.lift) +
               ',' + std::to_string(l.cells) + '\n';
    return out;
}

// ---------------------------------------------------------------------------
// plot data

std::string_view to_string(PlotFamily f) {
    switch (f) {
        case PlotFamily::reward: return "reward";
        case PlotFamily::objective: return "objective";
        case PlotFamily::utility_cost: return "utility_cost";
    }
    return "unknown";
}

PlotFamily parse_plot_family(std::string_view name) {
    for (auto f : {PlotFamily::reward, PlotFamily::objective, PlotFamily::utility_cost})
        if (name == to_string(f)) return f;
    throw ConfigError("unknown plot family '" + std::string(name) + "' (expected reward, objective, utility_cost)");
}

PlotOutput emit_plot_data(const fs::path& dir, PlotFamily family, int window) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw std::runtime_error("no manifest.json in " + dir.string());
    const auto m = nlohmann::json::parse(in);

    PlotOutput out;
    // series label -> x -> per-seed values
    struct Acc {
        std::vector<double> y, y2;
    };
    std::map<std::string, std::map<double, Acc>> groups;
    std::vector<std::string> order;
    for (const auto& c : m.at("cells")) {
        const CellKey key{parse_algorithm(c.at("algorithm").get<std::string>()), c.at("servers").get<int>(),
                          c.at("emd").get<double>(), c.at("seed").get<std::uint64_t>()};
        const auto path = dir / c.at("jsonl").get<std::string>();
        if (!fs::exists(path)) {
            out.warnings.push_back("missing metrics for cell " + cell_name(key));
            continue;
        }
        const auto episodes = summarize_all(read_jsonl(path));
        std::string series = std::string(to_string(key.algorithm));
        if (family == PlotFamily::reward) series += "|S=" + std::to_string(key.servers);
        series += "|emd=" + format_double(key.emd);
        if (!groups.count(series)) order.push_back(series);
        auto& g = groups[series];
        if (family == PlotFamily::reward) {
            for (const auto& e : episodes) g[e.episode].y.push_back(e.reward);
        } else if (family == PlotFamily::objective) {
            g[key.servers].y.push_back(final_window_mean(episodes, window, &EpisodeSummary::objective));
        } else {
            auto costs = episodes;
            for (auto& e : costs) e.cost_mig = e.cost_total();
            g[key.servers].y.push_back(final_window_mean(episodes, window, &EpisodeSummary::utility_mean));
            g[key.servers].y2.push_back(final_window_mean(costs, window, &EpisodeSummary::cost_mig));
        }
    }

    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    };
    std::string csv = family == PlotFamily::utility_cost ? "x,y_utility,y_cost,series\n" : "x,y,series\n";
    for (const auto& series : order) {
        for (const auto& [x, acc] : groups[series]) {
            csv += format_double(x) + ',' + format_double(mean(acc.y));
            if (family == PlotFamily::utility_cost) csv += ',' + format_double(mean(acc.y2));
            csv += ',' + series + '\n';
            ++out.rows;
        }
    }
    out.file = dir / ("plot_" + std::string(to_string(family)) + ".csv");
    write_text(out.file, csv);
    return out;
}

}  // namespace diten
