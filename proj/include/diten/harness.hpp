#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "diten/agent.hpp"
#include "diten/config.hpp"
#include "diten/metrics.hpp"

namespace diten {

enum class Algorithm { ppo, a2c, nearest, nearest_random, ddpg };

std::string_view to_string(Algorithm a);
/// Accepts ppo, a2c, nearest, nearest-random, ddpg. Throws ConfigError otherwise.
Algorithm parse_algorithm(std::string_view tag);

struct ExperimentPlan {
    ExperimentConfig config;
    std::string config_text;  // bytes hashed into the manifest; rendered config when empty
    std::vector<Algorithm> algorithms{Algorithm::ppo};
    std::vector<int> servers{15};
    std::vector<double> emd{0.2};
    std::vector<std::uint64_t> seeds{1};
    int episodes = 1;
    std::filesystem::path out_dir;

    /// Throws ConfigError on empty lists, P < 1 or invalid settings.
    void validate() const;
    std::size_t cell_count() const { return algorithms.size() * servers.size() * emd.size() * seeds.size(); }
};

struct CellKey {
    Algorithm algorithm = Algorithm::ppo;
    int servers = 0;
    double emd = 0.0;
    std::uint64_t seed = 0;

    friend bool operator==(const CellKey&, const CellKey&) = default;
};

std::string cell_name(const CellKey& key);

struct CellResult {
    CellKey key;
    std::vector<EpisodeSummary> episodes;
};

/// Base config with the cell's server count, EMD level and episode budget applied.
ExperimentConfig cell_config(const ExperimentConfig& base, int servers, double emd, int episodes);

std::unique_ptr<Controller> make_controller(Algorithm alg, const ExperimentConfig& cfg, std::uint64_t seed);

/// One cell, start to finish, on a fresh environment.
std::vector<EpisodeSummary> run_cell(const ExperimentConfig& cfg, Algorithm alg, std::uint64_t seed, MetricsSink& sink);

/// Runs every cell on a worker pool, writing
///   <out>/cells/<cell>.jsonl         one record per slot
///   <out>/cells/<cell>.episodes.csv  one row per episode
///   <out>/summary.csv                one row per cell
///   <out>/manifest.json              plan, config hash, code version, timestamp
/// Validation and the output-directory check happen before any cell starts.
std::vector<CellResult> run_plan(const ExperimentPlan& plan);

/// Mean of a summary field over the last `window` episodes (all if fewer).
double final_window_mean(const std::vector<EpisodeSummary>& episodes, int window, double EpisodeSummary::*field);

/// Relative lift (a - b) / |b|.
double lift(double a, double b);

struct CellScore {
    CellKey key;
    double objective = 0.0;  // mean over the final window
};

struct PairLift {
    Algorithm better;
    Algorithm baseline;
    double lift = 0.0;  // mean over matching cells of (a - b) / |b|
    int cells = 0;
};

struct ComparisonTable {
    int window = 100;
    std::vector<CellScore> scores;
    std::vector<PairLift> lifts;

    std::string render() const;
    std::string scores_csv() const;
    std::string lifts_csv() const;
};

/// Throws std::domain_error with fewer than two algorithms or when the
/// algorithms were not run on the same (servers, emd, seed) grid.
ComparisonTable compare_algorithms(const std::vector<CellResult>& cells, int window = 100);
/// Same, reading the JSONL streams listed in <dir>/manifest.json.
ComparisonTable compare_algorithms(const std::filesystem::path& dir, int window = 100);

enum class PlotFamily { reward, objective, utility_cost };
std::string_view to_string(PlotFamily f);
PlotFamily parse_plot_family(std::string_view name);

struct PlotOutput {
    std::filesystem::path file;
    std::size_t rows = 0;
    std::vector<std::string> warnings;  // planned cells without metrics
};

/// Long-format CSV <dir>/plot_<family>.csv built from the cell JSONL streams.
///   reward        x = episode, y = mean episode reward over seeds, series = alg|S|emd
///   objective     x = servers, y = final-window objective over seeds, series = alg|emd
///   utility_cost  x = servers, y_utility, y_cost, series = alg|emd
PlotOutput emit_plot_data(const std::filesystem::path& dir, PlotFamily family, int window = 100);

std::string sha256_hex(std::string_view bytes);

}  // namespace diten
