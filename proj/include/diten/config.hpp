#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace diten {

/// Raised for anything wrong with user-provided configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

inline double dbm_to_watts(double dbm) { return std::pow(10.0, dbm / 10.0) / 1000.0; }

struct UtilityCoefficients {
    double a1 = 0.8862;
    double a2 = 6.8382;
    double a3 = 0.0006;
    double a4 = 0.9172;
    double a5 = -0.0231;  // negative in the fitted set; see README
    double a6 = 0.8366;
};

struct EnergyParams {
    double n_mig = 1e-4;  // per bit-meter, wired
    double n_syn = 1e-1;  // per second-meter, wireless
    double n_cmp = 1e-7;  // per CPU cycle
    double channel_gain = 1.0;
    double noise_power_w = dbm_to_watts(-174.0);
    double bits_per_sample = 784.0;  // 28x28
};

enum class EmdMode { uniform, per_user };

struct ScenarioConfig {
    int num_users = 20;
    int num_servers = 15;
    double area_side = 120.0;  // meters, square area

    Range twin_bits{4.4e3, 4.6e3};
    Range fresh_samples{200.0, 2000.0};

    EmdMode emd_mode = EmdMode::uniform;
    double emd = 0.2;
    Range emd_range{0.0, 0.6};  // per_user mode only

    int local_epochs = 50;
    int finetune_epochs = 10;
    Range compute_capacity{1.4e3, 1.5e3};
    Range comm_capacity{120.0, 150.0};
    Range cycles_per_unit{54.0, 56.0};

    double tx_power_w = 0.2;
    double bandwidth_hz = 15e3;
    double max_speed = 5.0;  // meters per slot
    int slots = 100;         // T

    EnergyParams energy;
    UtilityCoefficients utility;
    double beta1 = 0.3;
    double beta2 = 0.7;
    double f0 = 200.0;

    /// Throws ConfigError on the first violated invariant.
    void validate() const;
};

/// Reward shaping around the per-slot objective.
struct RewardConfig {
    double barrier_curve = 10.0;  // f
    double penalty_cap = 10.0;
};

enum class OptimizerKind { sgd, adam };

struct PpoConfig {
    double discount = 0.98;   // sigma
    double gae_lambda = 0.9;  // lambda
    double clip = 0.2;        // epsilon
    double actor_lr = 3e-3;
    double critic_lr = 1.5e-3;
    int update_epochs = 10;   // M
    int episodes = 300;       // P
    std::vector<int> hidden{128, 128};
    OptimizerKind optimizer = OptimizerKind::adam;
    bool clip_enabled = true;
    bool normalize_advantages = true;
    bool bootstrap_terminal = false;  // V(s[T+1]) = 0 when false
    // Shared linear path from each (user, server) pair's distance and current
    // association straight to that pair's logit, with its own step size.
    bool pair_skip = true;
    double pair_skip_lr = 1e-2;
};

struct DdpgConfig {
    int buffer_capacity = 10000;
    double tau = 0.01;
    double noise_std = 0.1;
    int batch_size = 64;
    int warmup = 256;
    int updates_per_slot = 1;
    double actor_lr = 1e-4;
    double critic_lr = 1e-3;
};

struct SolverConfig {
    double tol = 1e-8;
    int max_iter = 500;
};

enum class Profile { desk, paper };

struct ExperimentConfig {
    ScenarioConfig scenario;
    RewardConfig reward;
    PpoConfig ppo;
    DdpgConfig ddpg;
    SolverConfig solver;

    void validate() const;
};

/// Sets T and P to the named profile (desk: T=100, P=300; paper: T=750, P=500).
void apply_profile(ExperimentConfig& cfg, Profile profile);
Profile parse_profile(const std::string& name);

/// Reads an INI-style key/value file. Unknown keys and malformed values raise ConfigError.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text);

/// Canonical key/value rendering of every setting; parse_config(render_config(c)) == c.
std::string render_config(const ExperimentConfig& cfg);

}  // namespace diten
