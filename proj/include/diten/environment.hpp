#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "diten/alloc.hpp"
#include "diten/config.hpp"
#include "diten/metrics.hpp"
#include "diten/reward.hpp"
#include "diten/scenario.hpp"

namespace diten {

struct StepOutcome {
    RewardResult reward;
    SlotRecord record;
    bool done = false;
};

/// One simulated cell. The world drawn at construction is the start of every
/// episode; mobility and data arrivals inside episode k come from a stream keyed
/// by (seed, k), so different controllers see identical exogenous trajectories.
class Environment {
public:
    Environment(ExperimentConfig cfg, std::uint64_t seed);

    const ScenarioState& reset(int episode);
    const ScenarioState& state() const { return state_; }
    const ScenarioState& initial_state() const { return initial_; }
    const ExperimentConfig& config() const { return cfg_; }
    int episode() const { return episode_; }
    int horizon() const { return cfg_.scenario.slots; }
    bool done() const { return steps_ >= cfg_.scenario.slots; }

    /// Scores the decision, records the slot, installs `action` as the
    /// association in force and advances the world by one slot.
    StepOutcome step(const Association& action, const AllocationVector& gamma, std::string_view alloc_label);
    StepOutcome step(const Association& action, const AllocSolution& allocation) {
        return step(action, allocation.gamma, to_string(allocation.status));
    }

private:
    ExperimentConfig cfg_;
    std::uint64_t seed_;
    ScenarioState initial_;
    ScenarioState state_;
    Rng world_rng_;
    int episode_ = 0;
    int steps_ = 0;
};

/// Decision for the current slot: association plus allocation.
struct Decision {
    Association association;
    AllocSolution allocation;
    std::string label;  // overrides the solver status in the metrics when set
};

/// Solves the allocation for a fixed association with the configured tolerances.
AllocSolution optimize_allocation(const ScenarioState& state, const ExperimentConfig& cfg, const Association& now);

}  // namespace diten
