#pragma once

#include <span>

#include "diten/config.hpp"
#include "diten/scenario.hpp"

namespace diten {

/// Log barrier on a constraint value x <= 0: -(1/f) ln(-x) for x < 0, capped at `cap`;
/// a violated constraint (x >= 0) costs exactly `cap`.
double barrier(double x, double curve, double cap);

struct RewardResult {
    double reward = 0.0;
    double objective = 0.0;
    bool feasible = true;
    SlackReport slack;
};

/// Objective minus the compute and communication barrier sums. Uses
/// state.association as the previous assignment.
RewardResult reward(const ScenarioState& state, const ScenarioConfig& scenario, const RewardConfig& shaping,
                    const Association& now, std::span<const double> gamma);

}  // namespace diten
