#include "diten/reward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace diten {

double barrier(double x, double curve, double cap) {
    if (!(curve > 0.0)) throw std::domain_error("barrier: curve must be positive");
    if (x >= 0.0) return cap;
    return std::min(cap, -std::log(-x) / curve);
}

RewardResult reward(const ScenarioState& state, const ScenarioConfig& scenario, const RewardConfig& shaping,
                    const Association& now, std::span<const double> gamma) {
    RewardResult r;
    r.slack = check_constraints(state, scenario, now, gamma);
    if (!r.slack.assignment_valid || !r.slack.allocation_valid)
        throw std::invalid_argument("reward: association or allocation violates its own constraints");
    r.objective = objective(state, scenario, now, gamma);
    r.feasible = r.slack.feasible;
    double penalty = 0.0;
    // barrier arguments are load - capacity = -slack
    for (double s : r.slack.compute_slack) penalty += barrier(-s, shaping.barrier_curve, shaping.penalty_cap);
    for (double s : r.slack.comm_slack) penalty += barrier(-s, shaping.barrier_curve, shaping.penalty_cap);
    r.reward = r.objective - penalty;
    return r;
}

}  // namespace diten
