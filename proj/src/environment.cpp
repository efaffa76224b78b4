#include "diten/environment.hpp"

#include <algorithm>
#include <stdexcept>

namespace diten {

namespace {
constexpr std::uint64_t kWorldStream = 0;
constexpr std::uint64_t kEpisodeStream = 1;
}  // namespace

Environment::Environment(ExperimentConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), seed_(seed) {
    cfg_.validate();
    auto rng = make_rng(seed_, {kWorldStream});
    initial_ = make_scenario(cfg_.scenario, rng);
    reset(0);
}

const ScenarioState& Environment::reset(int episode) {
    episode_ = episode;
    steps_ = 0;
    state_ = initial_;
    world_rng_ = make_rng(seed_, {kEpisodeStream, static_cast<std::uint64_t>(episode)});
    return state_;
}

StepOutcome Environment::step(const Association& action, const AllocationVector& gamma, std::string_view alloc_label) {
    if (done()) throw std::logic_error("Environment::step called past the horizon");
    if (action.num_users() != state_.num_users() || action.num_servers() != state_.num_servers())
        throw std::invalid_argument("Environment::step: association shape mismatch");

    StepOutcome out;
    out.reward = reward(state_, cfg_.scenario, cfg_.reward, action, gamma);

    auto& rec = out.record;
    rec.episode = episode_;
    rec.slot = steps_;
    rec.objective = out.reward.objective;
    rec.reward = out.reward.reward;
    rec.feasible = out.reward.feasible;
    rec.alloc_status = std::string(alloc_label);
    const auto rho = user_utilities(state_, cfg_.scenario, gamma);
    for (double r : rho) rec.utility_mean += std::clamp(r, 0.0, 1.0);
    rec.utility_mean /= static_cast<double>(rho.size());
    for (const auto& c : server_costs(state_, cfg_.scenario, action, gamma)) {
        rec.cost_mig += c.migration;
        rec.cost_syn += c.synchronization;
        rec.cost_cmp += c.computation;
    }
    for (int u = 0; u < action.num_users(); ++u) {
        if (action.server_of(u) != state_.association.server_of(u)) ++rec.migrations;
        rec.gamma_mean += gamma[static_cast<std::size_t>(u)];
    }
    rec.gamma_mean /= static_cast<double>(action.num_users());

    state_.association = action;
    ++steps_;
    state_ = advance_slot(state_, cfg_.scenario, world_rng_);
    out.done = done();
    return out;
}

AllocSolution optimize_allocation(const ScenarioState& state, const ExperimentConfig& cfg, const Association& now) {
    return solve(AllocProblem::from_state(state, cfg.scenario, now), cfg.solver.tol, cfg.solver.max_iter);
}

}  // namespace diten
