#include "diten/baselines.hpp"

#include "diten/policy.hpp"

namespace diten {

namespace {
constexpr std::uint64_t kRandomAllocStream = 4;
}

AllocationVector random_allocation(int users, Rng& rng) {
    AllocationVector g(static_cast<std::size_t>(users));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (auto& x : g) x = unit(rng);
    return g;
}

Decision NearestController::decide(const Environment& env) {
    Decision d;
    d.association = nearest_feasible(env.state(), cfg_.scenario).association;
    d.allocation = optimize_allocation(env.state(), cfg_, d.association);
    return d;
}

NearestRandomController::NearestRandomController(const ExperimentConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), rng_(make_rng(seed, {kRandomAllocStream})) {}

Decision NearestRandomController::decide(const Environment& env) {
    Decision d;
    d.association = nearest_feasible(env.state(), cfg_.scenario).association;
    d.allocation.gamma = random_allocation(env.state().num_users(), rng_);
    d.label = "random";
    d.allocation.value = neg_objective(AllocProblem::from_state(env.state(), cfg_.scenario, d.association),
                                       d.allocation.gamma);
    return d;
}

}  // namespace diten
