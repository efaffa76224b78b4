#pragma once

#include <vector>

#include "diten/environment.hpp"
#include "diten/metrics.hpp"

namespace diten {

/// Decision rule plugged into the shared rollout loop.
class Controller {
public:
    virtual ~Controller() = default;
    virtual Decision decide(const Environment& env) = 0;
    /// Called after every step; env.state() is already the next state.
    virtual void observe(const Environment&, const StepOutcome&) {}
    /// Called once the horizon is reached, before the metrics are flushed.
    virtual void end_episode(const Environment&) {}
};

/// Rolls `episodes` full episodes (episode indices 0..episodes-1), emitting one
/// SlotRecord per slot and one EpisodeSummary per episode.
std::vector<EpisodeSummary> run_episodes(Environment& env, Controller& controller, int episodes, MetricsSink& sink);

}  // namespace diten
