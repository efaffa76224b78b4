#include "diten/agent.hpp"

namespace diten {

std::vector<EpisodeSummary> run_episodes(Environment& env, Controller& controller, int episodes, MetricsSink& sink) {
    std::vector<EpisodeSummary> out;
    std::vector<SlotRecord> slots;
    for (int ep = 0; ep < episodes; ++ep) {
        env.reset(ep);
        slots.clear();
        while (!env.done()) {
            const Decision d = controller.decide(env);
            const StepOutcome o = env.step(d.association, d.allocation.gamma,
                                             d.label.empty() ? to_string(d.allocation.status) : d.label);
            controller.observe(env, o);
            sink.on_slot(o.record);
            slots.push_back(o.record);
        }
        controller.end_episode(env);
        out.push_back(summarize(ep, slots));
        sink.on_episode(out.back());
    }
    return out;
}

}  // namespace diten
