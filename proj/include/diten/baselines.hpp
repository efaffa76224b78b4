#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "diten/agent.hpp"
#include "diten/mlp.hpp"

namespace diten {

/// gamma_u ~ U[0, 1] independently.
AllocationVector random_allocation(int users, Rng& rng);

/// Nearest server with capacity repair, allocation from the solver.
class NearestController : public Controller {
public:
    explicit NearestController(const ExperimentConfig& cfg) : cfg_(cfg) {}
    Decision decide(const Environment& env) override;

private:
    ExperimentConfig cfg_;
};

/// Nearest server with capacity repair, uniformly random allocation.
class NearestRandomController : public Controller {
public:
    NearestRandomController(const ExperimentConfig& cfg, std::uint64_t seed);
    Decision decide(const Environment& env) override;

private:
    ExperimentConfig cfg_;
    Rng rng_;
};

struct ReplayItem {
    std::vector<double> state;
    std::vector<double> action;  // relaxed scores, per-user blocks of S
    double reward = 0.0;
    std::vector<double> next_state;
    bool done = false;
};

/// Fixed-capacity ring buffer; the oldest item is overwritten when full.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);
    void push(ReplayItem item);
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    const ReplayItem& operator[](std::size_t i) const { return items_[i]; }

private:
    std::size_t capacity_;
    std::size_t next_ = 0;
    std::vector<ReplayItem> items_;
};

/// Deterministic-policy baseline on a relaxed action: the actor emits per-user
/// softmax scores over servers, rollouts add Gaussian noise to the scores and
/// take the per-user argmax. Critic Q(s, scores), replay, soft-updated targets.
class DdpgAgent : public Controller {
public:
    DdpgAgent(const ExperimentConfig& cfg, std::uint64_t seed);

    Decision decide(const Environment& env) override;
    void observe(const Environment& env, const StepOutcome& outcome) override;

    /// Relaxed action for a state without noise.
    std::vector<double> scores(const std::vector<double>& state) const;
    /// Per-user argmax of (possibly noisy) scores; ties go to the lower server id.
    static std::vector<int> discretize(const std::vector<double>& scores, int users, int servers);

    void set_noise(double std) { noise_std_ = std; }
    const ReplayBuffer& replay() const { return replay_; }
    const Mlp& actor() const { return actor_; }
    const Mlp& target_actor() const { return actor_target_; }
    Mlp& actor() { return actor_; }
    void train_step();

private:
    ExperimentConfig cfg_;
    int users_, servers_;
    double noise_std_;
    Mlp actor_, critic_, actor_target_, critic_target_;
    Adam actor_opt_, critic_opt_;
    Rng rng_;
    ReplayBuffer replay_;
    ReplayItem pending_;
};

}  // namespace diten
