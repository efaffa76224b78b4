#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "diten/agent.hpp"
#include "diten/mlp.hpp"

namespace diten {

struct Transition {
    std::vector<double> state;
    std::vector<int> action;  // server per user
    double log_prob = 0.0;    // behavior policy
    double reward = 0.0;
    std::vector<double> next_state;
    double value = 0.0;  // V(s[t]) at collection time
    bool done = false;
    bool feasible = true;
};

enum class Surrogate { clipped, vanilla };

struct UpdateStats {
    double actor_loss = 0.0;   // last epoch
    double critic_loss = 0.0;  // last epoch
};

/// On-policy association learner: factorized per-user categorical policy over
/// servers, critic V(s), GAE advantages. With Surrogate::clipped and M epochs
/// per batch it is PPO; with Surrogate::vanilla and one epoch it is the plain
/// actor-critic baseline.
class PolicyGradientAgent : public Controller {
public:
    PolicyGradientAgent(const ExperimentConfig& cfg, std::uint64_t seed, Surrogate surrogate = Surrogate::clipped);

    Decision decide(const Environment& env) override;
    void observe(const Environment& env, const StepOutcome& outcome) override;
    void end_episode(const Environment& env) override;

    /// M epochs of actor ascent and critic descent on one batch.
    UpdateStats update(const std::vector<Transition>& batch);

    /// Gradient of the actor objective on a batch at the current parameters,
    /// with the given advantages (no normalization applied here).
    GradientTape actor_gradient(const std::vector<Transition>& batch, const std::vector<double>& advantages);

    /// Advantages and critic targets for a batch as used by update().
    std::vector<double> advantages(const std::vector<Transition>& batch) const;
    std::vector<double> critic_targets(const std::vector<Transition>& batch) const;

    /// Joint log-probability of an action under the current policy.
    double log_prob(const std::vector<double>& state, const std::vector<int>& action) const;

    const Mlp& actor() const { return actor_; }
    const Mlp& critic() const { return critic_; }
    /// Two weights shared by every (user, server) logit: distance and current association.
    const Mlp& pair_head() const { return pair_; }
    Mlp& pair_head() { return pair_; }
    Mlp& actor() { return actor_; }
    Mlp& critic() { return critic_; }
    const std::vector<Transition>& last_batch() const { return last_batch_; }
    Surrogate surrogate() const { return surrogate_; }
    int update_epochs() const { return epochs_; }

private:
    Eigen::MatrixXd stack(const std::vector<Transition>& batch, bool next) const;
    Eigen::VectorXd values(const Eigen::MatrixXd& states) const;
    Eigen::MatrixXd pair_features(const Eigen::MatrixXd& states) const;
    Eigen::MatrixXd logits(const Eigen::MatrixXd& states, bool record);
    Eigen::VectorXd logits(std::span<const double> state) const;
    void step_policy(const Eigen::MatrixXd& logit_grad);
    void step_actor(const GradientTape& g);
    void step_critic(const GradientTape& g);

    ExperimentConfig cfg_;
    Surrogate surrogate_;
    int users_, servers_, epochs_;
    Mlp actor_, critic_, pair_;
    Adam actor_adam_, critic_adam_, pair_adam_;
    Rng sample_rng_;
    std::vector<Transition> batch_, last_batch_;
};

}  // namespace diten
