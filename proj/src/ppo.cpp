#include "diten/ppo.hpp"

#include <cmath>
#include <stdexcept>

#include "diten/policy.hpp"

namespace diten {

namespace {
constexpr std::uint64_t kInitStream = 2;
constexpr std::uint64_t kSampleStream = 3;

std::vector<int> layer_sizes(int in, const std::vector<int>& hidden, int out) {
    std::vector<int> sizes{in};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(out);
    return sizes;
}
}  // namespace

PolicyGradientAgent::PolicyGradientAgent(const ExperimentConfig& cfg, std::uint64_t seed, Surrogate surrogate)
    : cfg_(cfg),
      surrogate_(surrogate),
      users_(cfg.scenario.num_users),
      servers_(cfg.scenario.num_servers),
      epochs_(surrogate == Surrogate::vanilla ? 1 : cfg.ppo.update_epochs),
      sample_rng_(make_rng(seed, {kSampleStream})) {
    auto init = make_rng(seed, {kInitStream});
    const int in = encoded_size(users_, servers_);
    actor_ = Mlp(layer_sizes(in, cfg.ppo.hidden, users_ * servers_), init, 0.01);
    critic_ = Mlp(layer_sizes(in, cfg.ppo.hidden, 1), init, 1.0);
    pair_ = Mlp({2, 1});
    if (cfg.ppo.optimizer == OptimizerKind::adam) {
        actor_adam_ = Adam(actor_, cfg.ppo.actor_lr);
        critic_adam_ = Adam(critic_, cfg.ppo.critic_lr);
        pair_adam_ = Adam(pair_, cfg.ppo.pair_skip_lr);
    }
}

Decision PolicyGradientAgent::decide(const Environment& env) {
    const auto& state = env.state();
    Transition tr;
    tr.state = encode_state(state, cfg_.scenario);
    const Eigen::VectorXd z = logits(tr.state);
    auto pick = softmax_block_sample({z.data(), static_cast<std::size_t>(z.size())}, users_, servers_, sample_rng_);
    tr.action = pick.choice;
    tr.log_prob = pick.log_prob;
    tr.value = critic_.predict(tr.state)(0);
    Decision d{Association(pick.choice, servers_), {}, {}};
    d.allocation = optimize_allocation(state, cfg_, d.association);
    batch_.push_back(std::move(tr));
    return d;
}

void PolicyGradientAgent::observe(const Environment& env, const StepOutcome& outcome) {
    auto& tr = batch_.back();
    tr.reward = outcome.reward.reward;
    tr.feasible = outcome.reward.feasible;
    tr.done = outcome.done;
    tr.next_state = encode_state(env.state(), cfg_.scenario);
}

void PolicyGradientAgent::end_episode(const Environment&) {
    if (!batch_.empty()) update(batch_);
    last_batch_ = std::move(batch_);
    batch_.clear();
}

Eigen::MatrixXd PolicyGradientAgent::stack(const std::vector<Transition>& batch, bool next) const {
    const int n = encoded_size(users_, servers_);
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(batch.size()));
    for (std::size_t t = 0; t < batch.size(); ++t) {
        const auto& v = next ? batch[t].next_state : batch[t].state;
        if (static_cast<int>(v.size()) != n) throw std::invalid_argument("PolicyGradientAgent: feature length mismatch");
        x.col(static_cast<Eigen::Index>(t)) = Eigen::Map<const Eigen::VectorXd>(v.data(), n);
    }
    return x;
}

Eigen::VectorXd PolicyGradientAgent::values(const Eigen::MatrixXd& states) const {
    return critic_.predict(states).row(0).transpose();
}

std::vector<double> PolicyGradientAgent::advantages(const std::vector<Transition>& batch) const {
    const std::size_t n = batch.size();
    const Eigen::VectorXd v = values(stack(batch, false));
    const Eigen::VectorXd nv = values(stack(batch, true));
    std::vector<double> r(n), cur(n), nxt(n);
    for (std::size_t t = 0; t < n; ++t) {
        r[t] = batch[t].reward;
        cur[t] = v(static_cast<Eigen::Index>(t));
        nxt[t] = batch[t].done && !cfg_.ppo.bootstrap_terminal ? 0.0 : nv(static_cast<Eigen::Index>(t));
    }
    return gae(r, cur, nxt, cfg_.ppo.discount, cfg_.ppo.gae_lambda);
}

std::vector<double> PolicyGradientAgent::critic_targets(const std::vector<Transition>& batch) const {
    const Eigen::VectorXd nv = values(stack(batch, true));
    std::vector<double> y(batch.size());
    for (std::size_t t = 0; t < batch.size(); ++t) {
        const double boot = batch[t].done && !cfg_.ppo.bootstrap_terminal ? 0.0 : nv(static_cast<Eigen::Index>(t));
        y[t] = batch[t].reward + cfg_.ppo.discount * boot;
    }
    return y;
}

Eigen::MatrixXd PolicyGradientAgent::pair_features(const Eigen::MatrixXd& states) const {
    const int pairs = users_ * servers_;
    const int dist0 = users_ * (6 + servers_) + 4 * servers_;
    Eigen::MatrixXd f(2, pairs * states.cols());
    for (Eigen::Index t = 0; t < states.cols(); ++t)
        for (int u = 0; u < users_; ++u)
            for (int s = 0; s < servers_; ++s) {
                const Eigen::Index col = t * pairs + u * servers_ + s;
                f(0, col) = states(dist0 + u * servers_ + s, t);
                f(1, col) = states(u * (6 + servers_) + 6 + s, t);
            }
    return f;
}

// Columns are samples; the pair head output is laid out pair-major per sample,
// which is the column-major storage of a (U S) x N matrix.
Eigen::MatrixXd PolicyGradientAgent::logits(const Eigen::MatrixXd& states, bool record) {
    Eigen::MatrixXd z = record ? actor_.forward(states) : actor_.predict(states);
    if (cfg_.ppo.pair_skip) {
        const auto f = pair_features(states);
        const Eigen::MatrixXd p = record ? pair_.forward(f) : pair_.predict(f);
        z += Eigen::Map<const Eigen::MatrixXd>(p.data(), z.rows(), z.cols());
    }
    return z;
}

Eigen::VectorXd PolicyGradientAgent::logits(std::span<const double> state) const {
    Eigen::VectorXd z = actor_.predict(state);
    if (cfg_.ppo.pair_skip) {
        const Eigen::Map<const Eigen::VectorXd> x(state.data(), static_cast<Eigen::Index>(state.size()));
        const Eigen::MatrixXd p = pair_.predict(pair_features(x));
        z += Eigen::Map<const Eigen::VectorXd>(p.data(), z.size());
    }
    return z;
}

double PolicyGradientAgent::log_prob(const std::vector<double>& state, const std::vector<int>& action) const {
    const Eigen::VectorXd z = logits(state);
    const auto lp = block_log_softmax({z.data(), static_cast<std::size_t>(z.size())}, users_, servers_);
    double sum = 0.0;
    for (int u = 0; u < users_; ++u) sum += lp[static_cast<std::size_t>(u * servers_ + action[static_cast<std::size_t>(u)])];
    return sum;
}

namespace {

struct PolicyPass {
    std::vector<double> log_prob;
    Eigen::MatrixXd probs;  // softmax per block, same shape as the logits
};

PolicyPass policy_pass(const Eigen::MatrixXd& logits, const std::vector<Transition>& batch, int users, int servers) {
    PolicyPass p;
    p.probs.resize(logits.rows(), logits.cols());
    p.log_prob.assign(batch.size(), 0.0);
    for (Eigen::Index t = 0; t < logits.cols(); ++t) {
        const auto lp = block_log_softmax({logits.col(t).data(), static_cast<std::size_t>(logits.rows())}, users, servers);
        for (Eigen::Index k = 0; k < logits.rows(); ++k) p.probs(k, t) = std::exp(lp[static_cast<std::size_t>(k)]);
        const auto& a = batch[static_cast<std::size_t>(t)].action;
        for (int u = 0; u < users; ++u)
            p.log_prob[static_cast<std::size_t>(t)] += lp[static_cast<std::size_t>(u * servers + a[static_cast<std::size_t>(u)])];
    }
    return p;
}

// d(sum_t w_t log pi(a_t|s_t)) / d logits
Eigen::MatrixXd logit_gradient(const PolicyPass& p, const std::vector<Transition>& batch, const std::vector<double>& w,
                               int users, int servers) {
    Eigen::MatrixXd g = -p.probs;
    for (Eigen::Index t = 0; t < g.cols(); ++t) {
        const auto& a = batch[static_cast<std::size_t>(t)].action;
        for (int u = 0; u < users; ++u) g(u * servers + a[static_cast<std::size_t>(u)], t) += 1.0;
        g.col(t) *= w[static_cast<std::size_t>(t)];
    }
    return g;
}

}  // namespace

GradientTape PolicyGradientAgent::actor_gradient(const std::vector<Transition>& batch,
                                                 const std::vector<double>& advantages) {
    const auto pass = policy_pass(logits(stack(batch, false), true), batch, users_, servers_);
    std::vector<double> old(batch.size());
    for (std::size_t t = 0; t < batch.size(); ++t) old[t] = batch[t].log_prob;
    const auto loss = surrogate_ == Surrogate::vanilla
                          ? policy_gradient_loss(pass.log_prob, advantages)
                          : actor_loss(pass.log_prob, old, advantages, cfg_.ppo.clip, cfg_.ppo.clip_enabled);
    return actor_.backward(logit_gradient(pass, batch, loss.grad, users_, servers_));
}

void PolicyGradientAgent::step_policy(const Eigen::MatrixXd& logit_grad) {
    step_actor(actor_.backward(logit_grad));
    if (!cfg_.ppo.pair_skip) return;
    const Eigen::Map<const Eigen::MatrixXd> g(logit_grad.data(), 1, logit_grad.size());
    const auto tape = pair_.backward(g);
    if (cfg_.ppo.optimizer == OptimizerKind::adam)
        pair_adam_.step(pair_, tape, Direction::ascent);
    else
        sgd_step(pair_, tape, cfg_.ppo.pair_skip_lr, Direction::ascent);
}

void PolicyGradientAgent::step_actor(const GradientTape& g) {
    if (cfg_.ppo.optimizer == OptimizerKind::adam)
        actor_adam_.step(actor_, g, Direction::ascent);
    else
        sgd_step(actor_, g, cfg_.ppo.actor_lr, Direction::ascent);
}

void PolicyGradientAgent::step_critic(const GradientTape& g) {
    if (cfg_.ppo.optimizer == OptimizerKind::adam)
        critic_adam_.step(critic_, g, Direction::descent);
    else
        sgd_step(critic_, g, cfg_.ppo.critic_lr, Direction::descent);
}

UpdateStats PolicyGradientAgent::update(const std::vector<Transition>& batch) {
    UpdateStats stats;
    if (batch.empty()) return stats;
    auto adv = advantages(batch);
    if (cfg_.ppo.normalize_advantages) normalize(adv);
    const auto targets = critic_targets(batch);
    const Eigen::MatrixXd states = stack(batch, false);
    std::vector<double> old(batch.size());
    for (std::size_t t = 0; t < batch.size(); ++t) old[t] = batch[t].log_prob;

    for (int m = 0; m < epochs_; ++m) {
        const auto pass = policy_pass(logits(states, true), batch, users_, servers_);
        const auto aloss = surrogate_ == Surrogate::vanilla
                               ? policy_gradient_loss(pass.log_prob, adv)
                               : actor_loss(pass.log_prob, old, adv, cfg_.ppo.clip, cfg_.ppo.clip_enabled);
        step_policy(logit_gradient(pass, batch, aloss.grad, users_, servers_));
        stats.actor_loss = aloss.value;

        const Eigen::MatrixXd v = critic_.forward(states);
        const auto closs = critic_loss({v.data(), static_cast<std::size_t>(v.size())}, targets);
        const Eigen::Map<const Eigen::MatrixXd> grad(closs.grad.data(), 1, static_cast<Eigen::Index>(closs.grad.size()));
        step_critic(critic_.backward(grad));
        stats.critic_loss = closs.value;
    }
    actor_.clear_recording();
    critic_.clear_recording();
    pair_.clear_recording();
    if (!actor_.finite() || !critic_.finite() || !pair_.finite()) throw std::runtime_error("PolicyGradientAgent: non-finite parameters after update");
    return stats;
}

}  // namespace diten
