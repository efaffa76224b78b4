#include "diten/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "diten/policy.hpp"

namespace diten {

namespace {
constexpr std::uint64_t kDdpgInitStream = 5;
constexpr std::uint64_t kDdpgStream = 6;

std::vector<int> sizes_for(int in, const std::vector<int>& hidden, int out) {
    std::vector<int> s{in};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(out);
    return s;
}

// per-block softmax of every column
Eigen::MatrixXd block_softmax(const Eigen::MatrixXd& logits, int users, int servers) {
    Eigen::MatrixXd p(logits.rows(), logits.cols());
    for (Eigen::Index t = 0; t < logits.cols(); ++t) {
        const auto lp = block_log_softmax({logits.col(t).data(), static_cast<std::size_t>(logits.rows())}, users, servers);
        for (Eigen::Index k = 0; k < logits.rows(); ++k) p(k, t) = std::exp(lp[static_cast<std::size_t>(k)]);
    }
    return p;
}
}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
    items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(ReplayItem item) {
    if (items_.size() < capacity_) {
        items_.push_back(std::move(item));
    } else {
        items_[next_] = std::move(item);
    }
    next_ = (next_ + 1) % capacity_;
}

DdpgAgent::DdpgAgent(const ExperimentConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      users_(cfg.scenario.num_users),
      servers_(cfg.scenario.num_servers),
      noise_std_(cfg.ddpg.noise_std),
      rng_(make_rng(seed, {kDdpgStream})),
      replay_(static_cast<std::size_t>(cfg.ddpg.buffer_capacity)) {
    auto init = make_rng(seed, {kDdpgInitStream});
    const int in = encoded_size(users_, servers_);
    const int act = users_ * servers_;
    actor_ = Mlp(sizes_for(in, cfg.ppo.hidden, act), init, 0.01);
    critic_ = Mlp(sizes_for(in + act, cfg.ppo.hidden, 1), init, 1.0);
    actor_target_ = actor_;
    critic_target_ = critic_;
    actor_opt_ = Adam(actor_, cfg.ddpg.actor_lr);
    critic_opt_ = Adam(critic_, cfg.ddpg.critic_lr);
}

std::vector<double> DdpgAgent::scores(const std::vector<double>& state) const {
    const Eigen::MatrixXd p = block_softmax(actor_.predict(state), users_, servers_);
    return {p.data(), p.data() + p.size()};
}

std::vector<int> DdpgAgent::discretize(const std::vector<double>& scores, int users, int servers) {
    if (scores.size() != static_cast<std::size_t>(users) * servers)
        throw std::invalid_argument("DdpgAgent::discretize: score length mismatch");
    std::vector<int> pick(static_cast<std::size_t>(users), 0);
    for (int u = 0; u < users; ++u) {
        int best = 0;
        for (int s = 1; s < servers; ++s)
            if (scores[static_cast<std::size_t>(u * servers + s)] > scores[static_cast<std::size_t>(u * servers + best)])
                best = s;
        pick[static_cast<std::size_t>(u)] = best;
    }
    return pick;
}

Decision DdpgAgent::decide(const Environment& env) {
    pending_ = {};
    pending_.state = encode_state(env.state(), cfg_.scenario);
    pending_.action = scores(pending_.state);
    if (noise_std_ > 0.0) {
        std::normal_distribution<double> noise(0.0, noise_std_);
        for (auto& a : pending_.action) a += noise(rng_);
    }
    Decision d{Association(discretize(pending_.action, users_, servers_), servers_), {}, {}};
    d.allocation = optimize_allocation(env.state(), cfg_, d.association);
    return d;
}

void DdpgAgent::observe(const Environment& env, const StepOutcome& outcome) {
    pending_.reward = outcome.reward.reward;
    pending_.done = outcome.done && !cfg_.ppo.bootstrap_terminal;
    pending_.next_state = encode_state(env.state(), cfg_.scenario);
    replay_.push(std::move(pending_));
    if (replay_.size() < static_cast<std::size_t>(std::max(cfg_.ddpg.warmup, cfg_.ddpg.batch_size))) return;
    for (int k = 0; k < cfg_.ddpg.updates_per_slot; ++k) train_step();
}

void DdpgAgent::train_step() {
    const int n_state = encoded_size(users_, servers_);
    const int n_act = users_ * servers_;
    const int batch = cfg_.ddpg.batch_size;
    std::uniform_int_distribution<std::size_t> pick(0, replay_.size() - 1);
    Eigen::MatrixXd s(n_state, batch), s2(n_state, batch), sa(n_state + n_act, batch);
    Eigen::RowVectorXd r(batch), live(batch);
    for (int b = 0; b < batch; ++b) {
        const auto& it = replay_[pick(rng_)];
        s.col(b) = Eigen::Map<const Eigen::VectorXd>(it.state.data(), n_state);
        s2.col(b) = Eigen::Map<const Eigen::VectorXd>(it.next_state.data(), n_state);
        sa.col(b).head(n_state) = s.col(b);
        sa.col(b).tail(n_act) = Eigen::Map<const Eigen::VectorXd>(it.action.data(), n_act);
        r(b) = it.reward;
        live(b) = it.done ? 0.0 : 1.0;
    }

    // critic toward r + sigma * Q'(s', mu'(s'))
    Eigen::MatrixXd s2a(n_state + n_act, batch);
    s2a.topRows(n_state) = s2;
    s2a.bottomRows(n_act) = block_softmax(actor_target_.predict(s2), users_, servers_);
    const Eigen::RowVectorXd target = r + cfg_.ppo.discount * live.cwiseProduct(critic_target_.predict(s2a).row(0));
    const Eigen::MatrixXd q = critic_.forward(sa);
    const Eigen::MatrixXd dq = (q - target) / static_cast<double>(batch);
    critic_opt_.step(critic_, critic_.backward(dq), Direction::descent);

    // actor ascends Q(s, mu(s)) through the critic and the block softmax
    const Eigen::MatrixXd logits = actor_.forward(s);
    const Eigen::MatrixXd p = block_softmax(logits, users_, servers_);
    Eigen::MatrixXd sp(n_state + n_act, batch);
    sp.topRows(n_state) = s;
    sp.bottomRows(n_act) = p;
    critic_.forward(sp);
    Eigen::MatrixXd grad_in;
    critic_.backward(Eigen::MatrixXd::Constant(1, batch, 1.0 / batch), &grad_in);
    const Eigen::MatrixXd ga = grad_in.bottomRows(n_act);
    Eigen::MatrixXd gl(n_act, batch);
    for (int b = 0; b < batch; ++b) {
        for (int u = 0; u < users_; ++u) {
            const auto pb = p.col(b).segment(u * servers_, servers_);
            const auto gb = ga.col(b).segment(u * servers_, servers_);
            gl.col(b).segment(u * servers_, servers_) = pb.cwiseProduct(gb.array().matrix() - Eigen::VectorXd::Constant(servers_, pb.dot(gb)));
        }
    }
    actor_opt_.step(actor_, actor_.backward(gl), Direction::ascent);
    critic_.clear_recording();
    actor_.clear_recording();

    soft_update(actor_target_, actor_, cfg_.ddpg.tau);
    soft_update(critic_target_, critic_, cfg_.ddpg.tau);
}

}  // namespace diten
