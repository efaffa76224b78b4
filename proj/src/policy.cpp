#include "diten/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace diten {

int encoded_size(int users, int servers) { return users * (6 + servers) + 4 * servers + users * servers; }

std::vector<double> encode_state(const ScenarioState& state, const ScenarioConfig& cfg) {
    const int U = state.num_users();
    const int S = state.num_servers();
    const double side = cfg.area_side;
    std::vector<double> x;
    x.reserve(static_cast<std::size_t>(encoded_size(U, S)));
    for (int u = 0; u < U; ++u) {
        const auto& usr = state.users[static_cast<std::size_t>(u)];
        x.push_back(usr.position.x / side);
        x.push_back(usr.position.y / side);
        x.push_back(usr.emd / 2.0);
        x.push_back(usr.twin_base_bits / cfg.twin_bits.hi);
        x.push_back(usr.fresh_samples / cfg.fresh_samples.hi);
        x.push_back(usr.prev_samples / cfg.fresh_samples.hi);
        for (int s = 0; s < S; ++s) x.push_back(state.association(u, s));
    }
    for (const auto& srv : state.servers) {
        x.push_back(srv.position.x / side);
        x.push_back(srv.position.y / side);
        x.push_back(srv.comm_capacity / cfg.comm_capacity.hi);
        x.push_back(srv.compute_capacity / cfg.compute_capacity.hi);
    }
    for (const auto& usr : state.users)
        for (const auto& srv : state.servers) x.push_back(manhattan(usr.position, srv.position) / (2.0 * side));
    return x;
}

std::vector<double> gae(std::span<const double> rewards, std::span<const double> values,
                        std::span<const double> next_values, double discount, double lambda) {
    const std::size_t n = rewards.size();
    if (values.size() != n || next_values.size() != n) throw std::invalid_argument("gae: sequence lengths differ");
    std::vector<double> adv(n);
    double running = 0.0;
    for (std::size_t t = n; t-- > 0;) {
        const double td = rewards[t] + discount * next_values[t] - values[t];
        running = td + discount * lambda * running;
        adv[t] = running;
    }
    return adv;
}

void normalize(std::vector<double>& v) {
    if (v.size() < 2) return;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / static_cast<double>(v.size()));
    if (!(sd > 1e-12)) {
        for (double& x : v) x -= mean;
        return;
    }
    for (double& x : v) x = (x - mean) / sd;
}

LossAndGrad actor_loss(std::span<const double> new_log_prob, std::span<const double> old_log_prob,
                       std::span<const double> advantages, double eps, bool clip) {
    const std::size_t n = new_log_prob.size();
    if (old_log_prob.size() != n || advantages.size() != n) throw std::invalid_argument("actor_loss: batch sizes differ");
    LossAndGrad out;
    out.grad.assign(n, 0.0);
    if (n == 0) return out;
    for (std::size_t t = 0; t < n; ++t) {
        const double ratio = std::exp(new_log_prob[t] - old_log_prob[t]);
        const double a = advantages[t];
        const double plain = ratio * a;
        if (!clip) {
            out.value += plain;
            out.grad[t] = plain;
            continue;
        }
        const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * a;
        if (plain <= clipped) {
            out.value += plain;
            out.grad[t] = plain;  // d(ratio)/d(log pi) = ratio
        } else {
            out.value += clipped;
        }
    }
    const double inv = 1.0 / static_cast<double>(n);
    out.value *= inv;
    for (double& g : out.grad) g *= inv;
    return out;
}

LossAndGrad policy_gradient_loss(std::span<const double> log_prob, std::span<const double> advantages) {
    const std::size_t n = log_prob.size();
    if (advantages.size() != n) throw std::invalid_argument("policy_gradient_loss: batch sizes differ");
    LossAndGrad out;
    out.grad.assign(n, 0.0);
    if (n == 0) return out;
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t t = 0; t < n; ++t) {
        out.value += log_prob[t] * advantages[t] * inv;
        out.grad[t] = advantages[t] * inv;
    }
    return out;
}

LossAndGrad critic_loss(std::span<const double> values, std::span<const double> targets) {
    const std::size_t n = values.size();
    if (targets.size() != n) throw std::invalid_argument("critic_loss: batch sizes differ");
    LossAndGrad out;
    out.grad.assign(n, 0.0);
    if (n == 0) return out;
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t t = 0; t < n; ++t) {
        const double err = targets[t] - values[t];
        out.value += 0.5 * err * err * inv;
        out.grad[t] = -err * inv;
    }
    return out;
}

}  // namespace diten
