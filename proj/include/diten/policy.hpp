#pragma once

#include <span>
#include <vector>

#include "diten/config.hpp"
#include "diten/scenario.hpp"

namespace diten {

/// Fixed-layout state features, all in [0, 1] for in-range states:
///   per user   x/side, y/side, emd/2, twin_bits/twin_max, fresh/fresh_max,
///              prev/fresh_max, one-hot of the association in force (S entries)
///   per server x/side, y/side, comm_capacity/comm_max, compute_capacity/compute_max
///   per (u, s) Manhattan distance / (2 side), user-major
std::vector<double> encode_state(const ScenarioState& state, const ScenarioConfig& cfg);
int encoded_size(int users, int servers);

/// A_t = sum_l (sigma lambda)^l phi_{t+l}, phi_t = r_t + sigma next_values_t - values_t,
/// truncated at the end of the sequence.
std::vector<double> gae(std::span<const double> rewards, std::span<const double> values,
                        std::span<const double> next_values, double discount, double lambda);

/// In-place zero-mean, unit-variance scaling (left alone when the spread is ~0).
void normalize(std::vector<double>& v);

struct LossAndGrad {
    double value = 0.0;
    std::vector<double> grad;  // d value / d input, per sample
};

/// mean_t min(ratio A, clamp(ratio, 1-eps, 1+eps) A), ratio = exp(new - old).
/// With `clip` false the plain importance-weighted surrogate mean(ratio A) is used.
/// Gradient is with respect to the new log-probabilities.
LossAndGrad actor_loss(std::span<const double> new_log_prob, std::span<const double> old_log_prob,
                       std::span<const double> advantages, double eps, bool clip = true);

/// mean_t log pi(a_t | s_t) A_t (actor-critic surrogate).
LossAndGrad policy_gradient_loss(std::span<const double> log_prob, std::span<const double> advantages);

/// mean_t 0.5 (target_t - value_t)^2; gradient with respect to the values.
LossAndGrad critic_loss(std::span<const double> values, std::span<const double> targets);

}  // namespace diten
