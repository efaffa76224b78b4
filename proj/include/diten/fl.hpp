#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

#include "diten/common.hpp"

namespace diten {

/// Local loss 0.5 (w - c)^T A (w - c) with A symmetric positive definite.
struct ConvexShard {
    Eigen::MatrixXd A;
    Eigen::VectorXd center;
    double samples = 1.0;

    double loss(const Eigen::VectorXd& w) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& w) const;
    double smoothness() const;         // largest eigenvalue of A
    double strong_convexity() const;   // smallest eigenvalue of A
    Eigen::VectorXd minimizer() const { return center; }
};

/// Sample-weighted global objective F = sum_s D_s f_s / sum_s D_s.
struct FederatedProblem {
    std::vector<ConvexShard> shards;

    double total_samples() const;
    double loss(const Eigen::VectorXd& w) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& w) const;
    Eigen::MatrixXd hessian() const;  // weighted average of the A_s
    Eigen::VectorXd minimizer() const;
    double smoothness() const;
    double strong_convexity() const;
};

/// Size-weighted mean of shard weights. Throws std::domain_error on empty input,
/// mismatched lengths or non-positive sizes.
Eigen::VectorXd aggregate(std::span<const Eigen::VectorXd> weights, std::span<const double> sizes);

/// Every shard takes one gradient step from w on its own loss; the results are aggregated.
Eigen::VectorXd fed_round(const Eigen::VectorXd& w, const FederatedProblem& prob, double step);

struct BoundCheck {
    int round = 0;  // i + 1
    double gap = 0.0;
    double bound = 0.0;
    bool pass = true;
};

struct BoundReport {
    double exponent = 0.0;  // 2 psi chi - L psi chi^2 per round
    std::vector<BoundCheck> rounds;
    bool all_pass = true;
};

/// Checks F(w^{i+1}) - F* <= exp(-(i+1)(2 psi chi - L psi chi^2)) (F(w^0) - F*) + tol
/// for every round of a loss trace (losses[0] is the starting point). Throws
/// std::domain_error when chi >= 2/L, where the exponent is no longer positive.
BoundReport verify_bound(std::span<const double> losses, double optimum, double L, double psi, double step,
                         double tol = 1e-10);

struct FlTrace {
    std::vector<Eigen::VectorXd> weights;
    std::vector<double> losses;
};

/// Runs `rounds` federated rounds from w0.
FlTrace run_federated(const Eigen::VectorXd& w0, const FederatedProblem& prob, double step, int rounds);

struct FineTuneResult {
    Eigen::VectorXd weights;
    FlTrace trace;
    BoundReport report;
};

/// Plain gradient descent on one shard from the global weights, checked against
/// the same bound with the shard's own constants.
FineTuneResult fine_tune(const Eigen::VectorXd& global, const ConvexShard& shard, double step, int rounds);

ConvexShard random_shard(int dim, Rng& rng);
FederatedProblem random_problem(Rng& rng, int max_dim = 10, int max_shards = 8);

struct BoundSuiteResult {
    int instances = 0;
    int checks = 0;
    int global_violations = 0;
    int local_violations = 0;
    double worst_margin = 0.0;  // max over checks of gap - bound
};

/// Random instances with chi = 1/L: global bound on federated rounds and the
/// per-shard bound on fine-tuning (chi = 1/L_u). Parallel over instances.
BoundSuiteResult bound_suite(std::uint64_t seed, int instances, int rounds);
BoundSuiteResult bound_suite_serial(std::uint64_t seed, int instances, int rounds);

/// Max relative error between one federated round and one centralized
/// gradient step over random partitions. Parallel over partitions.
double aggregation_identity_error(std::uint64_t seed, int partitions);
double aggregation_identity_error_serial(std::uint64_t seed, int partitions);

}  // namespace diten
