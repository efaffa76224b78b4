#pragma once

#include <Eigen/Dense>

#include <span>
#include <string_view>
#include <vector>

#include "diten/config.hpp"
#include "diten/scenario.hpp"

namespace diten {

/// The per-slot historical-data allocation problem for a fixed association pair.
///
/// Every server cost is affine in gamma:
///   C_s(gamma)     = cost_base[s]    + sum_{u on s} cost_slope[u]    * gamma_u
///   C^cmp_s(gamma) = compute_base[s] + sum_{u on s} compute_slope[u] * gamma_u
/// where cost_base folds in the gamma-independent synchronization term. The
/// minimized function is -e^t(gamma).
struct AllocProblem {
    int num_servers = 0;
    std::vector<int> server;  // kappa^t, per user
    std::vector<double> fresh;
    std::vector<double> prev;
    std::vector<double> emd;
    std::vector<double> cost_slope;
    std::vector<double> compute_slope;
    std::vector<double> cost_base;
    std::vector<double> compute_base;
    std::vector<double> compute_capacity;
    UtilityCoefficients coeffs;
    double beta1 = 0.3;
    double beta2 = 0.7;
    double f0 = 200.0;

    int num_users() const { return static_cast<int>(server.size()); }

    /// Builds P2 from the current state; `prev` is kappa^{t-1}.
    static AllocProblem from_state(const ScenarioState& state, const ScenarioConfig& cfg, const Association& now,
                                   const Association& prev);
    static AllocProblem from_state(const ScenarioState& state, const ScenarioConfig& cfg, const Association& now) {
        return from_state(state, cfg, now, state.association);
    }

    /// Throws std::invalid_argument on inconsistent sizes or out-of-range entries.
    void validate() const;
};

/// -e^t(gamma) only.
double neg_objective(const AllocProblem& prob, std::span<const double> gamma);

struct ObjectiveDerivatives {
    double value = 0.0;
    Eigen::VectorXd gradient;
    /// Dense U x U Hessian. Entries for users on different servers are exactly zero;
    /// users sharing a server are coupled through Norm''(C_s).
    Eigen::MatrixXd hessian;
};

ObjectiveDerivatives neg_objective_grad_hess(const AllocProblem& prob, std::span<const double> gamma);

/// Per-server compute load at gamma, used for the C1-dagger check.
std::vector<double> compute_loads(const AllocProblem& prob, std::span<const double> gamma);
bool allocation_feasible(const AllocProblem& prob, std::span<const double> gamma, double tol = 0.0);

enum class AllocStatus { optimal, infeasible, max_iter };
std::string_view to_string(AllocStatus s);

struct AllocSolution {
    AllocationVector gamma;
    double value = 0.0;  // -e^t at gamma
    double kkt_residual = 0.0;
    AllocStatus status = AllocStatus::optimal;
};

/// First-order optimality residual at gamma with an active-set estimate: the
/// largest stationarity violation after fitting a non-negative multiplier for
/// each server whose compute capacity is binding. Bound-active coordinates only
/// count when the gradient points out of the box.
double kkt_residual(const AllocProblem& prob, std::span<const double> gamma);

/// Log-barrier interior point with damped Newton steps. The problem separates by
/// server, so each server's users are solved as one block with the compute
/// capacity as a linear barrier term. Blocks whose users migrate can be
/// non-convex (Norm is concave on the positive axis), so small blocks are also
/// started from every corner of the box and the best local solution is kept.
AllocSolution solve(const AllocProblem& prob, double tol = 1e-8, int max_iter = 500);

/// Exhaustive search over the step-grid of [0,1]^U keeping the best feasible
/// point. Throws std::length_error when the grid exceeds 1e7 points. Parallel
/// over grid points; ties resolve to the lowest linear index.
AllocSolution brute_force_oracle(const AllocProblem& prob, double step);

/// Single-threaded reference for brute_force_oracle (bit-identical result).
AllocSolution brute_force_oracle_serial(const AllocProblem& prob, double step);

struct ConvexityReport {
    int instances = 0;
    int midpoint_violations = 0;
    double worst_midpoint_gap = 0.0;  // max of f(mid) - (f(a) + f(b)) / 2
    double max_cross_partial = 0.0;   // max |d2 f / d gamma_u d gamma_v|, u != v, by finite differences
    int cross_pairs = 0;
};

/// Random full-size instances (nearest-feasible previous association). With
/// `migration` the current association is drawn at random, otherwise it equals
/// the previous one. Each instance checks midpoint convexity of -e^t at random
/// point pairs of the box and finite-difference mixed partials for users sharing
/// a server. Parallel over instances; the result does not depend on thread count.
ConvexityReport convexity_witness(const ScenarioConfig& cfg, std::uint64_t seed, int instances, bool migration);
ConvexityReport convexity_witness_serial(const ScenarioConfig& cfg, std::uint64_t seed, int instances, bool migration);

}  // namespace diten
