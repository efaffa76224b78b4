#pragma once

#include <span>
#include <vector>

#include "diten/common.hpp"
#include "diten/config.hpp"

namespace diten {

struct EdgeServer {
    int id = 0;
    Vec2 position;
    double comm_capacity = 0.0;     // p_s
    double compute_capacity = 0.0;  // q_s
    double cycles_per_unit = 0.0;   // epsilon_s, CPU cycles per sample
    int local_epochs = 1;           // E_s
};

struct UserTwin {
    int user_id = 0;
    Vec2 position;
    double emd = 0.0;              // phi_u in [0, 2]
    double twin_base_bits = 0.0;   // D_u^twin
    double fresh_samples = 0.0;    // D_{u,t}
    double prev_samples = 0.0;     // D_{u,t-1}
    int finetune_epochs = 0;       // E_{u,s}
    double tx_power_w = 0.0;
    double bandwidth_hz = 0.0;
};

/// One-hot user-to-server assignment, stored as the selected server per user so
/// every row sums to exactly one.
class Association {
public:
    Association() = default;
    /// Throws std::invalid_argument if any index is outside [0, num_servers).
    Association(std::vector<int> server_of, int num_servers);

    /// Validates C1 and C4 on a dense U x S 0/1 matrix.
    static Association from_matrix(const std::vector<std::vector<int>>& kappa);

    int server_of(int u) const { return server_of_[static_cast<std::size_t>(u)]; }
    int operator()(int u, int s) const { return server_of(u) == s ? 1 : 0; }
    int num_users() const { return static_cast<int>(server_of_.size()); }
    int num_servers() const { return num_servers_; }
    const std::vector<int>& servers() const { return server_of_; }

    friend bool operator==(const Association&, const Association&) = default;

private:
    std::vector<int> server_of_;
    int num_servers_ = 0;
};

using AllocationVector = std::vector<double>;

struct CostBreakdown {
    double migration = 0.0;
    double synchronization = 0.0;
    double computation = 0.0;
    double total = 0.0;
};

struct ScenarioState {
    int slot = 0;
    std::vector<EdgeServer> servers;
    std::vector<UserTwin> users;
    Association association;  // kappa^{t-1}: the assignment in force before this slot's decision

    int num_users() const { return static_cast<int>(users.size()); }
    int num_servers() const { return static_cast<int>(servers.size()); }
};

/// Fresh world: uniform placement of servers and users, capacities drawn from their
/// configured ranges, one slot of data already generated, nearest-feasible kappa^0.
ScenarioState make_scenario(const ScenarioConfig& cfg, Rng& rng);

/// Moves every user by a bounded random step (reflected at the area edges), shifts
/// fresh samples into prev_samples, draws new fresh samples, increments the slot.
/// The association is left untouched; the caller installs the slot's decision first.
ScenarioState advance_slot(const ScenarioState& state, const ScenarioConfig& cfg, Rng& rng);

/// fresh + gamma * prev, kept continuous. Throws std::domain_error for gamma outside [0, 1].
double combined_samples(double gamma, double fresh, double prev);

/// Shannon rate W log2(1 + P xi / N0) in bits per second.
double uplink_rate(const UserTwin& user, const EnergyParams& energy);

double migration_cost(const ScenarioState& state, const ScenarioConfig& cfg, int server,
                      const Association& now, const Association& prev, std::span<const double> gamma);
double sync_cost(const ScenarioState& state, const ScenarioConfig& cfg, int server, const Association& now);
double compute_cost(const ScenarioState& state, const ScenarioConfig& cfg, int server, const Association& now,
                    std::span<const double> gamma);
CostBreakdown total_cost(const ScenarioState& state, const ScenarioConfig& cfg, int server,
                         const Association& now, std::span<const double> gamma);

/// Breakdown for every server, using state.association as kappa^{t-1}.
std::vector<CostBreakdown> server_costs(const ScenarioState& state, const ScenarioConfig& cfg,
                                        const Association& now, std::span<const double> gamma);

/// Per-user data utility rho_{u,t} (unclamped).
std::vector<double> user_utilities(const ScenarioState& state, const ScenarioConfig& cfg,
                                   std::span<const double> gamma);

/// e^t = beta1/U * sum rho - beta2/S * sum Norm(C_s, f0), with kappa^{t-1} = state.association.
double objective(const ScenarioState& state, const ScenarioConfig& cfg, const Association& now,
                 std::span<const double> gamma);

struct SlackReport {
    std::vector<double> compute_slack;  // q_s - C^cmp
    std::vector<double> comm_slack;     // p_s - C^syn
    bool assignment_valid = true;       // C1 and C4
    bool allocation_valid = true;       // C5
    bool feasible = true;
};

SlackReport check_constraints(const ScenarioState& state, const ScenarioConfig& cfg, const Association& now,
                              std::span<const double> gamma);

/// Greedy association in ascending user id: nearest server by Manhattan distance
/// (ties to the lower id), falling through to the next-nearest when the server's
/// provisional compute or sync load would exceed capacity at gamma = 1. A user with
/// no admissible server takes its nearest one and `feasible` is cleared.
struct NearestResult {
    Association association;
    bool feasible = true;
};
NearestResult nearest_feasible(const ScenarioState& state, const ScenarioConfig& cfg);

}  // namespace diten
