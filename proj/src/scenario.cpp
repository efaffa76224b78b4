#include "diten/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "diten/utility.hpp"

namespace diten {

Association::Association(std::vector<int> server_of, int num_servers)
    : server_of_(std::move(server_of)), num_servers_(num_servers) {
    if (num_servers_ <= 0) throw std::invalid_argument("Association: need at least one server");
    for (int s : server_of_) {
        if (s < 0 || s >= num_servers_) throw std::invalid_argument("Association: server index out of range");
    }
}

Association Association::from_matrix(const std::vector<std::vector<int>>& kappa) {
    if (kappa.empty()) throw std::invalid_argument("Association: empty matrix");
    const int S = static_cast<int>(kappa.front().size());
    std::vector<int> server_of;
    server_of.reserve(kappa.size());
    for (const auto& row : kappa) {
        if (static_cast<int>(row.size()) != S) throw std::invalid_argument("Association: ragged matrix");
        int chosen = -1;
        int ones = 0;
        for (int s = 0; s < S; ++s) {
            if (row[s] != 0 && row[s] != 1) throw std::invalid_argument("Association: entries must be binary");
            if (row[s] == 1) {
                chosen = s;
                ++ones;
            }
        }
        if (ones != 1) throw std::invalid_argument("Association: each row must select exactly one server");
        server_of.push_back(chosen);
    }
    return Association(std::move(server_of), S);
}

namespace {

double reflect(double v, double side) {
    // steps are far shorter than the side, but loop for safety
    for (int i = 0; i < 8 && (v < 0.0 || v > side); ++i) {
        if (v < 0.0) v = -v;
        if (v > side) v = 2.0 * side - v;
    }
    return std::clamp(v, 0.0, side);
}

double draw_samples(const Range& r, Rng& rng) {
    const auto lo = static_cast<long long>(std::llround(r.lo));
    const auto hi = static_cast<long long>(std::llround(r.hi));
    return static_cast<double>(std::uniform_int_distribution<long long>(lo, hi)(rng));
}

double server_distance(const ScenarioState& state, int a, int b) {
    return manhattan(state.servers[static_cast<std::size_t>(a)].position,
                     state.servers[static_cast<std::size_t>(b)].position);
}

}  // namespace

ScenarioState make_scenario(const ScenarioConfig& cfg, Rng& rng) {
    cfg.validate();
    ScenarioState st;
    st.slot = 0;
    st.servers.resize(static_cast<std::size_t>(cfg.num_servers));
    for (int s = 0; s < cfg.num_servers; ++s) {
        auto& srv = st.servers[static_cast<std::size_t>(s)];
        srv.id = s;
        srv.position = {uniform(rng, 0.0, cfg.area_side), uniform(rng, 0.0, cfg.area_side)};
        srv.comm_capacity = uniform(rng, cfg.comm_capacity.lo, cfg.comm_capacity.hi);
        srv.compute_capacity = uniform(rng, cfg.compute_capacity.lo, cfg.compute_capacity.hi);
        srv.cycles_per_unit = uniform(rng, cfg.cycles_per_unit.lo, cfg.cycles_per_unit.hi);
        srv.local_epochs = cfg.local_epochs;
    }
    st.users.resize(static_cast<std::size_t>(cfg.num_users));
    for (int u = 0; u < cfg.num_users; ++u) {
        auto& usr = st.users[static_cast<std::size_t>(u)];
        usr.user_id = u;
        usr.position = {uniform(rng, 0.0, cfg.area_side), uniform(rng, 0.0, cfg.area_side)};
        usr.emd = cfg.emd_mode == EmdMode::uniform ? cfg.emd : uniform(rng, cfg.emd_range.lo, cfg.emd_range.hi);
        usr.twin_base_bits = uniform(rng, cfg.twin_bits.lo, cfg.twin_bits.hi);
        usr.prev_samples = draw_samples(cfg.fresh_samples, rng);
        usr.fresh_samples = draw_samples(cfg.fresh_samples, rng);
        usr.finetune_epochs = cfg.finetune_epochs;
        usr.tx_power_w = cfg.tx_power_w;
        usr.bandwidth_hz = cfg.bandwidth_hz;
    }
    st.association = nearest_feasible(st, cfg).association;
    return st;
}

ScenarioState advance_slot(const ScenarioState& state, const ScenarioConfig& cfg, Rng& rng) {
    ScenarioState next = state;
    constexpr double two_pi = 6.283185307179586476925286766559;
    for (auto& usr : next.users) {
        const double step = uniform(rng, 0.0, cfg.max_speed);
        const double heading = uniform(rng, 0.0, two_pi);
        usr.position.x = reflect(usr.position.x + step * std::cos(heading), cfg.area_side);
        usr.position.y = reflect(usr.position.y + step * std::sin(heading), cfg.area_side);
        usr.prev_samples = usr.fresh_samples;
        usr.fresh_samples = draw_samples(cfg.fresh_samples, rng);
    }
    ++next.slot;
    return next;
}

double combined_samples(double gamma, double fresh, double prev) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::domain_error("combined_samples: gamma outside [0, 1]");
    return fresh + gamma * prev;
}

double uplink_rate(const UserTwin& user, const EnergyParams& energy) {
    const double snr = user.tx_power_w * energy.channel_gain / energy.noise_power_w;
    if (!(snr > 0.0)) throw std::domain_error("uplink_rate: P*xi/N0 must be positive");
    return user.bandwidth_hz * std::log2(1.0 + snr);
}

double migration_cost(const ScenarioState& state, const ScenarioConfig& cfg, int server,
                      const Association& now, const Association& prev, std::span<const double> gamma) {
    double sum = 0.0;
    for (int u = 0; u < state.num_users(); ++u) {
        if (now.server_of(u) != server) continue;
        const int from = prev.server_of(u);
        if (from == server) continue;
        const auto& usr = state.users[static_cast<std::size_t>(u)];
        const double samples = combined_samples(gamma[static_cast<std::size_t>(u)], usr.fresh_samples, usr.prev_samples);
        const double bits = samples * cfg.energy.bits_per_sample + usr.twin_base_bits;
        sum += server_distance(state, server, from) * bits;
    }
    return cfg.energy.n_mig * sum;
}

double sync_cost(const ScenarioState& state, const ScenarioConfig& cfg, int server, const Association& now) {
    const auto& srv = state.servers[static_cast<std::size_t>(server)];
    double sum = 0.0;
    for (int u = 0; u < state.num_users(); ++u) {
        if (now.server_of(u) != server) continue;
        const auto& usr = state.users[static_cast<std::size_t>(u)];
        const double seconds = usr.fresh_samples * cfg.energy.bits_per_sample / uplink_rate(usr, cfg.energy);
        sum += seconds * manhattan(usr.position, srv.position);
    }
    return cfg.energy.n_syn * sum;
}

double compute_cost(const ScenarioState& state, const ScenarioConfig& cfg, int server, const Association& now,
                    std::span<const double> gamma) {
    const auto& srv = state.servers[static_cast<std::size_t>(server)];
    double sum = 0.0;
    for (int u = 0; u < state.num_users(); ++u) {
        if (now.server_of(u) != server) continue;
        const auto& usr = state.users[static_cast<std::size_t>(u)];
        const double samples = combined_samples(gamma[static_cast<std::size_t>(u)], usr.fresh_samples, usr.prev_samples);
        sum += samples * (srv.local_epochs + usr.finetune_epochs);
    }
    return cfg.energy.n_cmp * srv.cycles_per_unit * sum;
}

CostBreakdown total_cost(const ScenarioState& state, const ScenarioConfig& cfg, int server,
                         const Association& now, std::span<const double> gamma) {
    CostBreakdown c;
    c.migration = migration_cost(state, cfg, server, now, state.association, gamma);
    c.synchronization = sync_cost(state, cfg, server, now);
    c.computation = compute_cost(state, cfg, server, now, gamma);
    c.total = c.migration + c.synchronization + c.computation;
    return c;
}

std::vector<CostBreakdown> server_costs(const ScenarioState& state, const ScenarioConfig& cfg,
                                        const Association& now, std::span<const double> gamma) {
    std::vector<CostBreakdown> out(static_cast<std::size_t>(state.num_servers()));
    for (int s = 0; s < state.num_servers(); ++s) out[static_cast<std::size_t>(s)] = total_cost(state, cfg, s, now, gamma);
    return out;
}

std::vector<double> user_utilities(const ScenarioState& state, const ScenarioConfig& cfg,
                                   std::span<const double> gamma) {
    std::vector<double> rho(static_cast<std::size_t>(state.num_users()));
    for (int u = 0; u < state.num_users(); ++u) {
        const auto& usr = state.users[static_cast<std::size_t>(u)];
        const double samples = combined_samples(gamma[static_cast<std::size_t>(u)], usr.fresh_samples, usr.prev_samples);
        rho[static_cast<std::size_t>(u)] = data_utility(usr.emd, samples, cfg.utility);
    }
    return rho;
}

double objective(const ScenarioState& state, const ScenarioConfig& cfg, const Association& now,
                 std::span<const double> gamma) {
    const auto rho = user_utilities(state, cfg, gamma);
    const double utility = std::accumulate(rho.begin(), rho.end(), 0.0);
    double cost = 0.0;
    for (const auto& c : server_costs(state, cfg, now, gamma)) cost += norm(c.total, cfg.f0);
    return cfg.beta1 / state.num_users() * utility - cfg.beta2 / state.num_servers() * cost;
}

SlackReport check_constraints(const ScenarioState& state, const ScenarioConfig& cfg, const Association& now,
                              std::span<const double> gamma) {
    SlackReport r;
    r.assignment_valid = now.num_users() == state.num_users() && now.num_servers() == state.num_servers();
    for (int u = 0; r.assignment_valid && u < now.num_users(); ++u) {
        const int s = now.server_of(u);
        if (s < 0 || s >= state.num_servers()) r.assignment_valid = false;
    }
    r.allocation_valid = static_cast<int>(gamma.size()) == state.num_users() &&
                         std::all_of(gamma.begin(), gamma.end(), [](double g) { return g >= 0.0 && g <= 1.0; });
    r.feasible = r.assignment_valid && r.allocation_valid;
    if (!r.feasible) return r;
    for (int s = 0; s < state.num_servers(); ++s) {
        const auto& srv = state.servers[static_cast<std::size_t>(s)];
        r.compute_slack.push_back(srv.compute_capacity - compute_cost(state, cfg, s, now, gamma));
        r.comm_slack.push_back(srv.comm_capacity - sync_cost(state, cfg, s, now));
        if (r.compute_slack.back() < 0.0 || r.comm_slack.back() < 0.0) r.feasible = false;
    }
    return r;
}

NearestResult nearest_feasible(const ScenarioState& state, const ScenarioConfig& cfg) {
    const int U = state.num_users();
    const int S = state.num_servers();
    std::vector<double> compute_load(static_cast<std::size_t>(S), 0.0);
    std::vector<double> sync_load(static_cast<std::size_t>(S), 0.0);
    std::vector<int> chosen(static_cast<std::size_t>(U), 0);
    bool feasible = true;
    std::vector<int> order(static_cast<std::size_t>(S));
    for (int u = 0; u < U; ++u) {
        const auto& usr = state.users[static_cast<std::size_t>(u)];
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return manhattan(usr.position, state.servers[static_cast<std::size_t>(a)].position) <
                   manhattan(usr.position, state.servers[static_cast<std::size_t>(b)].position);
        });
        const double seconds = usr.fresh_samples * cfg.energy.bits_per_sample / uplink_rate(usr, cfg.energy);
        int pick = -1;
        double pick_cmp = 0.0, pick_syn = 0.0;
        for (int s : order) {
            const auto& srv = state.servers[static_cast<std::size_t>(s)];
            const double cmp = cfg.energy.n_cmp * srv.cycles_per_unit * (usr.fresh_samples + usr.prev_samples) *
                               (srv.local_epochs + usr.finetune_epochs);
            const double syn = cfg.energy.n_syn * seconds * manhattan(usr.position, srv.position);
            if (compute_load[static_cast<std::size_t>(s)] + cmp <= srv.compute_capacity &&
                sync_load[static_cast<std::size_t>(s)] + syn <= srv.comm_capacity) {
                pick = s;
                pick_cmp = cmp;
                pick_syn = syn;
                break;
            }
        }
        if (pick < 0) {
            feasible = false;
            pick = order.front();
            const auto& srv = state.servers[static_cast<std::size_t>(pick)];
            pick_cmp = cfg.energy.n_cmp * srv.cycles_per_unit * (usr.fresh_samples + usr.prev_samples) *
                       (srv.local_epochs + usr.finetune_epochs);
            pick_syn = cfg.energy.n_syn * seconds * manhattan(usr.position, srv.position);
        }
        compute_load[static_cast<std::size_t>(pick)] += pick_cmp;
        sync_load[static_cast<std::size_t>(pick)] += pick_syn;
        chosen[static_cast<std::size_t>(u)] = pick;
    }
    return {Association(std::move(chosen), S), feasible};
}

}  // namespace diten
