#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "diten/scenario.hpp"
#include "diten/utility.hpp"

using namespace diten;

namespace {

ScenarioConfig small_config(int users = 6, int servers = 4) {
    ScenarioConfig c;
    c.num_users = users;
    c.num_servers = servers;
    return c;
}

std::string serialize(const ScenarioState& s) {
    std::ostringstream o;
    o.precision(17);
    o << s.slot << '\n';
    for (const auto& v : s.servers)
        o << v.position.x << ' ' << v.position.y << ' ' << v.comm_capacity << ' ' << v.compute_capacity << ' '
          << v.cycles_per_unit << '\n';
    for (const auto& u : s.users)
        o << u.position.x << ' ' << u.position.y << ' ' << u.emd << ' ' << u.twin_base_bits << ' ' << u.fresh_samples
          << ' ' << u.prev_samples << '\n';
    for (int x : s.association.servers()) o << x << ' ';
    return o.str();
}

// Direct transcription of the three cost sums over the dense U x S indicator matrices.
struct OracleCosts {
    double mig, syn, cmp;
};

OracleCosts oracle_costs(const ScenarioState& st, const ScenarioConfig& c, int s, const Association& now,
                         const Association& prev, const std::vector<double>& gamma) {
    const int U = st.num_users(), S = st.num_servers();
    const auto& e = c.energy;
    const double snr = c.tx_power_w * e.channel_gain / e.noise_power_w;
    const double rate = c.bandwidth_hz * std::log(1.0 + snr) / std::log(2.0);
    OracleCosts r{0, 0, 0};
    for (int u = 0; u < U; ++u) {
        const auto& usr = st.users[u];
        const double dbar = usr.fresh_samples + gamma[u] * usr.prev_samples;
        for (int sp = 0; sp < S; ++sp) {
            const double l = std::abs(st.servers[s].position.x - st.servers[sp].position.x) +
                             std::abs(st.servers[s].position.y - st.servers[sp].position.y);
            r.mig += e.n_mig * l * (dbar * e.bits_per_sample + usr.twin_base_bits) * now(u, s) * prev(u, sp);
        }
        const double lus = std::abs(usr.position.x - st.servers[s].position.x) +
                           std::abs(usr.position.y - st.servers[s].position.y);
        r.syn += e.n_syn * usr.fresh_samples * e.bits_per_sample / rate * lus * now(u, s);
        r.cmp += e.n_cmp * st.servers[s].cycles_per_unit * dbar * (st.servers[s].local_epochs + usr.finetune_epochs) *
                 now(u, s);
    }
    return r;
}

Association random_association(int U, int S, Rng& rng) {
    std::vector<int> a(U);
    for (auto& x : a) x = std::uniform_int_distribution<int>(0, S - 1)(rng);
    return Association(a, S);
}

}  // namespace

TEST_CASE("association validates one-hot rows") {
    CHECK_NOTHROW(Association::from_matrix({{0, 1}, {1, 0}}));
    CHECK_THROWS_AS(Association::from_matrix({{1, 1}, {1, 0}}), std::invalid_argument);
    CHECK_THROWS_AS(Association::from_matrix({{0, 0}, {1, 0}}), std::invalid_argument);
    CHECK_THROWS_AS(Association::from_matrix({{0, 2}, {1, 0}}), std::invalid_argument);
    CHECK_THROWS_AS(Association({0, 3}, 3), std::invalid_argument);
    const auto a = Association::from_matrix({{0, 0, 1}, {1, 0, 0}});
    CHECK(a.server_of(0) == 2);
    CHECK(a(1, 0) == 1);
    CHECK(a(1, 2) == 0);
}

TEST_CASE("combined samples") {
    CHECK(combined_samples(0.0, 500, 800) == 500);
    CHECK(combined_samples(1.0, 500, 800) == 1300);
    CHECK(combined_samples(0.25, 500, 800) == 700);
    CHECK_THROWS_AS(combined_samples(-0.1, 500, 800), std::domain_error);
    CHECK_THROWS_AS(combined_samples(1.1, 500, 800), std::domain_error);
}

TEST_CASE("Shannon rate and the synchronization example") {
    UserTwin u;
    u.tx_power_w = 0.2;
    u.bandwidth_hz = 15e3;
    EnergyParams e;
    CHECK(uplink_rate(u, e) == doctest::Approx(981681.07561222244323).epsilon(1e-13));
    // 156800 bits = 200 samples of 784 bits, 20 m from the server
    ScenarioConfig c = small_config(1, 1);
    ScenarioState st;
    st.servers.push_back({0, {0, 0}, 130, 1450, 55, 50});
    u.position = {20, 0};
    u.fresh_samples = 200;
    u.prev_samples = 0;
    u.finetune_epochs = 10;
    st.users.push_back(u);
    st.association = Association({0}, 1);
    CHECK(sync_cost(st, c, 0, st.association) == doctest::Approx(0.31945201735138298907).epsilon(1e-13));
    UserTwin dead = u;
    dead.tx_power_w = 0.0;
    CHECK_THROWS_AS(uplink_rate(dead, e), std::domain_error);
}

TEST_CASE("cost examples") {
    ScenarioConfig c = small_config(1, 2);
    ScenarioState st;
    st.servers.push_back({0, {0, 0}, 130, 1450, 55, 50});
    st.servers.push_back({1, {10, 0}, 130, 1450, 55, 50});
    UserTwin u;
    u.position = {0, 0};
    u.fresh_samples = 1000;
    u.prev_samples = 500;
    u.finetune_epochs = 10;
    u.tx_power_w = 0.2;
    u.bandwidth_hz = 15e3;
    st.users.push_back(u);
    st.association = Association({0}, 2);
    const std::vector<double> g0{0.0};
    // compute: 1e-7 * 55 * 1000 * 60
    CHECK(compute_cost(st, c, 0, st.association, g0) == doctest::Approx(0.33).epsilon(1e-14));
    // no migration when the association is unchanged
    CHECK(migration_cost(st, c, 0, st.association, st.association, g0) == 0.0);
    CHECK(migration_cost(st, c, 1, st.association, st.association, g0) == 0.0);
    // one user moving 10 m carrying 1000 bits total
    c.energy.bits_per_sample = 0.5;
    st.users[0].twin_base_bits = 500;
    const Association moved({1}, 2);
    CHECK(migration_cost(st, c, 1, moved, st.association, g0) == doctest::Approx(1.0).epsilon(1e-14));
    st.users[0].twin_base_bits = 1000;
    c.energy.bits_per_sample = 1.0;
    CHECK(migration_cost(st, c, 1, moved, st.association, g0) == doctest::Approx(2.0).epsilon(1e-14));
    // co-located user contributes no sync cost
    CHECK(sync_cost(st, c, 0, st.association) == 0.0);
    CHECK(sync_cost(st, c, 1, st.association) == 0.0);  // nobody on server 1
}

TEST_CASE("cost breakdown matches the dense-matrix oracle on random states") {
    const auto c = small_config(7, 5);
    for (int k = 0; k < 30; ++k) {
        auto rng = make_rng(100 + k);
        const auto st = make_scenario(c, rng);
        const auto now = random_association(7, 5, rng);
        std::vector<double> g(7);
        for (auto& x : g) x = uniform(rng, 0, 1);
        double obj_cost = 0.0;
        for (int s = 0; s < 5; ++s) {
            const auto b = total_cost(st, c, s, now, g);
            const auto o = oracle_costs(st, c, s, now, st.association, g);
            CHECK(b.migration == doctest::Approx(o.mig).epsilon(1e-12));
            CHECK(b.synchronization == doctest::Approx(o.syn).epsilon(1e-12));
            CHECK(b.computation == doctest::Approx(o.cmp).epsilon(1e-12));
            CHECK(b.total == doctest::Approx(o.mig + o.syn + o.cmp).epsilon(1e-12));
            CHECK(b.migration >= 0.0);
            obj_cost += 2.0 / (1.0 + std::exp(-(o.mig + o.syn + o.cmp) / (2 * c.f0))) - 1.0;
        }
        double util = 0.0;
        for (int u = 0; u < 7; ++u)
            util += data_utility(st.users[u].emd, st.users[u].fresh_samples + g[u] * st.users[u].prev_samples, c.utility);
        CHECK(objective(st, c, now, g) == doctest::Approx(c.beta1 / 7 * util - c.beta2 / 5 * obj_cost).epsilon(1e-12));

        const auto slack = check_constraints(st, c, now, g);
        for (int s = 0; s < 5; ++s) {
            const auto o = oracle_costs(st, c, s, now, st.association, g);
            CHECK(slack.compute_slack[s] == doctest::Approx(st.servers[s].compute_capacity - o.cmp).epsilon(1e-12));
            CHECK(slack.comm_slack[s] == doctest::Approx(st.servers[s].comm_capacity - o.syn).epsilon(1e-12));
        }
        // no migration when the association stays put
        double mig = 0.0;
        for (int s = 0; s < 5; ++s) mig += migration_cost(st, c, s, st.association, st.association, g);
        CHECK(mig == 0.0);
    }
}

TEST_CASE("objective example and monotonicity in cost") {
    // beta1/U sum rho with all rho = 0.9162 and zero cost
    CHECK(0.3 / 20 * (20 * 0.9162) == doctest::Approx(0.27486));
    auto c = small_config(3, 2);
    auto rng = make_rng(5);
    auto st = make_scenario(c, rng);
    const std::vector<double> g{0.5, 0.5, 0.5};
    const double base = objective(st, c, st.association, g);
    c.energy.n_syn *= 2.0;  // raises every occupied server's cost
    CHECK(objective(st, c, st.association, g) < base);
}

TEST_CASE("objective is invariant under server relabeling") {
    const auto c = small_config(6, 4);
    for (int k = 0; k < 10; ++k) {
        auto rng = make_rng(200 + k);
        const auto st = make_scenario(c, rng);
        const auto now = random_association(6, 4, rng);
        std::vector<double> g(6);
        for (auto& x : g) x = uniform(rng, 0, 1);
        const std::vector<int> perm{2, 0, 3, 1};
        ScenarioState p = st;
        for (int s = 0; s < 4; ++s) {
            p.servers[perm[s]] = st.servers[s];
            p.servers[perm[s]].id = perm[s];
        }
        std::vector<int> prev(6), cur(6);
        for (int u = 0; u < 6; ++u) {
            prev[u] = perm[st.association.server_of(u)];
            cur[u] = perm[now.server_of(u)];
        }
        p.association = Association(prev, 4);
        CHECK(objective(p, c, Association(cur, 4), g) == doctest::Approx(objective(st, c, now, g)).epsilon(1e-13));
    }
}

TEST_CASE("constraint report flags violations") {
    auto c = small_config(3, 2);
    auto rng = make_rng(9);
    auto st = make_scenario(c, rng);
    const std::vector<double> g{0.0, 0.0, 0.0};
    CHECK(check_constraints(st, c, st.association, g).feasible);
    st.servers[st.association.server_of(0)].compute_capacity = 0.0;
    CHECK_FALSE(check_constraints(st, c, st.association, g).feasible);
    const std::vector<double> bad{1.5, 0.0, 0.0};
    CHECK_FALSE(check_constraints(st, c, st.association, bad).allocation_valid);
}

TEST_CASE("manhattan distance is a metric on sampled triples") {
    auto rng = make_rng(3);
    for (int k = 0; k < 200; ++k) {
        Vec2 a{uniform(rng, 0, 120), uniform(rng, 0, 120)}, b{uniform(rng, 0, 120), uniform(rng, 0, 120)},
            d{uniform(rng, 0, 120), uniform(rng, 0, 120)};
        CHECK(manhattan(a, b) == manhattan(b, a));
        CHECK(manhattan(a, d) <= manhattan(a, b) + manhattan(b, d) + 1e-12);
    }
}

TEST_CASE("slot advance: mobility, arrivals and determinism") {
    auto c = small_config();
    c.max_speed = 0.0;
    c.fresh_samples = {200, 200};
    auto rng = make_rng(1);
    auto st = make_scenario(c, rng);
    for (int t = 0; t < 5; ++t) {
        auto next = advance_slot(st, c, rng);
        for (int u = 0; u < c.num_users; ++u) {
            CHECK(next.users[u].position == st.users[u].position);
            CHECK(next.users[u].fresh_samples == 200);
            CHECK(next.users[u].prev_samples == st.users[u].fresh_samples);
        }
        CHECK(next.slot == st.slot + 1);
        st = next;
    }

    auto c2 = small_config();
    auto run = [&]() {
        auto r = make_rng(77);
        auto s = make_scenario(c2, r);
        std::string log;
        for (int t = 0; t < 750; ++t) {
            s = advance_slot(s, c2, r);
            log += serialize(s);
            for (const auto& u : s.users) {
                CHECK(u.position.x >= 0.0);
                CHECK(u.position.x <= c2.area_side);
            }
        }
        return log;
    };
    CHECK(run() == run());
}

TEST_CASE("nearest-feasible association") {
    auto c = small_config(5, 1);
    auto rng = make_rng(4);
    auto st = make_scenario(c, rng);
    const auto single = nearest_feasible(st, c);
    for (int u = 0; u < 5; ++u) CHECK(single.association.server_of(u) == 0);

    // equidistant user goes to the lower id
    ScenarioState tie;
    tie.servers.push_back({0, {0, 0}, 130, 1450, 55, 50});
    tie.servers.push_back({1, {20, 0}, 130, 1450, 55, 50});
    UserTwin u;
    u.position = {10, 0};
    u.fresh_samples = 500;
    u.prev_samples = 500;
    u.finetune_epochs = 10;
    u.tx_power_w = 0.2;
    u.bandwidth_hz = 15e3;
    tie.users.push_back(u);
    tie.association = Association({1}, 2);
    CHECK(nearest_feasible(tie, small_config(1, 2)).association.server_of(0) == 0);
}

TEST_CASE("nearest-feasible matches an exhaustive greedy oracle") {
    // oracle: for each user in id order, scan all servers and keep the closest admissible one
    auto c = small_config(6, 4);
    c.compute_capacity = {1.0, 1.6};  // tight enough that repairs happen
    int repaired = 0;
    for (int k = 0; k < 50; ++k) {
        auto rng = make_rng(300 + k);
        const auto st = make_scenario(c, rng);
        const auto got = nearest_feasible(st, c);
        std::vector<double> cmp(4, 0.0), syn(4, 0.0);
        bool feasible = true;
        for (int u = 0; u < 6; ++u) {
            const auto& usr = st.users[u];
            int best = -1, nearest = 0;
            double best_d = 1e300, nearest_d = 1e300;
            for (int s = 0; s < 4; ++s) {
                const auto& srv = st.servers[s];
                const double d = manhattan(usr.position, srv.position);
                if (d < nearest_d) nearest_d = d, nearest = s;
                const double lc = c.energy.n_cmp * srv.cycles_per_unit * (usr.fresh_samples + usr.prev_samples) *
                                  (srv.local_epochs + usr.finetune_epochs);
                const double ls = c.energy.n_syn * usr.fresh_samples * c.energy.bits_per_sample /
                                  uplink_rate(usr, c.energy) * d;
                if (cmp[s] + lc <= srv.compute_capacity && syn[s] + ls <= srv.comm_capacity && d < best_d)
                    best_d = d, best = s;
            }
            if (best < 0) feasible = false, best = nearest;
            if (best != nearest) ++repaired;
            const auto& srv = st.servers[best];
            cmp[best] += c.energy.n_cmp * srv.cycles_per_unit * (usr.fresh_samples + usr.prev_samples) *
                         (srv.local_epochs + usr.finetune_epochs);
            syn[best] += c.energy.n_syn * usr.fresh_samples * c.energy.bits_per_sample / uplink_rate(usr, c.energy) *
                         manhattan(usr.position, srv.position);
            CHECK(got.association.server_of(u) == best);
        }
        CHECK(got.feasible == feasible);
    }
    CHECK(repaired > 0);
}
