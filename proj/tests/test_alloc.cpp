#include <doctest.h>

#include <cmath>

#include "diten/alloc.hpp"

using namespace diten;

namespace {

struct Instance {
    ScenarioState state;
    ScenarioConfig cfg;
    Association now;
    AllocProblem prob;
};

Instance random_instance(std::uint64_t seed, int users = 3, int servers = 3, ScenarioConfig cfg = {}) {
    Instance in;
    in.cfg = cfg;
    in.cfg.num_users = users;
    in.cfg.num_servers = servers;
    auto rng = make_rng(seed, {42});
    in.state = make_scenario(in.cfg, rng);
    std::vector<int> pick(users);
    for (auto& p : pick) p = std::uniform_int_distribution<int>(0, servers - 1)(rng);
    in.now = Association(pick, servers);
    in.prob = AllocProblem::from_state(in.state, in.cfg, in.now);
    return in;
}

std::vector<double> random_gamma(int n, Rng& rng, double lo = 0.05, double hi = 0.95) {
    std::vector<double> g(n);
    for (auto& x : g) x = uniform(rng, lo, hi);
    return g;
}

}  // namespace

TEST_CASE("negated objective agrees with the scenario objective") {
    for (int k = 0; k < 30; ++k) {
        auto in = random_instance(k, 6, 4);
        auto rng = make_rng(k, {1});
        const auto g = random_gamma(6, rng, 0.0, 1.0);
        CHECK(neg_objective(in.prob, g) == doctest::Approx(-objective(in.state, in.cfg, in.now, g)).epsilon(1e-12));
        const auto load = compute_loads(in.prob, g);
        for (int s = 0; s < 4; ++s)
            CHECK(load[s] == doctest::Approx(compute_cost(in.state, in.cfg, s, in.now, g)).epsilon(1e-12));
    }
}

TEST_CASE("no history means gamma has no effect") {
    auto in = random_instance(3, 4, 3);
    for (auto& u : in.state.users) u.prev_samples = 0.0;
    const auto prob = AllocProblem::from_state(in.state, in.cfg, in.now);
    const std::vector<double> g{0.3, 0.6, 0.1, 0.9};
    const auto d = neg_objective_grad_hess(prob, g);
    CHECK(d.gradient.cwiseAbs().maxCoeff() == 0.0);
    CHECK(d.hessian.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gradient and Hessian match finite differences") {
    for (int k = 0; k < 100; ++k) {
        auto in = random_instance(1000 + k, 5, 3);
        auto rng = make_rng(k, {2});
        const auto g = random_gamma(5, rng);
        const auto d = neg_objective_grad_hess(in.prob, g);
        CHECK(d.value == doctest::Approx(neg_objective(in.prob, g)).epsilon(1e-14));
        for (int u = 0; u < 5; ++u) {
            auto shifted = [&](int i, double hi, int j, double hj) {
                auto x = g;
                x[i] += hi;
                x[j] += hj;
                return neg_objective(in.prob, x);
            };
            const double h = 1e-5;
            const double fd = (shifted(u, h, u, 0) - shifted(u, -h, u, 0)) / (2 * h);
            CHECK(std::abs(d.gradient(u) - fd) <= 1e-5 * std::max(std::abs(fd), 1e-6));
            for (int v = 0; v < 5; ++v) {
                const double h2 = 1e-4;
                const double fd2 = (shifted(u, h2, v, h2) - shifted(u, h2, v, -h2) - shifted(u, -h2, v, h2) +
                                    shifted(u, -h2, v, -h2)) /
                                   (4 * h2 * h2);
                if (in.prob.server[u] != in.prob.server[v]) {
                    CHECK(d.hessian(u, v) == 0.0);
                    continue;
                }
                CHECK(std::abs(d.hessian(u, v) - fd2) <= 1e-4 * std::abs(fd2) + 1e-7);
            }
        }
    }
}

TEST_CASE("users sharing a server are coupled in the Hessian") {
    // two users on one server, both migrating: the cross term is the normalization curvature
    auto in = random_instance(5, 2, 2);
    in.state.association = Association({0, 0}, 2);
    for (auto& u : in.state.users) u.prev_samples = 500.0;
    auto prob = AllocProblem::from_state(in.state, in.cfg, Association({1, 1}, 2));
    prob.f0 = 1e5;  // keep Norm'' away from its underflowing plateau
    const std::vector<double> g{0.5, 0.5};
    const auto d = neg_objective_grad_hess(prob, g);
    CHECK(d.hessian(0, 1) < 0.0);
    CHECK(d.hessian(0, 1) == d.hessian(1, 0));
}

TEST_CASE("solver: cost-dominated instances pick no history") {
    for (int k = 0; k < 10; ++k) {
        ScenarioConfig cfg;
        cfg.compute_capacity = {1e9, 1e9};
        auto prob = random_instance(2000 + k, 3, 3, cfg).prob;
        // keep Norm off its plateau and make the utility gain negligible against the cost slope
        prob.beta1 = 1e-6;
        double top = 0.0;
        for (int s = 0; s < prob.num_servers; ++s) top = std::max(top, prob.cost_base[s]);
        for (double c : prob.cost_slope) top += c;
        prob.f0 = top;
        const auto sol = solve(prob);
        const auto grid = brute_force_oracle(prob, 0.01);
        REQUIRE(sol.status == AllocStatus::optimal);
        for (int u = 0; u < 3; ++u) {
            CHECK(grid.gamma[u] == 0.0);
            CHECK(sol.gamma[u] == 0.0);
        }
    }
}

TEST_CASE("solver: free costs pick all history") {
    for (int k = 0; k < 10; ++k) {
        ScenarioConfig cfg;
        cfg.energy.n_mig = 0.0;
        cfg.energy.n_cmp = 0.0;
        cfg.energy.n_syn = 0.0;
        cfg.compute_capacity = {1e9, 1e9};
        const auto prob = random_instance(3000 + k, 5, 3, cfg).prob;
        const auto sol = solve(prob);
        REQUIRE(sol.status == AllocStatus::optimal);
        for (int u = 0; u < 5; ++u)
            if (prob.prev[u] > 0.0) CHECK(sol.gamma[u] == 1.0);
    }
}

TEST_CASE("solver matches the grid oracle on small random instances") {
    for (int k = 0; k < 40; ++k) {
        auto in = random_instance(4000 + k);
        const auto sol = solve(in.prob);
        const auto grid = brute_force_oracle(in.prob, 0.01);
        REQUIRE(sol.status == AllocStatus::optimal);
        CHECK(sol.value <= grid.value + 1e-4);
        for (int u = 0; u < 3; ++u) CHECK(std::abs(sol.gamma[u] - grid.gamma[u]) <= 0.02);
    }
}

TEST_CASE("solver optimality certificate and feasibility") {
    for (int k = 0; k < 30; ++k) {
        auto in = random_instance(5000 + k, 8, 3);
        const auto sol = solve(in.prob);
        REQUIRE(sol.status == AllocStatus::optimal);
        CHECK(sol.kkt_residual <= 1e-6);
        CHECK(allocation_feasible(in.prob, sol.gamma, 1e-8));
        CHECK(sol.value == neg_objective(in.prob, sol.gamma));
    }
}

TEST_CASE("solver respects a binding compute capacity") {
    auto in = random_instance(6001, 4, 1);
    const double base = in.prob.compute_base[0];
    double slope = 0.0;
    for (double d : in.prob.compute_slope) slope += d;
    in.prob.compute_capacity[0] = base + 0.3 * slope;
    std::fill(in.prob.cost_slope.begin(), in.prob.cost_slope.end(), 0.0);
    const auto sol = solve(in.prob);
    REQUIRE(sol.status == AllocStatus::optimal);
    const auto load = compute_loads(in.prob, sol.gamma);
    CHECK(load[0] <= in.prob.compute_capacity[0] + 1e-8);
    CHECK(load[0] >= in.prob.compute_capacity[0] - 1e-3 * slope);
}

TEST_CASE("solver reports infeasibility when no history already overloads a server") {
    auto in = random_instance(7001);
    in.prob.compute_capacity[in.prob.server[0]] = 0.5 * in.prob.compute_base[in.prob.server[0]];
    const auto sol = solve(in.prob);
    CHECK(sol.status == AllocStatus::infeasible);
    for (double g : sol.gamma) CHECK(g == 0.0);
}

TEST_CASE("solver is deterministic") {
    auto in = random_instance(8001, 10, 4);
    const auto a = solve(in.prob);
    const auto b = solve(in.prob);
    CHECK(a.gamma == b.gamma);
    CHECK(a.value == b.value);
}

TEST_CASE("grid oracle") {
    auto in = random_instance(9001);
    const auto corners = brute_force_oracle(in.prob, 1.0);
    for (double g : corners.gamma) CHECK((g == 0.0 || g == 1.0));
    double best = 1e300;
    for (int m = 0; m < 8; ++m) {
        std::vector<double> g{double(m & 1), double((m >> 1) & 1), double((m >> 2) & 1)};
        if (allocation_feasible(in.prob, g)) best = std::min(best, neg_objective(in.prob, g));
    }
    CHECK(corners.value == best);

    const auto fine = brute_force_oracle(in.prob, 0.01);
    CHECK(allocation_feasible(in.prob, fine.gamma));
    const auto serial = brute_force_oracle_serial(in.prob, 0.01);
    CHECK(serial.gamma == fine.gamma);
    CHECK(serial.value == fine.value);

    auto big = random_instance(9002, 5, 2);
    CHECK_THROWS_AS(brute_force_oracle(big.prob, 0.01), std::length_error);
}

TEST_CASE("convexity witness") {
    ScenarioConfig cfg;
    cfg.num_users = 8;
    cfg.num_servers = 4;
    const auto par = convexity_witness(cfg, 3, 30, true);
    const auto ser = convexity_witness_serial(cfg, 3, 30, true);
    CHECK(par.instances == 30);
    CHECK(par.midpoint_violations == ser.midpoint_violations);
    CHECK(par.worst_midpoint_gap == ser.worst_midpoint_gap);
    CHECK(par.max_cross_partial == ser.max_cross_partial);
    CHECK(par.cross_pairs > 0);
    const auto still = convexity_witness(cfg, 3, 30, false);
    CHECK(still.midpoint_violations == 0);
}
