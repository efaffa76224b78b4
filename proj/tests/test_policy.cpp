#include <doctest.h>

#include <cmath>
#include <numeric>

#include "diten/policy.hpp"
#include "diten/ppo.hpp"
#include "diten/reward.hpp"

using namespace diten;

namespace {

ExperimentConfig tiny_config(int users = 2, int servers = 3, int slots = 6) {
    ExperimentConfig c;
    c.scenario.num_users = users;
    c.scenario.num_servers = servers;
    c.scenario.slots = slots;
    c.ppo.hidden = {8};
    c.ppo.episodes = 2;
    return c;
}

std::vector<Transition> collect(PolicyGradientAgent& agent, Environment& env, int episode) {
    env.reset(episode);
    std::vector<Transition> out;
    while (!env.done()) {
        const auto before = encode_state(env.state(), env.config().scenario);
        const auto d = agent.decide(env);
        const auto r = env.step(d.association, d.allocation);
        Transition t;
        t.state = before;
        t.action = d.association.servers();
        t.log_prob = agent.log_prob(before, t.action);
        t.reward = r.reward.reward;
        t.next_state = encode_state(env.state(), env.config().scenario);
        t.done = r.done;
        out.push_back(t);
    }
    return out;
}

}  // namespace

TEST_CASE("state encoding length and range") {
    ScenarioConfig cfg;
    cfg.num_users = 7;
    cfg.num_servers = 5;
    auto rng = make_rng(1);
    auto st = make_scenario(cfg, rng);
    for (int t = 0; t < 200; ++t) {
        const auto x = encode_state(st, cfg);
        REQUIRE(x.size() == static_cast<std::size_t>(encoded_size(7, 5)));
        for (double v : x) CHECK((v >= 0.0 && v <= 1.0));
        st = advance_slot(st, cfg, rng);
    }
    CHECK(encoded_size(20, 15) == 20 * 21 + 60 + 300);
}

TEST_CASE("barrier values") {
    CHECK(barrier(0.0, 10.0, 10.0) == 10.0);
    CHECK(barrier(5.0, 10.0, 10.0) == 10.0);
    CHECK(barrier(-1.0, 10.0, 10.0) == 0.0);
    CHECK(barrier(-std::exp(-5.0), 10.0, 10.0) == doctest::Approx(0.5));
    CHECK(barrier(-100.0, 10.0, 10.0) == doctest::Approx(-std::log(100.0) / 10.0));
    CHECK(barrier(-1e-300, 10.0, 10.0) == 10.0);
}

TEST_CASE("reward decomposes into objective and barriers") {
    ScenarioConfig cfg;
    cfg.num_users = 6;
    cfg.num_servers = 4;
    RewardConfig shaping;
    auto rng = make_rng(2);
    auto st = make_scenario(cfg, rng);
    for (int k = 0; k < 20; ++k) {
        std::vector<int> a(6);
        for (auto& x : a) x = std::uniform_int_distribution<int>(0, 3)(rng);
        const Association now(a, 4);
        std::vector<double> g(6);
        for (auto& x : g) x = uniform(rng, 0.0, 1.0);
        const auto r = reward(st, cfg, shaping, now, g);
        const auto slack = check_constraints(st, cfg, now, g);
        double pen = 0.0;
        for (double s : slack.compute_slack) pen += barrier(-s, shaping.barrier_curve, shaping.penalty_cap);
        for (double s : slack.comm_slack) pen += barrier(-s, shaping.barrier_curve, shaping.penalty_cap);
        CHECK(r.objective == doctest::Approx(objective(st, cfg, now, g)).epsilon(1e-14));
        CHECK(r.reward == doctest::Approx(r.objective - pen).epsilon(1e-12));
        CHECK(r.feasible == slack.feasible);
        st = advance_slot(st, cfg, rng);
    }
}

TEST_CASE("advantage estimation") {
    const std::vector<double> r{1.0, -0.5, 2.0, 0.25};
    const std::vector<double> v{0.3, 0.1, -0.2, 0.7};
    const std::vector<double> nv{0.1, -0.2, 0.7, 0.0};
    const double sigma = 0.98;

    SUBCASE("lambda zero is the TD error") {
        const auto a = gae(r, v, nv, sigma, 0.0);
        for (int t = 0; t < 4; ++t) CHECK(a[t] == doctest::Approx(r[t] + sigma * nv[t] - v[t]));
    }
    SUBCASE("lambda one is the discounted return minus the value") {
        const auto a = gae(r, v, nv, sigma, 1.0);
        for (int t = 0; t < 4; ++t) {
            double ret = 0.0;
            for (int l = 0; t + l < 4; ++l) ret += std::pow(sigma, l) * r[t + l];
            ret += std::pow(sigma, 4 - t) * nv[3];
            CHECK(a[t] == doctest::Approx(ret - v[t]).epsilon(1e-12));
        }
    }
    SUBCASE("general lambda is the weighted sum of TD errors") {
        const double lambda = 0.9;
        const auto a = gae(r, v, nv, sigma, lambda);
        for (int t = 0; t < 4; ++t) {
            double s = 0.0;
            for (int l = 0; t + l < 4; ++l)
                s += std::pow(sigma * lambda, l) * (r[t + l] + sigma * nv[t + l] - v[t + l]);
            CHECK(a[t] == doctest::Approx(s).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(gae(r, v, std::vector<double>{0.0}, sigma, 0.9), std::invalid_argument);
}

TEST_CASE("normalization") {
    std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    normalize(v);
    CHECK(std::accumulate(v.begin(), v.end(), 0.0) == doctest::Approx(0.0));
    double ss = 0.0;
    for (double x : v) ss += x * x;
    CHECK(ss / 4.0 == doctest::Approx(1.0));
    std::vector<double> flat{2.0, 2.0, 2.0};
    normalize(flat);
    for (double x : flat) CHECK(x == 0.0);
}

TEST_CASE("clipped surrogate examples") {
    const double eps = 0.2;
    SUBCASE("unit ratio") {
        const auto l = actor_loss(std::vector<double>{-1.0}, std::vector<double>{-1.0}, std::vector<double>{2.0}, eps);
        CHECK(l.value == doctest::Approx(2.0));
        CHECK(l.grad[0] == doctest::Approx(2.0));
    }
    SUBCASE("positive advantage above the clip band is flat") {
        const auto l = actor_loss(std::vector<double>{0.5}, std::vector<double>{0.0}, std::vector<double>{1.0}, eps);
        CHECK(l.value == doctest::Approx(1.2));
        CHECK(l.grad[0] == 0.0);
    }
    SUBCASE("negative advantage above the band keeps the unclipped term") {
        const auto l = actor_loss(std::vector<double>{std::log(1.5)}, std::vector<double>{0.0},
                                  std::vector<double>{-1.0}, eps);
        CHECK(l.value == doctest::Approx(-1.5));
        CHECK(l.grad[0] == doctest::Approx(-1.5));
    }
    SUBCASE("negative advantage below the band is flat") {
        const auto l = actor_loss(std::vector<double>{std::log(0.5)}, std::vector<double>{0.0},
                                  std::vector<double>{-1.0}, eps);
        CHECK(l.value == doctest::Approx(-0.8));
        CHECK(l.grad[0] == 0.0);
    }
    SUBCASE("batch mean") {
        const auto l = actor_loss(std::vector<double>{0.0, 0.0}, std::vector<double>{0.0, 0.0},
                                  std::vector<double>{1.0, 3.0}, eps);
        CHECK(l.value == doctest::Approx(2.0));
        CHECK(l.grad[0] == doctest::Approx(0.5));
        CHECK(l.grad[1] == doctest::Approx(1.5));
    }
    SUBCASE("clip off is the plain ratio surrogate") {
        const auto l = actor_loss(std::vector<double>{0.5}, std::vector<double>{0.0}, std::vector<double>{1.0}, eps,
                                  false);
        CHECK(l.value == doctest::Approx(std::exp(0.5)));
    }
}

TEST_CASE("first clipped epoch has the actor-critic gradient") {
    const std::vector<double> lp{-0.3, -1.2, -2.0};
    const std::vector<double> adv{0.7, -1.1, 0.4};
    const auto a = actor_loss(lp, lp, adv, 0.2);
    const auto b = policy_gradient_loss(lp, adv);
    for (int t = 0; t < 3; ++t) CHECK(a.grad[t] == doctest::Approx(b.grad[t]).epsilon(1e-15));
}

TEST_CASE("critic loss") {
    const auto l = critic_loss(std::vector<double>{1.0, 0.0}, std::vector<double>{3.0, -1.0});
    CHECK(l.value == doctest::Approx(0.25 * (4.0 + 1.0)));
    CHECK(l.grad[0] == doctest::Approx(-1.0));
    CHECK(l.grad[1] == doctest::Approx(0.5));
}

TEST_CASE("policy probabilities sum to one over the joint action space") {
    const auto cfg = tiny_config();
    PolicyGradientAgent agent(cfg, 3);
    for (auto& p : agent.actor().layers()) p.weight.setRandom();
    Environment env(cfg, 3);
    env.reset(0);
    const auto s = encode_state(env.state(), cfg.scenario);
    double total = 0.0;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) total += std::exp(agent.log_prob(s, {a, b}));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("actor gradient matches finite differences of the surrogate") {
    const auto cfg = tiny_config(3, 2, 5);
    PolicyGradientAgent agent(cfg, 5);
    for (auto& p : agent.actor().layers()) p.weight.setRandom();
    Environment env(cfg, 5);
    const auto batch = collect(agent, env, 0);
    std::vector<double> adv{0.5, -1.0, 2.0, 0.1, -0.3};
    const auto analytic = flatten(agent.actor_gradient(batch, adv));
    auto params = agent.actor().flat_parameters();
    auto surrogate = [&] {
        double s = 0.0;
        for (std::size_t t = 0; t < batch.size(); ++t)
            s += std::exp(agent.log_prob(batch[t].state, batch[t].action) - batch[t].log_prob) * adv[t];
        return s / static_cast<double>(batch.size());
    };
    const double h = 1e-6;
    for (std::size_t i = 0; i < params.size(); i += 3) {
        const double keep = params[i];
        params[i] = keep + h;
        agent.actor().set_flat_parameters(params);
        const double up = surrogate();
        params[i] = keep - h;
        agent.actor().set_flat_parameters(params);
        const double down = surrogate();
        params[i] = keep;
        agent.actor().set_flat_parameters(params);
        CHECK(std::abs(analytic[i] - (up - down) / (2 * h)) <= 1e-6);
    }
}

TEST_CASE("one unclipped epoch equals the actor-critic update") {
    auto cfg = tiny_config(3, 2, 5);
    cfg.ppo.update_epochs = 1;
    PolicyGradientAgent ppo(cfg, 6, Surrogate::clipped);
    PolicyGradientAgent ac(cfg, 6, Surrogate::vanilla);
    REQUIRE(ppo.actor().flat_parameters() == ac.actor().flat_parameters());
    Environment env(cfg, 6);
    const auto batch = collect(ppo, env, 0);
    ppo.update(batch);
    ac.update(batch);
    const auto a = ppo.actor().flat_parameters(), b = ac.actor().flat_parameters();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    CHECK(ppo.critic().flat_parameters() == ac.critic().flat_parameters());
    CHECK(ac.update_epochs() == 1);
}

TEST_CASE("critic targets bootstrap from the next state") {
    auto cfg = tiny_config(2, 3, 4);
    PolicyGradientAgent agent(cfg, 7);
    Environment env(cfg, 7);
    const auto batch = collect(agent, env, 0);
    const auto targets = agent.critic_targets(batch);
    for (std::size_t t = 0; t < batch.size(); ++t) {
        const double next = batch[t].done ? 0.0 : agent.critic().predict(batch[t].next_state)(0);
        CHECK(targets[t] == doctest::Approx(batch[t].reward + cfg.ppo.discount * next).epsilon(1e-12));
    }
}

TEST_CASE("agent training is reproducible") {
    auto cfg = tiny_config(3, 3, 8);
    auto run = [&] {
        Environment env(cfg, 11);
        PolicyGradientAgent agent(cfg, 11);
        MemorySink sink;
        run_episodes(env, agent, 3, sink);
        return std::make_pair(agent.actor().flat_parameters(), sink.slots.back().objective);
    };
    const auto a = run(), b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
}

TEST_CASE("pair skip adds a shared distance and association term to every logit") {
    auto cfg = tiny_config(2, 3, 4);
    cfg.ppo.pair_skip = true;
    PolicyGradientAgent agent(cfg, 8);
    for (auto& l : agent.actor().layers()) l.weight.setZero();
    agent.pair_head().layers()[0].weight << -5.0, 2.0;
    Environment env(cfg, 8);
    env.reset(0);
    const auto& st = env.state();
    const auto x = encode_state(st, cfg.scenario);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            double expect = 0.0;
            const int pick[2] = {a, b};
            for (int u = 0; u < 2; ++u) {
                double z[3], total = 0.0;
                for (int s = 0; s < 3; ++s) {
                    const double dist = manhattan(st.users[u].position, st.servers[s].position) / (2 * cfg.scenario.area_side);
                    z[s] = -5.0 * dist + 2.0 * st.association(u, s);
                    total += std::exp(z[s]);
                }
                expect += z[pick[u]] - std::log(total);
            }
            CHECK(agent.log_prob(x, {a, b}) == doctest::Approx(expect).epsilon(1e-12));
        }
}

TEST_CASE("pair skip starts neutral and learns along the surrogate") {
    auto cfg = tiny_config(3, 3, 8);
    cfg.ppo.pair_skip = true;
    cfg.ppo.optimizer = OptimizerKind::adam;
    PolicyGradientAgent with(cfg, 9);
    cfg.ppo.pair_skip = false;
    PolicyGradientAgent without(cfg, 9);
    Environment env(cfg, 9);
    const auto batch = collect(with, env, 0);
    for (const auto& t : batch) CHECK(with.log_prob(t.state, t.action) == without.log_prob(t.state, t.action));
    with.update(batch);
    const auto w = with.pair_head().flat_parameters();
    CHECK((w[0] != 0.0 || w[1] != 0.0));
    CHECK(with.pair_head().finite());
}
