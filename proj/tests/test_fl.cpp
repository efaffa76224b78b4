#include <doctest.h>

#include <cmath>

#include "diten/fl.hpp"

using namespace diten;

namespace {

ConvexShard scalar_shard(double a, double c, double samples) {
    ConvexShard s;
    s.A = Eigen::MatrixXd::Constant(1, 1, a);
    s.center = Eigen::VectorXd::Constant(1, c);
    s.samples = samples;
    return s;
}

}  // namespace

TEST_CASE("aggregation is the size-weighted mean") {
    std::vector<Eigen::VectorXd> w{Eigen::VectorXd::Constant(2, 1.0), Eigen::VectorXd::Constant(2, 4.0)};
    const auto m = aggregate(w, std::vector<double>{1.0, 2.0});
    CHECK(m(0) == doctest::Approx(3.0));
    const auto same = aggregate(std::vector<Eigen::VectorXd>{w[0]}, std::vector<double>{7.0});
    CHECK(same(1) == 1.0);
    CHECK_THROWS_AS(aggregate(std::vector<Eigen::VectorXd>{}, std::vector<double>{}), std::domain_error);
    CHECK_THROWS_AS(aggregate(w, std::vector<double>{1.0}), std::domain_error);
    CHECK_THROWS_AS(aggregate(w, std::vector<double>{1.0, 0.0}), std::domain_error);
}

TEST_CASE("one round on a scalar quadratic") {
    FederatedProblem p{{scalar_shard(1.0, 0.0, 1.0)}};
    const auto w = fed_round(Eigen::VectorXd::Constant(1, 2.0), p, 0.5);
    CHECK(w(0) == doctest::Approx(1.0));
    CHECK(p.loss(w) == doctest::Approx(0.5));
}

TEST_CASE("a federated round is a centralized gradient step") {
    FederatedProblem p{{scalar_shard(2.0, 1.0, 100.0), scalar_shard(0.5, -3.0, 300.0)}};
    const Eigen::VectorXd w0 = Eigen::VectorXd::Constant(1, 0.7);
    const double step = 0.3;
    const auto w1 = fed_round(w0, p, step);
    CHECK(w1(0) == doctest::Approx(w0(0) - step * p.gradient(w0)(0)).epsilon(1e-14));
    CHECK(p.smoothness() == doctest::Approx(0.25 * 2.0 + 0.75 * 0.5));
    CHECK(aggregation_identity_error(1, 50) < 1e-12);
    CHECK(aggregation_identity_error(1, 50) == aggregation_identity_error_serial(1, 50));
}

TEST_CASE("bound check examples") {
    // L = psi = 1, chi = 1: exponent 1, bound e^-k
    const std::vector<double> halves{1.0, 0.3, 0.1, 0.04};
    const auto ok = verify_bound(halves, 0.0, 1.0, 1.0, 1.0);
    CHECK(ok.exponent == doctest::Approx(1.0));
    CHECK(ok.all_pass);
    REQUIRE(ok.rounds.size() == 3);
    CHECK(ok.rounds[0].round == 1);
    CHECK(ok.rounds[0].bound == doctest::Approx(std::exp(-1.0)));

    const std::vector<double> slow{1.0, 0.9};
    const auto bad = verify_bound(slow, 0.0, 1.0, 1.0, 1.0);
    CHECK_FALSE(bad.all_pass);
    CHECK_FALSE(bad.rounds[0].pass);

    CHECK_THROWS_AS(verify_bound(halves, 0.0, 1.0, 1.0, 2.0), std::domain_error);
    CHECK_THROWS_AS(verify_bound(halves, 0.0, 4.0, 1.0, 0.6), std::domain_error);
}

TEST_CASE("federated runs meet the contraction bound") {
    auto rng = make_rng(2);
    for (int k = 0; k < 20; ++k) {
        const auto p = random_problem(rng);
        const double L = p.smoothness();
        const Eigen::VectorXd w0 = Eigen::VectorXd::Constant(p.shards[0].center.size(), 3.0);
        const auto trace = run_federated(w0, p, 1.0 / L, 30);
        CHECK(trace.losses.size() == 31);
        const auto rep = verify_bound(trace.losses, p.loss(p.minimizer()), L, p.strong_convexity(), 1.0 / L);
        CHECK(rep.all_pass);
        for (std::size_t i = 1; i < trace.losses.size(); ++i) CHECK(trace.losses[i] <= trace.losses[i - 1] + 1e-12);
    }
}

TEST_CASE("fine tuning") {
    auto rng = make_rng(3);
    const auto shard = random_shard(4, rng);
    const Eigen::VectorXd g = Eigen::VectorXd::Zero(4);
    const auto none = fine_tune(g, shard, 1.0 / shard.smoothness(), 0);
    CHECK(none.weights == g);
    CHECK(none.report.rounds.empty());
    const auto some = fine_tune(g, shard, 1.0 / shard.smoothness(), 25);
    CHECK(some.report.all_pass);
    CHECK(shard.loss(some.weights) < shard.loss(g));
}

TEST_CASE("bound suite") {
    const auto par = bound_suite(4, 40, 20);
    const auto ser = bound_suite_serial(4, 40, 20);
    CHECK(par.instances == 40);
    CHECK(par.global_violations == 0);
    CHECK(par.local_violations == 0);
    CHECK(par.checks == ser.checks);
    CHECK(par.worst_margin == ser.worst_margin);
}
