#include <doctest.h>

#include <cmath>
#include <sstream>

#include "diten/mlp.hpp"

using namespace diten;

namespace {

double half_squared_sum(const Eigen::MatrixXd& m) { return 0.5 * m.squaredNorm(); }

}  // namespace

TEST_CASE("backward matches central differences") {
    for (auto act : {Activation::tanh, Activation::linear}) {
        auto rng = make_rng(7);
        Mlp net({5, 8, 6, 3}, rng, 1.0, act);
        Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 4);
        const auto out = net.forward(x);
        Eigen::MatrixXd gin;
        const auto tape = net.backward(out, &gin);  // loss = 0.5 |out|^2
        const auto analytic = flatten(tape);
        auto params = net.flat_parameters();
        const double h = 1e-6;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double keep = params[i];
            params[i] = keep + h;
            net.set_flat_parameters(params);
            const double up = half_squared_sum(net.predict(x));
            params[i] = keep - h;
            net.set_flat_parameters(params);
            const double down = half_squared_sum(net.predict(x));
            params[i] = keep;
            const double fd = (up - down) / (2 * h);
            CHECK(std::abs(analytic[i] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
        }
        net.set_flat_parameters(params);
        for (int r = 0; r < 5; ++r)
            for (int c = 0; c < 4; ++c) {
                Eigen::MatrixXd xp = x, xm = x;
                xp(r, c) += h;
                xm(r, c) -= h;
                const double fd = (half_squared_sum(net.predict(xp)) - half_squared_sum(net.predict(xm))) / (2 * h);
                CHECK(std::abs(gin(r, c) - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
            }
    }
}

TEST_CASE("single linear unit gradient by hand") {
    Mlp net({1, 1});
    net.layers()[0].weight(0, 0) = 2.0;
    net.layers()[0].bias(0) = 0.5;
    Eigen::MatrixXd x(1, 1);
    x(0, 0) = 3.0;
    const auto y = net.forward(x);
    CHECK(y(0, 0) == 6.5);
    const auto tape = net.backward(Eigen::MatrixXd::Constant(1, 1, 1.0));
    CHECK(tape.weight[0](0, 0) == 3.0);
    CHECK(tape.bias[0](0) == 1.0);
}

TEST_CASE("backward without a recording throws") {
    Mlp net({2, 2});
    CHECK_THROWS_AS(net.backward(Eigen::MatrixXd::Zero(2, 1)), std::logic_error);
    CHECK_THROWS_AS(net.forward(Eigen::MatrixXd::Zero(3, 1)), std::domain_error);
}

TEST_CASE("sgd step leaves parameters alone for zero gradient or zero rate") {
    auto rng = make_rng(1);
    Mlp net({3, 4, 2}, rng);
    const auto before = net.flat_parameters();
    auto tape = net.zero_tape();
    sgd_step(net, tape, 0.1, Direction::descent);
    CHECK(net.flat_parameters() == before);
    net.forward(Eigen::MatrixXd::Random(3, 2));
    tape = net.backward(Eigen::MatrixXd::Ones(2, 2));
    sgd_step(net, tape, 0.0, Direction::ascent);
    CHECK(net.flat_parameters() == before);
}

TEST_CASE("descent and ascent move a quadratic the right way") {
    auto rng = make_rng(2);
    Mlp net({3, 6, 2}, rng, 1.0);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 8);
    const double start = half_squared_sum(net.predict(x));
    Mlp up = net;
    for (int k = 0; k < 50; ++k) {
        const auto out = net.forward(x);
        sgd_step(net, net.backward(out), 0.01, Direction::descent);
        const auto out2 = up.forward(x);
        sgd_step(up, up.backward(out2), 0.001, Direction::ascent);
    }
    CHECK(half_squared_sum(net.predict(x)) < 0.5 * start);
    CHECK(half_squared_sum(up.predict(x)) > start);

    Mlp adam_net({3, 6, 2}, rng, 1.0);
    Adam opt(adam_net, 0.01);
    const double adam_start = half_squared_sum(adam_net.predict(x));
    for (int k = 0; k < 200; ++k) {
        const auto out = adam_net.forward(x);
        opt.step(adam_net, adam_net.backward(out), Direction::descent);
    }
    CHECK(half_squared_sum(adam_net.predict(x)) < 0.1 * adam_start);
}

TEST_CASE("block log-softmax normalizes each block") {
    const std::vector<double> logits{1.0, 2.0, 3.0, -1.0, 0.0, 1000.0};
    const auto lp = block_log_softmax(logits, 2, 3);
    for (int b = 0; b < 2; ++b) {
        double total = 0.0;
        for (int i = 0; i < 3; ++i) total += std::exp(lp[b * 3 + i]);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
    }
    CHECK(lp[5] == doctest::Approx(0.0));
    CHECK(lp[2] - lp[1] == doctest::Approx(1.0));
}

TEST_CASE("block sampling frequencies follow the softmax") {
    const std::vector<double> logits{0.0, 1.0, 2.0, 0.5, 0.5, -3.0};
    const auto lp = block_log_softmax(logits, 2, 3);
    auto rng = make_rng(3);
    const int n = 200000;
    std::vector<int> counts(6, 0);
    for (int k = 0; k < n; ++k) {
        const auto s = softmax_block_sample(logits, 2, 3, rng);
        CHECK(s.log_prob == doctest::Approx(lp[s.choice[0]] + lp[3 + s.choice[1]]).epsilon(1e-14));
        ++counts[s.choice[0]];
        ++counts[3 + s.choice[1]];
    }
    for (int i = 0; i < 6; ++i) {
        const double p = std::exp(lp[i]);
        const double se = std::sqrt(p * (1 - p) / n);
        CHECK(std::abs(counts[i] / double(n) - p) <= 5 * se + 1e-12);
    }
}

TEST_CASE("checkpoint round trip is exact") {
    auto rng = make_rng(4);
    Mlp net({4, 7, 3}, rng, 0.5, Activation::linear);
    std::stringstream buf;
    save_checkpoint(net, buf);
    const auto bytes = buf.str();
    CHECK(bytes.substr(0, 8) == "DITNMLP1");
    CHECK(bytes.size() == 8 + 4 + 3 * 4 + 1 + 8 * net.parameter_count());
    buf.seekg(0);
    const auto back = load_checkpoint(buf);
    CHECK(back.sizes() == net.sizes());
    CHECK(back.hidden_activation() == Activation::linear);
    CHECK(back.flat_parameters() == net.flat_parameters());

    std::stringstream bad("NOTMAGIC");
    CHECK_THROWS(load_checkpoint(bad));
}

TEST_CASE("soft update") {
    auto rng = make_rng(5);
    Mlp a({2, 3, 1}, rng), b({2, 3, 1}, rng);
    Mlp t = b;
    soft_update(t, a, 1.0);
    CHECK(t.flat_parameters() == a.flat_parameters());
    t = b;
    soft_update(t, a, 0.0);
    CHECK(t.flat_parameters() == b.flat_parameters());
    t = b;
    soft_update(t, a, 0.25);
    const auto pa = a.flat_parameters(), pb = b.flat_parameters(), pt = t.flat_parameters();
    for (std::size_t i = 0; i < pt.size(); ++i) CHECK(pt[i] == doctest::Approx(0.25 * pa[i] + 0.75 * pb[i]));
}

TEST_CASE("initialization is seeded") {
    auto r1 = make_rng(9), r2 = make_rng(9);
    Mlp a({3, 5, 2}, r1), b({3, 5, 2}, r2);
    CHECK(a.flat_parameters() == b.flat_parameters());
    CHECK(a.finite());
}
