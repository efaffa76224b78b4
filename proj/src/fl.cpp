#include "diten/fl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace diten {

double ConvexShard::loss(const Eigen::VectorXd& w) const {
    const Eigen::VectorXd d = w - center;
    return 0.5 * d.dot(A * d);
}

Eigen::VectorXd ConvexShard::gradient(const Eigen::VectorXd& w) const { return A * (w - center); }

double ConvexShard::smoothness() const { return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A).eigenvalues().maxCoeff(); }
double ConvexShard::strong_convexity() const {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A).eigenvalues().minCoeff();
}

double FederatedProblem::total_samples() const {
    double d = 0.0;
    for (const auto& s : shards) d += s.samples;
    return d;
}

double FederatedProblem::loss(const Eigen::VectorXd& w) const {
    double f = 0.0;
    for (const auto& s : shards) f += s.samples * s.loss(w);
    return f / total_samples();
}

Eigen::VectorXd FederatedProblem::gradient(const Eigen::VectorXd& w) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(w.size());
    for (const auto& s : shards) g += s.samples * s.gradient(w);
    return g / total_samples();
}

Eigen::MatrixXd FederatedProblem::hessian() const {
    const auto n = shards.front().A.rows();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    for (const auto& s : shards) h += s.samples * s.A;
    return h / total_samples();
}

Eigen::VectorXd FederatedProblem::minimizer() const {
    const auto n = shards.front().A.rows();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    for (const auto& s : shards) rhs += s.samples * (s.A * s.center);
    return hessian().ldlt().solve(rhs / total_samples());
}

double FederatedProblem::smoothness() const {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(hessian()).eigenvalues().maxCoeff();
}

double FederatedProblem::strong_convexity() const {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(hessian()).eigenvalues().minCoeff();
}

Eigen::VectorXd aggregate(std::span<const Eigen::VectorXd> weights, std::span<const double> sizes) {
    if (weights.empty()) throw std::domain_error("aggregate: no shards");
    if (weights.size() != sizes.size()) throw std::domain_error("aggregate: weights and sizes differ in count");
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(weights.front().size());
    double total = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!(sizes[i] > 0.0)) throw std::domain_error("aggregate: sizes must be positive");
        if (weights[i].size() != sum.size()) throw std::domain_error("aggregate: weight lengths differ");
        sum += sizes[i] * weights[i];
        total += sizes[i];
    }
    return sum / total;
}

Eigen::VectorXd fed_round(const Eigen::VectorXd& w, const FederatedProblem& prob, double step) {
    if (!(step > 0.0)) throw std::domain_error("fed_round: step must be positive");
    std::vector<Eigen::VectorXd> local;
    std::vector<double> sizes;
    for (const auto& s : prob.shards) {
        local.push_back(w - step * s.gradient(w));
        sizes.push_back(s.samples);
    }
    return aggregate(local, sizes);
}

BoundReport verify_bound(std::span<const double> losses, double optimum, double L, double psi, double step, double tol) {
    if (!(step > 0.0) || !(L > 0.0) || !(psi > 0.0)) throw std::domain_error("verify_bound: constants must be positive");
    if (step >= 2.0 / L) throw std::domain_error("verify_bound: step >= 2/L, the bound exponent is not positive");
    BoundReport r;
    r.exponent = 2.0 * psi * step - L * psi * step * step;
    if (losses.empty()) return r;
    const double start = losses[0] - optimum;
    for (std::size_t i = 1; i < losses.size(); ++i) {
        BoundCheck c;
        c.round = static_cast<int>(i);
        c.gap = losses[i] - optimum;
        c.bound = std::exp(-static_cast<double>(i) * r.exponent) * start;
        c.pass = c.gap <= c.bound + tol;
        r.all_pass = r.all_pass && c.pass;
        r.rounds.push_back(c);
    }
    return r;
}

FlTrace run_federated(const Eigen::VectorXd& w0, const FederatedProblem& prob, double step, int rounds) {
    FlTrace t;
    t.weights.push_back(w0);
    t.losses.push_back(prob.loss(w0));
    for (int i = 0; i < rounds; ++i) {
        t.weights.push_back(fed_round(t.weights.back(), prob, step));
        t.losses.push_back(prob.loss(t.weights.back()));
    }
    return t;
}

FineTuneResult fine_tune(const Eigen::VectorXd& global, const ConvexShard& shard, double step, int rounds) {
    if (!(step > 0.0)) throw std::domain_error("fine_tune: step must be positive");
    FineTuneResult out;
    out.trace.weights.push_back(global);
    out.trace.losses.push_back(shard.loss(global));
    Eigen::VectorXd w = global;
    for (int i = 0; i < rounds; ++i) {
        w -= step * shard.gradient(w);
        out.trace.weights.push_back(w);
        out.trace.losses.push_back(shard.loss(w));
    }
    out.weights = w;
    out.report = verify_bound(out.trace.losses, 0.0, shard.smoothness(), shard.strong_convexity(), step);
    return out;
}

ConvexShard random_shard(int dim, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd m(dim, dim);
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) m(r, c) = gauss(rng);
    ConvexShard s;
    s.A = m * m.transpose() / dim + uniform(rng, 0.1, 1.0) * Eigen::MatrixXd::Identity(dim, dim);
    s.A = 0.5 * (s.A + s.A.transpose());
    s.center.resize(dim);
    for (int i = 0; i < dim; ++i) s.center(i) = uniform(rng, -5.0, 5.0);
    s.samples = std::uniform_int_distribution<int>(200, 2000)(rng);
    return s;
}

FederatedProblem random_problem(Rng& rng, int max_dim, int max_shards) {
    const int dim = std::uniform_int_distribution<int>(1, max_dim)(rng);
    const int shards = std::uniform_int_distribution<int>(1, max_shards)(rng);
    FederatedProblem p;
    for (int s = 0; s < shards; ++s) p.shards.push_back(random_shard(dim, rng));
    return p;
}

namespace {

struct InstanceOutcome {
    int checks = 0;
    int global_violations = 0;
    int local_violations = 0;
    double worst_margin = -1e300;
};

InstanceOutcome bound_instance(std::uint64_t seed, int index, int rounds) {
    auto rng = make_rng(seed, {static_cast<std::uint64_t>(index)});
    const auto prob = random_problem(rng);
    const double L = prob.smoothness();
    const double psi = prob.strong_convexity();
    const double step = 1.0 / L;
    Eigen::VectorXd w0(prob.shards.front().A.rows());
    for (Eigen::Index i = 0; i < w0.size(); ++i) w0(i) = uniform(rng, -10.0, 10.0);

    InstanceOutcome o;
    const auto trace = run_federated(w0, prob, step, rounds);
    const auto global = verify_bound(trace.losses, prob.loss(prob.minimizer()), L, psi, step);
    for (const auto& c : global.rounds) {
        ++o.checks;
        o.global_violations += c.pass ? 0 : 1;
        o.worst_margin = std::max(o.worst_margin, c.gap - c.bound);
    }
    const Eigen::VectorXd w = trace.weights.back();
    for (const auto& shard : prob.shards) {
        const auto ft = fine_tune(w, shard, 1.0 / shard.smoothness(), rounds);
        for (const auto& c : ft.report.rounds) {
            ++o.checks;
            o.local_violations += c.pass ? 0 : 1;
            o.worst_margin = std::max(o.worst_margin, c.gap - c.bound);
        }
    }
    return o;
}

BoundSuiteResult merge(const std::vector<InstanceOutcome>& all) {
    BoundSuiteResult r;
    r.instances = static_cast<int>(all.size());
    r.worst_margin = -1e300;
    for (const auto& o : all) {
        r.checks += o.checks;
        r.global_violations += o.global_violations;
        r.local_violations += o.local_violations;
        r.worst_margin = std::max(r.worst_margin, o.worst_margin);
    }
    return r;
}

double identity_error(std::uint64_t seed, int index) {
    auto rng = make_rng(seed, {static_cast<std::uint64_t>(index)});
    const auto prob = random_problem(rng);
    const double step = 1.0 / prob.smoothness();
    Eigen::VectorXd w(prob.shards.front().A.rows());
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = uniform(rng, -10.0, 10.0);
    const Eigen::VectorXd federated = fed_round(w, prob, step);
    const Eigen::VectorXd central = w - step * prob.gradient(w);
    return (federated - central).norm() / std::max(central.norm(), 1e-300);
}

}  // namespace

BoundSuiteResult bound_suite_serial(std::uint64_t seed, int instances, int rounds) {
    std::vector<InstanceOutcome> all;
    for (int i = 0; i < instances; ++i) all.push_back(bound_instance(seed, i, rounds));
    return merge(all);
}

BoundSuiteResult bound_suite(std::uint64_t seed, int instances, int rounds) {
    std::vector<InstanceOutcome> all(static_cast<std::size_t>(std::max(instances, 0)));
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < instances; ++i) all[static_cast<std::size_t>(i)] = bound_instance(seed, i, rounds);
    return merge(all);
}

double aggregation_identity_error_serial(std::uint64_t seed, int partitions) {
    double worst = 0.0;
    for (int i = 0; i < partitions; ++i) worst = std::max(worst, identity_error(seed, i));
    return worst;
}

double aggregation_identity_error(std::uint64_t seed, int partitions) {
    double worst = 0.0;
#pragma omp parallel for reduction(max : worst) schedule(static)
    for (int i = 0; i < partitions; ++i) worst = std::max(worst, identity_error(seed, i));
    return worst;
}

}  // namespace diten
