#include "diten/alloc.hpp"

#include <omp.h>

#include <algorithm>
#include <random>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "diten/utility.hpp"

namespace diten {

AllocProblem AllocProblem::from_state(const ScenarioState& state, const ScenarioConfig& cfg, const Association& now,
                                      const Association& prev) {
    const int U = state.num_users();
    const int S = state.num_servers();
    if (now.num_users() != U || prev.num_users() != U) throw std::invalid_argument("AllocProblem: association size mismatch");
    AllocProblem p;
    p.num_servers = S;
    p.server = now.servers();
    p.coeffs = cfg.utility;
    p.beta1 = cfg.beta1;
    p.beta2 = cfg.beta2;
    p.f0 = cfg.f0;
    p.cost_base.assign(static_cast<std::size_t>(S), 0.0);
    p.compute_base.assign(static_cast<std::size_t>(S), 0.0);
    p.compute_capacity.resize(static_cast<std::size_t>(S));
    for (int s = 0; s < S; ++s) {
        p.compute_capacity[static_cast<std::size_t>(s)] = state.servers[static_cast<std::size_t>(s)].compute_capacity;
        p.cost_base[static_cast<std::size_t>(s)] = sync_cost(state, cfg, s, now);
    }
    const auto& e = cfg.energy;
    for (int u = 0; u < U; ++u) {
        const auto& usr = state.users[static_cast<std::size_t>(u)];
        const int s = now.server_of(u);
        const int from = prev.server_of(u);
        const auto& srv = state.servers[static_cast<std::size_t>(s)];
        const double hop = from == s ? 0.0
                                     : manhattan(srv.position, state.servers[static_cast<std::size_t>(from)].position);
        const double per_sample_cmp = e.n_cmp * srv.cycles_per_unit * (srv.local_epochs + usr.finetune_epochs);
        const double per_sample_mig = e.n_mig * hop * e.bits_per_sample;

        p.fresh.push_back(usr.fresh_samples);
        p.prev.push_back(usr.prev_samples);
        p.emd.push_back(usr.emd);
        p.cost_slope.push_back(usr.prev_samples * (per_sample_mig + per_sample_cmp));
        p.compute_slope.push_back(usr.prev_samples * per_sample_cmp);
        p.cost_base[static_cast<std::size_t>(s)] += e.n_mig * hop * (usr.fresh_samples * e.bits_per_sample + usr.twin_base_bits) +
                                                   per_sample_cmp * usr.fresh_samples;
        p.compute_base[static_cast<std::size_t>(s)] += per_sample_cmp * usr.fresh_samples;
    }
    return p;
}

void AllocProblem::validate() const {
    const auto U = server.size();
    const auto S = static_cast<std::size_t>(num_servers);
    if (num_servers <= 0) throw std::invalid_argument("AllocProblem: no servers");
    if (fresh.size() != U || prev.size() != U || emd.size() != U || cost_slope.size() != U || compute_slope.size() != U)
        throw std::invalid_argument("AllocProblem: per-user arrays disagree in length");
    if (cost_base.size() != S || compute_base.size() != S || compute_capacity.size() != S)
        throw std::invalid_argument("AllocProblem: per-server arrays disagree in length");
    for (std::size_t u = 0; u < U; ++u) {
        if (server[u] < 0 || server[u] >= num_servers) throw std::invalid_argument("AllocProblem: server index out of range");
        if (!(fresh[u] > 0.0) || prev[u] < 0.0) throw std::invalid_argument("AllocProblem: sample counts out of range");
        if (cost_slope[u] < 0.0 || compute_slope[u] < 0.0) throw std::invalid_argument("AllocProblem: negative cost slope");
    }
    if (!(f0 > 0.0)) throw std::invalid_argument("AllocProblem: f0 must be positive");
}

namespace {

std::vector<double> server_totals(const AllocProblem& p, std::span<const double> gamma) {
    std::vector<double> c = p.cost_base;
    for (int u = 0; u < p.num_users(); ++u)
        c[static_cast<std::size_t>(p.server[static_cast<std::size_t>(u)])] +=
            p.cost_slope[static_cast<std::size_t>(u)] * gamma[static_cast<std::size_t>(u)];
    return c;
}

}  // namespace

double neg_objective(const AllocProblem& p, std::span<const double> gamma) {
    const int U = p.num_users();
    double utility = 0.0;
    for (int u = 0; u < U; ++u) {
        const auto i = static_cast<std::size_t>(u);
        utility += data_utility(p.emd[i], p.fresh[i] + gamma[i] * p.prev[i], p.coeffs);
    }
    double cost = 0.0;
    for (double c : server_totals(p, gamma)) cost += norm(c, p.f0);
    return -p.beta1 / U * utility + p.beta2 / p.num_servers * cost;
}

ObjectiveDerivatives neg_objective_grad_hess(const AllocProblem& p, std::span<const double> gamma) {
    const int U = p.num_users();
    const auto totals = server_totals(p, gamma);
    std::vector<ScalarDerivatives> nd(totals.size());
    double cost = 0.0;
    for (std::size_t s = 0; s < totals.size(); ++s) {
        nd[s] = norm_derivatives(totals[s], p.f0);
        cost += nd[s].value;
    }
    const double wu = p.beta1 / U;
    const double wc = p.beta2 / p.num_servers;

    ObjectiveDerivatives out;
    out.gradient = Eigen::VectorXd::Zero(U);
    out.hessian = Eigen::MatrixXd::Zero(U, U);
    double utility = 0.0;
    for (int u = 0; u < U; ++u) {
        const auto i = static_cast<std::size_t>(u);
        const auto rho = data_utility_derivatives(p.emd[i], p.fresh[i] + gamma[i] * p.prev[i], p.coeffs);
        const auto& n = nd[static_cast<std::size_t>(p.server[i])];
        utility += rho.value;
        out.gradient(u) = -wu * rho.d1 * p.prev[i] + wc * n.d1 * p.cost_slope[i];
        out.hessian(u, u) = -wu * rho.d2 * p.prev[i] * p.prev[i];
    }
    for (int u = 0; u < U; ++u) {
        for (int v = 0; v < U; ++v) {
            const auto i = static_cast<std::size_t>(u), j = static_cast<std::size_t>(v);
            if (p.server[i] != p.server[j]) continue;
            out.hessian(u, v) += wc * nd[static_cast<std::size_t>(p.server[i])].d2 * p.cost_slope[i] * p.cost_slope[j];
        }
    }
    out.value = -wu * utility + wc * cost;
    return out;
}

std::vector<double> compute_loads(const AllocProblem& p, std::span<const double> gamma) {
    std::vector<double> load = p.compute_base;
    for (int u = 0; u < p.num_users(); ++u)
        load[static_cast<std::size_t>(p.server[static_cast<std::size_t>(u)])] +=
            p.compute_slope[static_cast<std::size_t>(u)] * gamma[static_cast<std::size_t>(u)];
    return load;
}

bool allocation_feasible(const AllocProblem& p, std::span<const double> gamma, double tol) {
    for (double g : gamma)
        if (g < -tol || g > 1.0 + tol) return false;
    const auto load = compute_loads(p, gamma);
    for (std::size_t s = 0; s < load.size(); ++s)
        if (load[s] > p.compute_capacity[s] + tol) return false;
    return true;
}

std::string_view to_string(AllocStatus s) {
    switch (s) {
        case AllocStatus::optimal: return "optimal";
        case AllocStatus::infeasible: return "infeasible";
        case AllocStatus::max_iter: return "max_iter";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Interior point on one server block.

namespace {

constexpr int kCornerStartLimit = 4;  // enumerate all 2^n corner starts up to this block size
constexpr double kCornerOffset = 1e-3;
constexpr double kCornerBarrier = 1e-7;
constexpr double kSnapZone = 1e-2;
constexpr double kBarrierShrink = 0.2;
constexpr double kInnerTol = 1e-15;

struct Block {
    int server = 0;
    std::vector<int> users;
    Eigen::VectorXd slope;          // cost slope c_i
    Eigen::VectorXd compute_slope;  // d_i
    double base = 0.0;              // C_s at gamma = 0
    double room = 0.0;              // q_s - C^cmp_s at gamma = 0
    bool has_cap = false;

    int size() const { return static_cast<int>(users.size()); }
    int num_constraints() const { return 2 * size() + (has_cap ? 1 : 0); }
};

class BlockSolver {
public:
    BlockSolver(const AllocProblem& p, const Block& b) : p_(p), b_(b) {}

    double objective(const Eigen::VectorXd& x) const {
        double f = 0.0, z = b_.base;
        for (int i = 0; i < b_.size(); ++i) {
            const auto u = static_cast<std::size_t>(b_.users[static_cast<std::size_t>(i)]);
            f -= wu() * data_utility(p_.emd[u], p_.fresh[u] + x(i) * p_.prev[u], p_.coeffs);
            z += b_.slope(i) * x(i);
        }
        return f + wc() * norm(z, p_.f0);
    }

    // Barrier value; +inf outside the strict interior.
    double barrier(const Eigen::VectorXd& x) const {
        double phi = 0.0;
        for (int i = 0; i < b_.size(); ++i) {
            if (!(x(i) > 0.0 && x(i) < 1.0)) return std::numeric_limits<double>::infinity();
            phi -= std::log(x(i)) + std::log1p(-x(i));
        }
        if (b_.has_cap) {
            const double slack = b_.room - b_.compute_slope.dot(x);
            if (!(slack > 0.0)) return std::numeric_limits<double>::infinity();
            phi -= std::log(slack);
        }
        return phi;
    }

    void derivatives(const Eigen::VectorXd& x, double mu, Eigen::VectorXd& g, Eigen::MatrixXd& h) const {
        const int n = b_.size();
        g.setZero(n);
        h.setZero(n, n);
        double z = b_.base;
        for (int i = 0; i < n; ++i) z += b_.slope(i) * x(i);
        const auto nd = norm_derivatives(z, p_.f0);
        for (int i = 0; i < n; ++i) {
            const auto u = static_cast<std::size_t>(b_.users[static_cast<std::size_t>(i)]);
            const auto rho = data_utility_derivatives(p_.emd[u], p_.fresh[u] + x(i) * p_.prev[u], p_.coeffs);
            g(i) = -wu() * rho.d1 * p_.prev[u] + wc() * nd.d1 * b_.slope(i) - mu / x(i) + mu / (1.0 - x(i));
            h(i, i) = -wu() * rho.d2 * p_.prev[u] * p_.prev[u] + mu / (x(i) * x(i)) + mu / ((1.0 - x(i)) * (1.0 - x(i)));
        }
        h.noalias() += wc() * nd.d2 * b_.slope * b_.slope.transpose();
        if (b_.has_cap) {
            const double slack = b_.room - b_.compute_slope.dot(x);
            g += (mu / slack) * b_.compute_slope;
            h.noalias() += (mu / (slack * slack)) * b_.compute_slope * b_.compute_slope.transpose();
        }
    }

    // Newton direction on a Hessian shifted just enough to be positive definite.
    static Eigen::VectorXd newton_direction(const Eigen::MatrixXd& h, const Eigen::VectorXd& g) {
        Eigen::LLT<Eigen::MatrixXd> llt(h);
        if (llt.info() == Eigen::Success) return -llt.solve(g);
        const double scale = std::max(1e-300, h.diagonal().cwiseAbs().maxCoeff());
        double tau = 1e-8 * scale;
        const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(h.rows(), h.cols());
        for (int k = 0; k < 80; ++k, tau *= 10.0) {
            Eigen::LLT<Eigen::MatrixXd> shifted(h + tau * eye);
            if (shifted.info() == Eigen::Success) return -shifted.solve(g);
        }
        return -g;
    }

    double max_step(const Eigen::VectorXd& x, const Eigen::VectorXd& dx) const {
        double t = std::numeric_limits<double>::infinity();
        for (int i = 0; i < b_.size(); ++i) {
            if (dx(i) < 0.0) t = std::min(t, -x(i) / dx(i));
            if (dx(i) > 0.0) t = std::min(t, (1.0 - x(i)) / dx(i));
        }
        if (b_.has_cap) {
            const double rate = b_.compute_slope.dot(dx);
            if (rate > 0.0) t = std::min(t, (b_.room - b_.compute_slope.dot(x)) / rate);
        }
        return t;
    }

    struct Outcome {
        Eigen::VectorXd x;
        double value = 0.0;
        bool converged = true;
    };

    // Damped Newton on f + mu*phi. Returns false when the iteration budget ran out.
    bool center(Eigen::VectorXd& x, double mu, int& budget) const {
        Eigen::VectorXd g;
        Eigen::MatrixXd h;
        for (;;) {
            if (budget-- <= 0) return false;
            derivatives(x, mu, g, h);
            const Eigen::VectorXd dx = newton_direction(h, g);
            const double slope = g.dot(dx);
            if (-slope <= 2.0 * kInnerTol) return true;
            double t = std::min(1.0, 0.99 * max_step(x, dx));
            const double f0 = objective(x) + mu * barrier(x);
            bool moved = false;
            while (t > 1e-20) {
                const Eigen::VectorXd xn = x + t * dx;
                const double fn = objective(xn) + mu * barrier(xn);
                if (fn <= f0 + 0.25 * t * slope) {
                    x = xn;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if (!moved) return true;  // no representable decrease left
        }
    }

    Outcome run(Eigen::VectorXd x, double mu, double tol, int max_iter) const {
        Outcome out;
        int budget = max_iter;
        const int m = b_.num_constraints();
        for (;;) {
            if (!center(x, mu, budget)) {
                out.converged = false;
                break;
            }
            if (m * mu < tol) break;
            mu *= kBarrierShrink;
        }
        out.x = x;
        out.value = objective(x);
        return out;
    }

    std::vector<Eigen::VectorXd> corner_starts() const {
        const int n = b_.size();
        std::vector<Eigen::VectorXd> starts;
        auto push = [&](Eigen::VectorXd x) {
            if (b_.has_cap) {
                const double load = b_.compute_slope.dot(x);
                if (load >= b_.room) x *= 0.5 * b_.room / load;
            }
            starts.push_back(std::move(x));
        };
        if (n <= kCornerStartLimit) {
            for (int mask = 0; mask < (1 << n); ++mask) {
                Eigen::VectorXd x(n);
                for (int i = 0; i < n; ++i) x(i) = (mask >> i) & 1 ? 1.0 - kCornerOffset : kCornerOffset;
                push(std::move(x));
            }
        } else {
            push(Eigen::VectorXd::Constant(n, kCornerOffset));
            push(Eigen::VectorXd::Constant(n, 1.0 - kCornerOffset));
            // users with a migration term high / low, the rest opposite
            Eigen::VectorXd a(n), c(n);
            for (int i = 0; i < n; ++i) {
                const bool migrating = b_.slope(i) > b_.compute_slope(i) * (1.0 + 1e-12);
                a(i) = migrating ? 1.0 - kCornerOffset : kCornerOffset;
                c(i) = migrating ? kCornerOffset : 1.0 - kCornerOffset;
            }
            push(std::move(a));
            push(std::move(c));
        }
        return starts;
    }

private:
    double wu() const { return p_.beta1 / p_.num_users(); }
    double wc() const { return p_.beta2 / p_.num_servers; }

    const AllocProblem& p_;
    const Block& b_;
};

}  // namespace

double kkt_residual(const AllocProblem& prob, std::span<const double> gamma) {
    constexpr double kActive = 1e-9;
    const auto d = neg_objective_grad_hess(prob, gamma);
    const auto load = compute_loads(prob, gamma);
    double worst = 0.0;
    for (int s = 0; s < prob.num_servers; ++s) {
        std::vector<int> users;
        for (int u = 0; u < prob.num_users(); ++u)
            if (prob.server[static_cast<std::size_t>(u)] == s && prob.prev[static_cast<std::size_t>(u)] > 0.0) users.push_back(u);
        const auto si = static_cast<std::size_t>(s);
        const double cap = prob.compute_capacity[si];
        const bool cap_active = cap - load[si] <= kActive * std::max(1.0, cap);
        // capacity multiplier fitted on the coordinates strictly inside the box
        double lambda = 0.0;
        if (cap_active) {
            double num = 0.0, den = 0.0;
            for (int u : users) {
                const double g = gamma[static_cast<std::size_t>(u)];
                if (g <= kActive || g >= 1.0 - kActive) continue;
                const double c = prob.compute_slope[static_cast<std::size_t>(u)];
                num -= c * d.gradient(u);
                den += c * c;
            }
            lambda = den > 0.0 ? std::max(0.0, num / den) : 0.0;
        }
        for (int u : users) {
            const double g = gamma[static_cast<std::size_t>(u)];
            const double r = d.gradient(u) + lambda * prob.compute_slope[static_cast<std::size_t>(u)];
            if (g <= kActive)
                worst = std::max(worst, std::max(0.0, -r));
            else if (g >= 1.0 - kActive)
                worst = std::max(worst, std::max(0.0, r));
            else
                worst = std::max(worst, std::abs(r));
        }
    }
    return worst;
}

AllocSolution solve(const AllocProblem& prob, double tol, int max_iter) {
    prob.validate();
    const int U = prob.num_users();
    const int S = prob.num_servers;
    AllocSolution sol;
    sol.gamma.assign(static_cast<std::size_t>(U), 0.0);

    for (int s = 0; s < S; ++s) {
        if (prob.compute_base[static_cast<std::size_t>(s)] > prob.compute_capacity[static_cast<std::size_t>(s)]) {
            sol.status = AllocStatus::infeasible;
            sol.value = neg_objective(prob, sol.gamma);
            sol.kkt_residual = std::numeric_limits<double>::infinity();
            return sol;
        }
    }

    bool all_converged = true;
    for (int s = 0; s < S; ++s) {
        Block b;
        b.server = s;
        for (int u = 0; u < U; ++u) {
            const auto i = static_cast<std::size_t>(u);
            // users without history have no effect on the objective; keep gamma = 0
            if (prob.server[i] == s && prob.prev[i] > 0.0) b.users.push_back(u);
        }
        b.base = prob.cost_base[static_cast<std::size_t>(s)];
        if (b.users.empty()) continue;
        const int n = b.size();
        b.slope.resize(n);
        b.compute_slope.resize(n);
        for (int i = 0; i < n; ++i) {
            const auto u = static_cast<std::size_t>(b.users[static_cast<std::size_t>(i)]);
            b.slope(i) = prob.cost_slope[u];
            b.compute_slope(i) = prob.compute_slope[u];
        }
        b.room = prob.compute_capacity[static_cast<std::size_t>(s)] - prob.compute_base[static_cast<std::size_t>(s)];
        b.has_cap = b.compute_slope.sum() > 0.0;
        if (b.has_cap && !(b.room > 0.0)) continue;  // only gamma = 0 is admissible

        BlockSolver solver(prob, b);
        const double uniform_max = b.has_cap ? b.room / b.compute_slope.sum() : std::numeric_limits<double>::infinity();
        auto best = solver.run(Eigen::VectorXd::Constant(n, std::min(0.5, 0.5 * uniform_max)), 1.0, tol, max_iter);
        for (const auto& start : solver.corner_starts()) {
            auto cand = solver.run(start, kCornerBarrier, tol, max_iter);
            if (cand.converged && (!best.converged || cand.value < best.value)) best = std::move(cand);
        }
        all_converged = all_converged && best.converged;
        for (int i = 0; i < n; ++i) sol.gamma[static_cast<std::size_t>(b.users[static_cast<std::size_t>(i)])] = best.x(i);
    }
    // The barrier keeps iterates strictly inside the box; move coordinates that
    // sit next to a bound onto it whenever that is feasible and no worse.
    double value = neg_objective(prob, sol.gamma);
    for (auto& g : sol.gamma) {
        if (g == 0.0 || (g > kSnapZone && g < 1.0 - kSnapZone)) continue;
        const double keep = g;
        g = g < 0.5 ? 0.0 : 1.0;
        const double snapped = neg_objective(prob, sol.gamma);
        if (snapped <= value && allocation_feasible(prob, sol.gamma))
            value = snapped;
        else
            g = keep;
    }
    sol.value = value;
    sol.kkt_residual = kkt_residual(prob, sol.gamma);
    sol.status = all_converged ? AllocStatus::optimal : AllocStatus::max_iter;
    return sol;
}

// ---------------------------------------------------------------------------
// Grid oracle.

namespace {

struct Grid {
    int points_per_axis = 0;
    long long total = 0;
    std::vector<double> axis;
    std::vector<std::vector<double>> utility;  // per user, per grid index: -beta1/U * rho
};

Grid make_grid(const AllocProblem& p, double step) {
    if (!(step > 0.0 && step <= 1.0)) throw std::invalid_argument("brute_force_oracle: step must lie in (0, 1]");
    Grid g;
    g.points_per_axis = static_cast<int>(std::floor(1.0 / step + 1e-9)) + 1;
    const double limit = 1e7;
    double total = 1.0;
    for (int u = 0; u < p.num_users(); ++u) {
        total *= g.points_per_axis;
        if (total > limit) throw std::length_error("brute_force_oracle: grid exceeds 1e7 points");
    }
    g.total = static_cast<long long>(total);
    for (int k = 0; k < g.points_per_axis; ++k) g.axis.push_back(std::min(1.0, k * step));
    for (int u = 0; u < p.num_users(); ++u) {
        const auto i = static_cast<std::size_t>(u);
        std::vector<double> row;
        for (double x : g.axis) row.push_back(-p.beta1 / p.num_users() * data_utility(p.emd[i], p.fresh[i] + x * p.prev[i], p.coeffs));
        g.utility.push_back(std::move(row));
    }
    return g;
}

struct Candidate {
    double value = std::numeric_limits<double>::infinity();
    long long index = -1;

    bool better_than(const Candidate& o) const {
        if (index < 0) return false;
        if (o.index < 0) return true;
        return value < o.value || (value == o.value && index < o.index);
    }
};

// Evaluates one grid point; returns +inf when the point violates a compute capacity.
double grid_value(const AllocProblem& p, const Grid& g, long long index, std::vector<double>& totals,
                  std::vector<double>& loads) {
    std::copy(p.cost_base.begin(), p.cost_base.end(), totals.begin());
    std::copy(p.compute_base.begin(), p.compute_base.end(), loads.begin());
    double value = 0.0;
    for (int u = 0; u < p.num_users(); ++u) {
        const auto i = static_cast<std::size_t>(u);
        const auto k = static_cast<std::size_t>(index % g.points_per_axis);
        index /= g.points_per_axis;
        const double x = g.axis[k];
        value += g.utility[i][k];
        totals[static_cast<std::size_t>(p.server[i])] += p.cost_slope[i] * x;
        loads[static_cast<std::size_t>(p.server[i])] += p.compute_slope[i] * x;
    }
    for (std::size_t s = 0; s < loads.size(); ++s) {
        if (loads[s] > p.compute_capacity[s]) return std::numeric_limits<double>::infinity();
        value += p.beta2 / p.num_servers * norm(totals[s], p.f0);
    }
    return value;
}

AllocSolution finish(const AllocProblem& p, const Grid& g, const Candidate& best) {
    AllocSolution sol;
    sol.gamma.assign(static_cast<std::size_t>(p.num_users()), 0.0);
    if (best.index < 0) {
        sol.status = AllocStatus::infeasible;
        sol.value = neg_objective(p, sol.gamma);
        sol.kkt_residual = std::numeric_limits<double>::infinity();
        return sol;
    }
    long long index = best.index;
    for (int u = 0; u < p.num_users(); ++u) {
        sol.gamma[static_cast<std::size_t>(u)] = g.axis[static_cast<std::size_t>(index % g.points_per_axis)];
        index /= g.points_per_axis;
    }
    sol.value = neg_objective(p, sol.gamma);
    sol.status = AllocStatus::optimal;
    sol.kkt_residual = 0.0;
    return sol;
}

}  // namespace

AllocSolution brute_force_oracle_serial(const AllocProblem& prob, double step) {
    prob.validate();
    const Grid g = make_grid(prob, step);
    std::vector<double> totals(prob.cost_base.size()), loads(prob.compute_base.size());
    Candidate best;
    for (long long i = 0; i < g.total; ++i) {
        const double v = grid_value(prob, g, i, totals, loads);
        if (!std::isfinite(v)) continue;
        Candidate c{v, i};
        if (c.better_than(best)) best = c;
    }
    return finish(prob, g, best);
}

AllocSolution brute_force_oracle(const AllocProblem& prob, double step) {
    prob.validate();
    const Grid g = make_grid(prob, step);
    const int threads = omp_get_max_threads();
    std::vector<Candidate> per_thread(static_cast<std::size_t>(threads));
#pragma omp parallel num_threads(threads)
    {
        std::vector<double> totals(prob.cost_base.size()), loads(prob.compute_base.size());
        Candidate local;
#pragma omp for schedule(static)
        for (long long i = 0; i < g.total; ++i) {
            const double v = grid_value(prob, g, i, totals, loads);
            if (!std::isfinite(v)) continue;
            Candidate c{v, i};
            if (c.better_than(local)) local = c;
        }
        per_thread[static_cast<std::size_t>(omp_get_thread_num())] = local;
    }
    Candidate best;
    for (const auto& c : per_thread)
        if (c.better_than(best)) best = c;
    return finish(prob, g, best);
}

// ---------------------------------------------------------------------------
// Convexity witness.

namespace {

constexpr int kMidpointPairs = 20;
constexpr int kCrossPairs = 5;
constexpr double kCrossStep = 1e-3;
constexpr double kMidpointTol = 1e-10;

ConvexityReport witness_one(const ScenarioConfig& cfg, std::uint64_t seed, int index, bool migration) {
    auto rng = make_rng(seed, {7, static_cast<std::uint64_t>(index)});
    auto state = make_scenario(cfg, rng);
    state.association = nearest_feasible(state, cfg).association;
    Association now = state.association;
    if (migration) {
        std::vector<int> pick(static_cast<std::size_t>(cfg.num_users));
        for (auto& k : pick) k = std::uniform_int_distribution<int>(0, cfg.num_servers - 1)(rng);
        now = Association(pick, cfg.num_servers);
    }
    const auto prob = AllocProblem::from_state(state, cfg, now);
    const int U = prob.num_users();
    ConvexityReport r;
    r.instances = 1;
    std::vector<double> a(static_cast<std::size_t>(U)), b(a), mid(a);
    for (int k = 0; k < kMidpointPairs; ++k) {
        for (int u = 0; u < U; ++u) {
            const auto i = static_cast<std::size_t>(u);
            a[i] = uniform(rng, 0.0, 1.0);
            b[i] = uniform(rng, 0.0, 1.0);
            mid[i] = 0.5 * (a[i] + b[i]);
        }
        const double fa = neg_objective(prob, a), fb = neg_objective(prob, b), fm = neg_objective(prob, mid);
        const double gap = fm - 0.5 * (fa + fb);
        r.worst_midpoint_gap = std::max(r.worst_midpoint_gap, gap);
        if (gap > kMidpointTol) ++r.midpoint_violations;
    }
    std::vector<std::pair<int, int>> pairs;
    for (int u = 0; u < U; ++u)
        for (int v = u + 1; v < U; ++v)
            if (prob.server[static_cast<std::size_t>(u)] == prob.server[static_cast<std::size_t>(v)]) pairs.emplace_back(u, v);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    if (pairs.size() > kCrossPairs) pairs.resize(kCrossPairs);
    for (auto [u, v] : pairs) {
        std::vector<double> x(static_cast<std::size_t>(U));
        for (auto& g : x) g = uniform(rng, 2 * kCrossStep, 1.0 - 2 * kCrossStep);
        auto at = [&](double du, double dv) {
            auto y = x;
            y[static_cast<std::size_t>(u)] += du;
            y[static_cast<std::size_t>(v)] += dv;
            return neg_objective(prob, y);
        };
        const double h = kCrossStep;
        const double fd = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4 * h * h);
        r.max_cross_partial = std::max(r.max_cross_partial, std::abs(fd));
        ++r.cross_pairs;
    }
    return r;
}

void merge(ConvexityReport& into, const ConvexityReport& r) {
    into.instances += r.instances;
    into.midpoint_violations += r.midpoint_violations;
    into.worst_midpoint_gap = std::max(into.worst_midpoint_gap, r.worst_midpoint_gap);
    into.max_cross_partial = std::max(into.max_cross_partial, r.max_cross_partial);
    into.cross_pairs += r.cross_pairs;
}

}  // namespace

ConvexityReport convexity_witness_serial(const ScenarioConfig& cfg, std::uint64_t seed, int instances, bool migration) {
    ConvexityReport total;
    for (int i = 0; i < instances; ++i) merge(total, witness_one(cfg, seed, i, migration));
    return total;
}

ConvexityReport convexity_witness(const ScenarioConfig& cfg, std::uint64_t seed, int instances, bool migration) {
    std::vector<ConvexityReport> parts(static_cast<std::size_t>(std::max(instances, 0)));
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < instances; ++i) parts[static_cast<std::size_t>(i)] = witness_one(cfg, seed, i, migration);
    ConvexityReport total;
    for (const auto& r : parts) merge(total, r);
    return total;
}

}  // namespace diten
