// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include "diten/alloc.hpp"
#include "diten/fl.hpp"

using namespace diten;

namespace {

AllocProblem oracle_problem(int users) {
    ScenarioConfig cfg;
    cfg.num_users = users;
    cfg.num_servers = 3;
    auto rng = make_rng(5);
    auto state = make_scenario(cfg, rng);
    std::vector<int> now(static_cast<std::size_t>(users));
    for (auto& s : now) s = std::uniform_int_distribution<int>(0, 2)(rng);
    return AllocProblem::from_state(state, cfg, Association(now, 3));
}

void grid_oracle_serial(benchmark::State& st) {
    const auto prob = oracle_problem(static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(brute_force_oracle_serial(prob, 0.02));
}

void grid_oracle_parallel(benchmark::State& st) {
    const auto prob = oracle_problem(static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(brute_force_oracle(prob, 0.02));
}

void bound_suite_serial_kernel(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(bound_suite_serial(1, static_cast<int>(st.range(0)), 50));
}

void bound_suite_parallel_kernel(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(bound_suite(1, static_cast<int>(st.range(0)), 50));
}

void identity_serial(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(aggregation_identity_error_serial(1, static_cast<int>(st.range(0))));
}

void identity_parallel(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(aggregation_identity_error(1, static_cast<int>(st.range(0))));
}

void convexity_serial(benchmark::State& st) {
    const ScenarioConfig cfg;
    for (auto _ : st) benchmark::DoNotOptimize(convexity_witness_serial(cfg, 1, static_cast<int>(st.range(0)), true));
}

void convexity_parallel(benchmark::State& st) {
    const ScenarioConfig cfg;
    for (auto _ : st) benchmark::DoNotOptimize(convexity_witness(cfg, 1, static_cast<int>(st.range(0)), true));
}

}  // namespace

BENCHMARK(grid_oracle_serial)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(grid_oracle_parallel)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(bound_suite_serial_kernel)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(bound_suite_parallel_kernel)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(identity_serial)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(identity_parallel)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(convexity_serial)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(convexity_parallel)->Arg(200)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
