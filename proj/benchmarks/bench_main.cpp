#include <benchmark/benchmark.h>

#include "gepower/lp.hpp"
#include "gepower/sim.hpp"
#include "gepower/solver.hpp"

using namespace gepower;

namespace {

ProblemSpec fig3() {
    ProblemSpec s;
    s.channel = {0.1, 0.9};
    s.schedule.rewards = {3.0, 2.0, 1.78};
    s.schedule.penalties = {1.5, 1.0, 0.89};
    s.beta = 0.9;
    return s;
}

void BM_BellmanBackup(benchmark::State& state) {
    const auto s = fig3();
    const auto g = build_grid(s, static_cast<std::size_t>(state.range(0)));
    const TransitionKernel kernel(s, g);
    ValueFunction v{g, std::vector<double>(g.size(), 1.0)};
    for (auto _ : state) benchmark::DoNotOptimize(bellman_backup(kernel, v));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.size()));
}
BENCHMARK(BM_BellmanBackup)->Arg(11)->Arg(21)->Arg(41)->Unit(benchmark::kMillisecond);

void BM_ValueIterate(benchmark::State& state) {
    const auto s = fig3();
    const auto g = build_grid(s, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(value_iterate(s, g, 1e-6));
}
BENCHMARK(BM_ValueIterate)->Arg(11)->Arg(21)->Unit(benchmark::kMillisecond);

void BM_SolveLp(benchmark::State& state) {
    const auto s = fig3();
    const auto lp = build_lp(s, build_grid(s, static_cast<std::size_t>(state.range(0))));
    for (auto _ : state) benchmark::DoNotOptimize(solve_lp(lp));
}
BENCHMARK(BM_SolveLp)->Arg(7)->Arg(11)->Unit(benchmark::kMillisecond)->Iterations(1);

void BM_Episodes(benchmark::State& state) {
    const auto s = fig3();
    const auto v = value_iterate(s, build_grid(s, 21), 1e-6).value;
    const auto policy = grid_policy(extract_policy(s, v));
    const Belief p0{0.5, 0.5, 0.5};
    const auto episodes = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(evaluate_policy(s, policy, p0, episodes, 200, 1));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Episodes)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
