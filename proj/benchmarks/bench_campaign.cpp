#include <benchmark/benchmark.h>

#include "rtc/error.hpp"
#include "rtc/instruction.hpp"
#include "rtc/service/config.hpp"
#include "rtc/service/simulate.hpp"

using namespace rtc;

static void BM_IssueInstructions(benchmark::State& state) {
  const ContentPolicy policy = load_policy(default_policy_yaml());
  const ParameterSpace space(std::vector<Rule>(policy.rules().begin(), policy.rules().end()), default_use_cases(),
                             enumerate_targets(default_axes(), default_pairing()), TopicSource::free_text, {});
  const auto roster = synthetic_roster();
  for (auto _ : state) {
    QuotaState quota(space, 4);
    std::uint64_t issued = 0;
    for (std::size_t i = 0; i < static_cast<std::size_t>(state.range(0)); ++i) {
      try {
        next_instruction(space, quota, roster[i % roster.size()], i);
        ++issued;
      } catch (const Error&) {
      }
    }
    benchmark::DoNotOptimize(issued);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_IssueInstructions)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_SimulateCampaign(benchmark::State& state) {
  SimulationOptions options;
  options.dialogues = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_simulation(options).invariants.dialogues);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulateCampaign)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
