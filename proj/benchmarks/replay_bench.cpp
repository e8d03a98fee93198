#include <benchmark/benchmark.h>

#include "faultline/annotator.hpp"
#include "faultline/injector.hpp"
#include "faultline/toy_systems.hpp"

namespace {

using namespace faultline;

void BM_run_lookup_chain(benchmark::State& state) {
  const SystemSpec sys = toy::system_from_name("lookup_chain");
  for (auto _ : state) benchmark::DoNotOptimize(run(sys, "sum: apple, fig, kiwi, lemon", "72"));
}
BENCHMARK(BM_run_lookup_chain);

void BM_rectify(benchmark::State& state) {
  const SystemSpec sys = toy::system_from_name("lookup_chain+retriever_wrong_key");
  const Trajectory t = run(sys, "sum: apple, fig, kiwi, lemon", "72");
  for (auto _ : state) benchmark::DoNotOptimize(rectify(sys, t, {2, "GET fig"}));
}
BENCHMARK(BM_rectify);

void BM_annotate_failure(benchmark::State& state) {
  const SystemSpec sys = toy::system_from_name("lookup_chain+reporter_rounds");
  const Trajectory t = run(sys, "sum: apple, fig, kiwi, lemon", "72");
  annotator::OracleAnalyzer oracle([](std::string_view n) { return toy::reference_for(n); });
  for (auto _ : state) benchmark::DoNotOptimize(annotator::annotate_failure(sys, t, oracle));
}
BENCHMARK(BM_annotate_failure);

void BM_inject(benchmark::State& state) {
  const SystemSpec sys = toy::system_from_name("arithmetic");
  const Trajectory t = run(sys, "17+25", "42");
  injector::ScriptedMutation op;
  for (auto _ : state) benchmark::DoNotOptimize(injector::inject(sys, t, op, 3, 1));
}
BENCHMARK(BM_inject);

}  // namespace
