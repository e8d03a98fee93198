#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "faultline/reward.hpp"

namespace {

using namespace faultline;

void BM_parse_output(benchmark::State& state) {
  const std::string raw = reward::format_answer("WebSurfer", 12, std::string(state.range(0), 'r'));
  for (auto _ : state) benchmark::DoNotOptimize(reward::parse_output(raw));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * raw.size()));
}
BENCHMARK(BM_parse_output)->Arg(64)->Arg(4096);

void BM_score(benchmark::State& state) {
  const auto candidate = reward::parse_output(reward::format_answer("Solver", 3, "because"));
  const AgentId truth{1, "Solver"};
  for (auto _ : state) benchmark::DoNotOptimize(reward::score(candidate, truth, 4));
}
BENCHMARK(BM_score);

void BM_handle_score_line(benchmark::State& state) {
  const std::string line =
      R"({"raw_text":"<think>x</think><answer>Solver | 2</answer>","truth_agent":"Solver","truth_step":1})";
  for (auto _ : state) benchmark::DoNotOptimize(reward::handle_score_line(line));
}
BENCHMARK(BM_handle_score_line);

void BM_advantages(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> r(static_cast<std::size_t>(state.range(0)));
  for (double& x : r) x = unit(rng);
  for (auto _ : state) benchmark::DoNotOptimize(reward::advantages(r));
}
BENCHMARK(BM_advantages)->Arg(8)->Arg(64);

}  // namespace
