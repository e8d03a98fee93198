// One PASS/FAIL line per acceptance criterion; exit status is the number of failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "faultline/annotator.hpp"
#include "faultline/evaluator.hpp"
#include "faultline/injector.hpp"
#include "faultline/reward.hpp"
#include "faultline/toy_systems.hpp"
#include "test_support.hpp"

namespace {

using namespace faultline;
using nlohmann::json;

struct Verdict {
  bool ok = true;
  std::string detail;
};

int report(const std::string& name, const Verdict& v) {
  std::cout << (v.ok ? "PASS " : "FAIL ") << name << ": " << v.detail << std::endl;
  return v.ok ? 0 : 1;
}

std::vector<Trajectory> collect(std::size_t per_family, std::uint64_t seed, double bug_rate, Outcome keep) {
  std::vector<Trajectory> out;
  for (toy::Family f : toy::workload_families()) {
    for (const auto& task : toy::generate_tasks(f, per_family, seed, bug_rate)) {
      Trajectory t = run(toy::system_from_name(task.system_name), task.query, task.ground_truth, task.task_id);
      if (t.outcome == keep) out.push_back(std::move(t));
    }
  }
  return out;
}

Verdict decisive_soundness() {
  const auto start = std::chrono::steady_clock::now();
  const auto failures = collect(150, 20260101, 0.35, Outcome::failure);
  annotator::OracleAnalyzer oracle([](std::string_view n) { return toy::reference_for(n); });
  std::size_t annotatable = 0;
  std::size_t agree = 0;
  std::size_t mismatched = 0;
  for (const Trajectory& t : failures) {
    const SystemSpec sys = toy::system_from_name(t.system_name);
    const auto expected = brute_force_decisive(sys, t, oracle_fixes(toy::reference_for(t.system_name), t));
    const auto got = annotator::annotate_failure(sys, t, oracle).result;
    if (expected) {
      ++annotatable;
      if (got && got->agent == expected->agent && got->step == expected->step) {
        ++agree;
      } else {
        ++mismatched;
      }
    } else if (got) {
      ++mismatched;
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ostringstream d;
  d << failures.size() << " failures, " << annotatable << " annotatable, " << agree << " agree, " << mismatched
    << " mismatched, " << secs << " s";
  return {failures.size() >= 200 && mismatched == 0 && agree == annotatable && secs < 300.0, d.str()};
}

Verdict injection_validity() {
  const auto successes = collect(100, 20260202, 0.0, Outcome::success);
  injector::ScriptedMutation op;
  std::size_t injected = 0;
  std::size_t invalid = 0;
  for (const Trajectory& t : successes) {
    const SystemSpec sys = toy::system_from_name(t.system_name);
    const auto rep = injector::inject(sys, t, op, injector::kDefaultInjectionPoints, 99);
    if (!rep.result) continue;
    ++injected;
    const auto& r = *rep.result;
    const bool omega_zero = !sys.evaluator(r.trajectory.final_answer, r.trajectory.ground_truth) &&
                            r.trajectory.outcome == Outcome::failure;
    const Trajectory again = rectify(sys, t, {r.annotation.step, *r.annotation.corrupted_action});
    const bool label_ok = r.annotation.step == rep.attempts.back().step &&
                          r.trajectory.steps[r.annotation.step].action == *r.annotation.corrupted_action &&
                          r.annotation.agent == t.steps[r.annotation.step].agent && again == r.trajectory;
    if (!omega_zero || !label_ok || !validate(r).empty()) ++invalid;
  }
  std::ostringstream d;
  d << successes.size() << " successes, " << injected << " injected, " << invalid << " invalid";
  return {injected >= 200 && invalid == 0, d.str()};
}

Verdict reward_conformance() {
  std::ifstream in(testing::fixture("reward_cases.jsonl"));
  std::size_t n = 0;
  std::size_t bad = 0;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    const json row = json::parse(line);
    ++n;
    const reward::RewardParams p{row["lambda"].get<double>(), row["sigma"].get<double>()};
    const auto r = reward::score(reward::parse_output(row["raw_text"].get<std::string>()),
                                 AgentId{reward::kNoIndex, row["truth_agent"].get<std::string>()},
                                 row["truth_step"].get<std::size_t>(), p);
    const double got[] = {r.format, r.agent, r.step, r.total};
    const char* keys[] = {"format", "agent", "step", "total"};
    for (int i = 0; i < 4; ++i) {
      const double want = row["expected"][keys[i]].get<double>();
      if (std::abs(got[i] - want) > 1e-9 * std::max(1.0, std::abs(want))) ++bad;
    }
  }
  const auto off = reward::score(reward::parse_output(reward::format_answer("Solver", 2)), AgentId{1, "Solver"}, 1);
  const bool anchors = std::abs(off.step - 0.6065306597) < 1e-10 && std::abs(off.total - 0.8032653299) < 1e-10;
  std::ostringstream d;
  d.precision(12);
  d << n << " cases, " << bad << " mismatching fields, off-by-one step " << off.step << " total " << off.total;
  return {n == 50 && bad == 0 && anchors, d.str()};
}

Verdict schedule_conformance() {
  std::size_t bad = 0;
  for (double b0 : {0.1, 0.2, 0.3}) {
    const std::size_t total = 1000;
    const reward::ClipSchedule s{b0, total};
    for (std::size_t step : {std::size_t{0}, total / 2, total * 8 / 10, total}) {
      const double want = std::max(0.2 * b0, b0 * (1.0 - static_cast<double>(step) / static_cast<double>(total)));
      if (reward::clip_bound(s, step) != want) ++bad;
    }
    for (std::size_t step = 0; step < total; ++step) {
      if (reward::clip_bound(s, step + 1) > reward::clip_bound(s, step)) ++bad;
    }
  }
  return {bad == 0, std::to_string(bad) + " violations over 3 schedules"};
}

Verdict advantage_properties() {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t bad = 0;
  for (int g = 0; g < 1000; ++g) {
    const std::size_t n = 2 + rng() % 15;
    std::vector<double> r(n);
    if (g % 10 == 0) {
      std::fill(r.begin(), r.end(), unit(rng));
      for (double a : reward::advantages(r)) bad += (a != 0.0);
      continue;
    }
    for (double& x : r) x = std::round(unit(rng) * 4.0) / 4.0;
    if (std::all_of(r.begin(), r.end(), [&](double x) { return x == r[0]; })) r[0] = r[0] == 0.0 ? 1.0 : 0.0;
    const auto a = reward::advantages(r);
    const double mean = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
    if (std::abs(mean) > 1e-9) ++bad;
    const double c = 0.1 + 10.0 * unit(rng);
    std::vector<double> scaled(r);
    for (double& x : scaled) x *= c;
    const auto b = reward::advantages(scaled);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if ((a[i] < a[j]) != (b[i] < b[j])) ++bad;
      }
    }
  }
  return {bad == 0, std::to_string(bad) + " violations over 1000 groups"};
}

Verdict replay_properties() {
  std::mt19937_64 rng(77);
  std::vector<toy::ToyTask> tasks;
  for (toy::Family f : toy::workload_families()) {
    for (auto& t : toy::generate_tasks(f, 60, 5)) tasks.push_back(std::move(t));
  }
  std::size_t bad = 0;
  const char* noise[] = {"FINAL 0", "RESULT 7", "GET kiwi", "VALUE zz", "ROUTE shift VALUE q", "PLAN mul 2 3", "??"};
  for (int call = 0; call < 1000; ++call) {
    const auto& task = tasks[rng() % tasks.size()];
    const SystemSpec sys = toy::system_from_name(task.system_name);
    const Trajectory t = run(sys, task.query, task.ground_truth, task.task_id);
    const std::size_t pivot = rng() % t.steps.size();
    if (call % 2 == 0) {
      if (!(rectify(sys, t, {pivot, t.steps[pivot].action}) == t)) ++bad;
    } else {
      const Trajectory r = rectify(sys, t, {pivot, noise[rng() % std::size(noise)]});
      if (r.steps.size() <= pivot) {
        ++bad;
        continue;
      }
      for (std::size_t i = 0; i < pivot; ++i) bad += !(r.steps[i] == t.steps[i]);
      bad += !(r.steps[pivot].agent == t.steps[pivot].agent);
    }
  }
  return {bad == 0, std::to_string(bad) + " violations over 1000 rectify calls"};
}

Verdict metric_closure() {
  std::vector<AnnotatedTrajectory> items;
  {
    const auto failures = collect(60, 31, 0.35, Outcome::failure);
    annotator::OracleAnalyzer oracle([](std::string_view n) { return toy::reference_for(n); });
    const auto set = annotator::build_negative_set([](std::string_view n) { return toy::system_from_name(n); },
                                                   failures, oracle);
    items = set.annotated;
  }
  std::vector<Annotation> truths;
  for (const auto& it : items) truths.push_back(it.annotation);

  auto score_with = [&](evaluator::AttributorBackend& b) {
    const auto batch = evaluator::judge_batch(b, items, {true});
    std::vector<reward::CandidateOutput> preds;
    for (const auto& o : batch.outputs) preds.push_back(o.value_or(reward::CandidateOutput{}));
    return evaluator::evaluate(preds, truths);
  };
  evaluator::OracleAttributor oracle;
  evaluator::ScrambledStepAttributor scrambled;
  const auto o = score_with(oracle);
  const auto s = score_with(scrambled);

  // the scramble lands on the true step only when the agent has a single turn
  std::size_t collisions = 0;
  for (const auto& it : items) {
    std::size_t turns = 0;
    for (const Step& st : it.trajectory.steps) turns += (st.agent.name == it.annotation.agent.name);
    collisions += (turns == 1);
  }
  const double expected = static_cast<double>(collisions) / static_cast<double>(items.size());
  std::ostringstream d;
  d << items.size() << " items, oracle (" << o.agent_accuracy << ", " << o.step_accuracy << "), scrambled ("
    << s.agent_accuracy << ", " << s.step_accuracy << ") vs enumerated step " << expected;
  return {!items.empty() && o.agent_accuracy == 1.0 && o.step_accuracy == 1.0 && s.agent_accuracy == 1.0 &&
              s.step_accuracy == expected && expected < 1.0,
          d.str()};
}

int sh(const std::string& cmd) {
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// Every output file of one pipeline run, with timestamps dropped.
std::vector<std::string> pipeline_run(const std::filesystem::path& dir, std::string& error) {
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const std::string cli = std::string(FAULTLINE_CLI_PATH) + " --log-level off ";
  const std::string d = dir.string() + "/";
  const std::vector<std::string> steps = {
      "gen-tasks --count 120 --seed 9 --out " + d + "tasks.jsonl",
      "collect --tasks " + d + "tasks.jsonl --out " + d + "traj.jsonl",
      "annotate --in " + d + "traj.jsonl --out " + d + "neg.jsonl --backend scripted-oracle --workers 4",
      "inject --in " + d + "traj.jsonl --out " + d + "pos.jsonl --seed 9 --workers 4",
      "split --in " + d + "neg.jsonl --train " + d + "train.jsonl --test " + d + "test.jsonl --seed 9",
      "judge --in " + d + "test.jsonl --out " + d + "pred.jsonl --backend scrambled-step --with-gt",
      "evaluate --in " + d + "test.jsonl --predictions " + d + "pred.jsonl --out " + d + "eval.json",
  };
  for (const auto& s : steps) {
    if (const int rc = sh(cli + s + " > " + d + "stdout.log 2> " + d + "stderr.log"); rc != 0) {
      error = "'" + s.substr(0, s.find(' ')) + "' exited " + std::to_string(rc);
      return {};
    }
  }
  std::vector<std::string> out;
  for (const char* f : {"tasks.jsonl", "traj.jsonl", "neg.jsonl", "pos.jsonl", "train.jsonl", "test.jsonl",
                        "pred.jsonl", "eval.json"}) {
    std::ifstream in(dir / f);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string canon;
    if (std::string(f).ends_with(".json")) {
      canon = ss.str();
    } else {
      std::istringstream lines(ss.str());
      for (std::string line; std::getline(lines, line);) {
        json j = json::parse(line);
        if (j.contains("provenance")) j["provenance"].erase("timestamps");
        canon += j.dump() + "\n";
      }
    }
    out.push_back(f + std::string(":") + canon);
  }
  return out;
}

Verdict end_to_end() {
  const auto root = std::filesystem::temp_directory_path() / ("faultline-acceptance-" + std::to_string(::getpid()));
  std::string err1;
  std::string err2;
  const auto a = pipeline_run(root / "a", err1);
  const auto b = pipeline_run(root / "b", err2);
  std::filesystem::remove_all(root);
  if (!err1.empty() || !err2.empty()) return {false, err1.empty() ? err2 : err1};
  const bool same = a == b;
  const std::string eval = a.back().substr(a.back().find(':') + 1);
  const json r = json::parse(eval);
  std::ostringstream d;
  d << "exit 0 for every stage, runs " << (same ? "identical" : "differ") << ", eval n=" << r["n"]
    << " agent=" << r["agent_accuracy"] << " step=" << r["step_accuracy"];
  return {same && r["n"].get<int>() > 0, d.str()};
}

}  // namespace

int main() {
  int failed = 0;
  failed += report("decisive-error soundness", decisive_soundness());
  failed += report("injection label validity", injection_validity());
  failed += report("reward conformance", reward_conformance());
  failed += report("schedule conformance", schedule_conformance());
  failed += report("advantage properties", advantage_properties());
  failed += report("replay properties", replay_properties());
  failed += report("metric harness closure", metric_closure());
  failed += report("end-to-end pipeline", end_to_end());
  return failed;
}
