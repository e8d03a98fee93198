#include <gtest/gtest.h>

#include <random>

#include "faultline/errors.hpp"
#include "faultline/harness.hpp"
#include "faultline/toy_systems.hpp"
#include "test_support.hpp"

namespace faultline {
namespace {

// One agent, one turn: answers "FINAL wrong" unless told otherwise.
SystemSpec single_step_system() {
  SystemSpec s;
  s.name = "single";
  s.roster = {{AgentId{0, "Echo"}, [](const PolicyContext&) { return std::string("FINAL wrong"); }}};
  s.scheduler = [](std::size_t, std::span<const Step>, std::string_view) { return std::size_t{0}; };
  s.stop = [](std::span<const Step> h) { return !h.empty(); };
  s.answer = [](std::span<const Step> h) { return h.back().action.substr(6); };
  s.evaluator = [](std::string_view a, const std::optional<std::string>& g) { return g && a == *g; };
  return s;
}

TEST(Run, EmptyQueryIsRejected) {
  EXPECT_THROW(run(toy::system_from_name("arithmetic"), "", "42"), precondition_error);
}

TEST(Run, InvalidSystemIsRejected) {
  SystemSpec s = single_step_system();
  s.stop = nullptr;
  EXPECT_THROW(run(s, "q", std::nullopt), precondition_error);
}

TEST(Run, DeterministicForScriptedPolicies) {
  const auto sys = toy::system_from_name("lookup_chain+calculator_wrong_op");
  EXPECT_EQ(run(sys, "sum: kiwi, date, fig", "51"), run(sys, "sum: kiwi, date, fig", "51"));
}

TEST(Run, DefaultTaskIdHashesTheQuery) {
  const Trajectory t = run(toy::system_from_name("arithmetic"), "1+1", "2");
  EXPECT_EQ(t.task_id.rfind("arithmetic/", 0), 0u);
  EXPECT_EQ(t.task_id.size(), std::string("arithmetic/").size() + 16);
}

TEST(Run, BudgetExhaustionTruncatesAndFails) {
  SystemSpec s = single_step_system();
  s.stop = [](std::span<const Step>) { return false; };
  s.max_steps = 5;
  const Trajectory t = run(s, "q", "wrong");
  EXPECT_EQ(t.steps.size(), 5u);
  EXPECT_EQ(t.outcome, Outcome::failure);
  ASSERT_TRUE(t.feedback_log);
  EXPECT_EQ(t.feedback_log->rfind(kBudgetExhausted, 0), 0u);
  EXPECT_TRUE(validate_trajectory(t).empty());
}

TEST(Run, SchedulerMustReturnARosterMember) {
  SystemSpec s = single_step_system();
  s.scheduler = [](std::size_t, std::span<const Step>, std::string_view) { return std::size_t{3}; };
  EXPECT_THROW(run(s, "q", std::nullopt), contract_error);
}

TEST(Run, EmptyActionBreaksThePolicyContract) {
  SystemSpec s = single_step_system();
  s.roster[0].policy = [](const PolicyContext&) { return std::string(); };
  EXPECT_THROW(run(s, "q", std::nullopt), contract_error);
}

TEST(Rectify, CorrectedSolverFlipsTheCarryBug) {
  const auto sys = toy::system_from_name("arithmetic+solver_drops_carry");
  const Trajectory bad = run(sys, "17+25", "42");
  const Trajectory fixed = rectify(sys, bad, {1, "42"});
  EXPECT_EQ(fixed.outcome, Outcome::success);
  EXPECT_EQ(fixed.steps[1].action, "42");
  EXPECT_EQ(fixed.steps[1].agent.name, "Solver");
  EXPECT_EQ(fixed.steps[2].action, "FINAL 42");
}

TEST(Rectify, DownstreamAgentsSeeTheSubstitutedAction) {
  const auto sys = toy::system_from_name("arithmetic");
  const Trajectory ok = run(sys, "17+25", "42");
  const Trajectory r = rectify(sys, ok, {0, "PLAN mul 6 7"});
  EXPECT_EQ(r.steps[1].action, "RESULT 42");
  EXPECT_EQ(r.outcome, Outcome::success);
  EXPECT_EQ(rectify(sys, ok, {0, "PLAN add 1 2"}).final_answer, "3");
}

TEST(Rectify, NewRouteReshapesTheSchedule) {
  const auto sys = toy::system_from_name("string_relay+dispatcher_drops_last_op");
  const Trajectory bad = run(sys, "ops=reverse,upper; text=hello", "OLLEH");
  ASSERT_EQ(bad.steps.size(), 3u);
  const Trajectory r = rectify(sys, bad, {0, "ROUTE reverse,upper VALUE hello"});
  EXPECT_EQ(r.steps.size(), 4u);
  EXPECT_EQ(r.outcome, Outcome::success);
}

TEST(Rectify, PrefixFeedbackIsReusedAndPivotFeedbackRegenerated) {
  const auto sys = toy::system_from_name("lookup_chain");
  Trajectory src = run(sys, "sum: apple, fig", "20");
  src.steps[1].feedback = "apple=4";
  const Trajectory r = rectify(sys, src, {2, "GET banana"});
  EXPECT_EQ(r.steps[1].feedback, "apple=4");
  EXPECT_EQ(r.steps[2].feedback, "banana=5");
  EXPECT_EQ(r.final_answer, "9");  // 4 from the reused feedback, 5 fresh
}

TEST(Rectify, PivotPastTheEndIsARangeError) {
  const auto sys = toy::system_from_name("arithmetic");
  const Trajectory t = run(sys, "1+2", "3");
  EXPECT_THROW(rectify(sys, t, {t.steps.size(), "x"}), std::out_of_range);
}

TEST(Rectify, IdentityReplacementIsAFixedPoint) {
  for (const char* name : {"arithmetic+solver_off_by_one", "string_relay+upcaser_half", "lookup_chain+retriever_wrong_key"}) {
    const auto sys = toy::system_from_name(name);
    const auto tasks = toy::generate_tasks(toy::parse_system_name(name).family, 5, 2);
    for (const auto& task : tasks) {
      const Trajectory t = run(sys, task.query, task.ground_truth, task.task_id);
      for (std::size_t i = 0; i < t.steps.size(); ++i) EXPECT_EQ(rectify(sys, t, {i, t.steps[i].action}), t);
    }
  }
}

TEST(Rectify, PrefixIsPreservedUnderArbitraryReplacements) {
  std::mt19937_64 rng(5);
  const auto tasks = toy::generate_tasks(toy::Family::lookup_chain, 20, 9);
  for (const auto& task : tasks) {
    const auto sys = toy::system_from_name(task.system_name);
    const Trajectory t = run(sys, task.query, task.ground_truth, task.task_id);
    const std::size_t pivot = rng() % t.steps.size();
    const Trajectory r = rectify(sys, t, {pivot, "noise " + std::to_string(rng() % 100)});
    ASSERT_GT(r.steps.size(), pivot);
    for (std::size_t i = 0; i < pivot; ++i) EXPECT_EQ(r.steps[i], t.steps[i]);
    EXPECT_TRUE(validate_trajectory(r).empty());
  }
}

TEST(BruteForce, CarryBugIsTheSolversFault) {
  const auto sys = toy::system_from_name("arithmetic+solver_drops_carry");
  const Trajectory bad = run(sys, "17+25", "42");
  const auto fixes = oracle_fixes(toy::reference_for(sys.name), bad);
  EXPECT_EQ(fixes.at(1), "RESULT 42");
  const auto d = brute_force_decisive(sys, bad, fixes);
  ASSERT_TRUE(d);
  EXPECT_EQ(d->agent.name, "Solver");
  EXPECT_EQ(d->step, 1u);
}

TEST(BruteForce, EarliestOfSeveralFlippingSteps) {
  // the planner's misread is decisive even though the verifier could also mask it
  const auto sys = toy::system_from_name("arithmetic+planner_misreads_op");
  const Trajectory bad = run(sys, "17+25", "42");
  std::map<std::size_t, std::string> fixes = oracle_fixes(toy::reference_for(sys.name), bad);
  fixes[2] = "FINAL 42";
  const auto all = decisive_candidates(sys, bad, fixes);
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(brute_force_decisive(sys, bad, fixes)->step, 0u);
}

TEST(BruteForce, UnfixableFailureHasNoDecisiveStep) {
  const auto sys = toy::system_from_name("majority_vote+a_drops_carry+b_drops_carry+c_drops_carry");
  const Trajectory bad = run(sys, "17+25", "42");
  ASSERT_EQ(bad.outcome, Outcome::failure);
  EXPECT_FALSE(brute_force_decisive(sys, bad, oracle_fixes(toy::reference_for(sys.name), bad)));
}

TEST(BruteForce, SingleStepTrajectory) {
  const SystemSpec s = single_step_system();
  const Trajectory bad = run(s, "q", "right");
  const auto d = brute_force_decisive(s, bad, {{0, "FINAL right"}});
  ASSERT_TRUE(d);
  EXPECT_EQ(d->agent, (AgentId{0, "Echo"}));
  EXPECT_EQ(d->step, 0u);
}

TEST(BruteForce, NeedsAFixForEveryStepAndAFailure) {
  const auto sys = toy::system_from_name("arithmetic+solver_drops_carry");
  const Trajectory bad = run(sys, "17+25", "42");
  EXPECT_THROW(brute_force_decisive(sys, bad, {{0, "PLAN add 17 25"}}), precondition_error);
  const Trajectory good = run(toy::system_from_name("arithmetic"), "17+25", "42");
  EXPECT_THROW(brute_force_decisive(sys, good, {}), precondition_error);
}

TEST(Seeds, MixAndHashAreStable) {
  EXPECT_EQ(fnv1a64(""), 1469598103934665603ULL);
  EXPECT_NE(mix_seed(1, 2), mix_seed(2, 1));
  EXPECT_EQ(mix_seed(7, 3), mix_seed(7, 3));
}

}  // namespace
}  // namespace faultline
