#include <gtest/gtest.h>

#include <set>

#include "faultline/errors.hpp"
#include "faultline/injector.hpp"
#include "faultline/toy_systems.hpp"
#include "test_support.hpp"

namespace faultline::injector {
namespace {

SystemSpec resolve(std::string_view name) { return toy::system_from_name(name); }

class EchoOperator final : public PerturbationOperator {
 public:
  std::string id() const override { return "echo"; }
  PerturbationKind kind() const override { return PerturbationKind::scripted_mutation; }
  std::string corrupt(const PerturbationContext& ctx) override { return ctx.trajectory.steps[ctx.step].action; }
};

std::vector<Trajectory> successes_of(toy::Family f, std::size_t count, std::uint64_t seed) {
  std::vector<Trajectory> out;
  for (const auto& task : toy::generate_tasks(f, count, seed, 0.0)) {
    out.push_back(run(toy::system_from_name(task.system_name), task.query, task.ground_truth, task.task_id));
  }
  return out;
}

TEST(Mutations, NumericCorruptionTouchesTheLastDigit) {
  EXPECT_EQ(corrupt_number("RESULT 42", 0), "RESULT 43");
  EXPECT_EQ(corrupt_number("RESULT 42", 4), "RESULT 47");
  EXPECT_EQ(corrupt_number("RESULT 49", 0), "RESULT 40");
  EXPECT_EQ(corrupt_number("no digits", 3), "no digits");
  for (std::uint64_t s = 0; s < 50; ++s) EXPECT_NE(corrupt_number("x 5", s), "x 5");
}

TEST(Mutations, OperandSwap) {
  EXPECT_EQ(swap_operands("PLAN sub 50 8"), "PLAN sub 8 50");
  EXPECT_EQ(swap_operands("PLAN add 7 7"), "PLAN add 7 7");
  EXPECT_EQ(swap_operands("PLAN sum KEYS apple,fig"), "PLAN sum KEYS fig,apple");
  EXPECT_EQ(swap_operands("ROUTE reverse,upper VALUE hello"), "ROUTE upper,reverse VALUE hello");
}

TEST(Mutations, InstructionNegation) {
  EXPECT_EQ(negate_instruction("PLAN add 17 25"), "PLAN sub 17 25");
  EXPECT_EQ(negate_instruction("PLAN max KEYS fig"), "PLAN sum KEYS fig");
  EXPECT_EQ(negate_instruction("ROUTE reverse,upper VALUE hi"), "ROUTE upper,upper VALUE hi");
  EXPECT_EQ(negate_instruction("FINAL 42"), "NOT FINAL 42");
}

TEST(Mutations, Truncation) {
  EXPECT_EQ(truncate_content("FINAL 42"), "FINA");
  EXPECT_EQ(truncate_content("x"), "x");
}

TEST(Mutations, ParseNames) {
  EXPECT_EQ(parse_mutation("operand_swap"), Mutation::operand_swap);
  EXPECT_EQ(parse_mutation("any"), Mutation::any);
  EXPECT_THROW(parse_mutation("shuffle"), config_error);
  EXPECT_EQ(ScriptedMutation(Mutation::truncation).id(), "scripted:truncation");
}

TEST(Sampling, DistinctInRangeAndSeeded) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto pts = sample_points(7, 3, seed);
    ASSERT_EQ(pts.size(), 3u);
    EXPECT_EQ(std::set<std::size_t>(pts.begin(), pts.end()).size(), 3u);
    for (std::size_t p : pts) EXPECT_LT(p, 7u);
    EXPECT_EQ(pts, sample_points(7, 3, seed));
  }
  EXPECT_EQ(sample_points(4, 4, 9).size(), 4u);
  EXPECT_THROW(sample_points(2, 3, 0), precondition_error);
}

TEST(Inject, KMustFitTheTrajectory) {
  const Trajectory t = testing::run_toy("arithmetic", "17+25", "42");
  ScriptedMutation op;
  EXPECT_THROW(inject(resolve(t.system_name), t, op, 0), precondition_error);
  EXPECT_THROW(inject(resolve(t.system_name), t, op, 4), precondition_error);
  const Trajectory bad = testing::run_toy("arithmetic+solver_drops_carry", "17+25", "42");
  EXPECT_THROW(inject(resolve(bad.system_name), bad, op), precondition_error);
}

TEST(Inject, LabelIsTheCorruptedStepByConstruction) {
  const Trajectory t = testing::run_toy("arithmetic", "17+25", "42");
  ScriptedMutation op(Mutation::numeric_corruption);
  const auto report = inject(resolve(t.system_name), t, op, 3, 5);
  ASSERT_TRUE(report.result);
  const auto& r = *report.result;
  EXPECT_EQ(r.trajectory.outcome, Outcome::failure);
  EXPECT_EQ(r.annotation.method, AnnotationMethod::injected);
  EXPECT_EQ(r.trajectory.steps[r.annotation.step].action, *r.annotation.corrupted_action);
  EXPECT_EQ(r.annotation.agent, t.steps[r.annotation.step].agent);
  for (std::size_t i = 0; i < r.annotation.step; ++i) EXPECT_EQ(r.trajectory.steps[i], t.steps[i]);
  EXPECT_EQ(report.attempts.back().step, r.annotation.step);
  EXPECT_TRUE(validate(r).empty());
}

TEST(Inject, RobustSystemYieldsNoPositive) {
  const Trajectory t = testing::run_toy("majority_vote", "17+25", "42");
  ASSERT_EQ(t.outcome, Outcome::success);
  ScriptedMutation op;
  const auto report = inject(resolve(t.system_name), t, op, 3, 1);
  EXPECT_FALSE(report.result);
  EXPECT_EQ(report.attempts.size(), 3u);
  for (const auto& a : report.attempts) EXPECT_EQ(a.replay_outcome, Outcome::success);
}

TEST(Inject, UnchangedCorruptionBreaksTheContract) {
  const Trajectory t = testing::run_toy("arithmetic", "17+25", "42");
  EchoOperator echo;
  EXPECT_THROW(inject(resolve(t.system_name), t, echo), contract_error);
}

TEST(Inject, DeterministicGivenSeed) {
  const Trajectory t = testing::run_toy("lookup_chain", "sum: apple, fig, kiwi", "43");
  ScriptedMutation op;
  const auto a = inject(resolve(t.system_name), t, op, 3, 77);
  const auto b = inject(resolve(t.system_name), t, op, 3, 77);
  EXPECT_EQ(a.sampled_points, b.sampled_points);
  EXPECT_EQ(a.result, b.result);
}

TEST(PositiveSet, MostSuccessesYieldAPositive) {
  auto batch = successes_of(toy::Family::arithmetic, 10, 4);
  auto more = successes_of(toy::Family::lookup_chain, 10, 4);
  batch.insert(batch.end(), more.begin(), more.end());
  ScriptedMutation op;
  const auto set = build_positive_set(resolve, batch, op, 3, 0, 3);
  EXPECT_GE(set.annotated.size(), 15u);
  EXPECT_EQ(set.annotated.size() + set.barren.size() + set.failures.size(), batch.size());
  for (const auto& a : set.annotated) EXPECT_TRUE(validate(a).empty());
}

TEST(PositiveSet, ErrorsAreIsolatedPerItem) {
  auto batch = successes_of(toy::Family::arithmetic, 3, 2);
  batch[1].system_name = "arithmetic+no_such_bug";
  ScriptedMutation op;
  const auto set = build_positive_set(resolve, batch, op);
  ASSERT_EQ(set.failures.size(), 1u);
  EXPECT_EQ(set.failures[0].task_id, batch[1].task_id);
  EXPECT_EQ(set.annotated.size() + set.barren.size(), 2u);
}

}  // namespace
}  // namespace faultline::injector
