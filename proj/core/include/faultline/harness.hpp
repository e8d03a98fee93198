#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "faultline/trajectory.hpp"

namespace faultline {

// What a policy sees when it is asked to act.
struct PolicyContext {
  std::string_view query;
  std::span<const Step> visible;  // H_t as filtered by the system's visibility rule
  std::optional<std::string_view> pending_feedback;  // feedback of the immediately preceding step
  std::size_t step = 0;
  std::uint64_t seed = 0;  // per-step, derived from SystemSpec::seed
};

// Scripted policies must be pure functions of the context.
using AgentPolicy = std::function<std::string(const PolicyContext&)>;

struct RosterEntry {
  AgentId id;
  AgentPolicy policy;
};

using Scheduler = std::function<std::size_t(std::size_t step, std::span<const Step> history,
                                            std::string_view query)>;
using StopRule = std::function<bool(std::span<const Step> history)>;
using VisibilityRule = std::function<std::vector<Step>(std::span<const Step> history, const AgentId& actor)>;
using Transition = std::function<std::optional<std::string>(const Step& acted, std::span<const Step> prior,
                                                            std::string_view query)>;
using AnswerRule = std::function<std::string(std::span<const Step> history)>;
using OutcomeRule = std::function<bool(std::string_view final_answer,
                                       const std::optional<std::string>& ground_truth)>;

/// An executable turn-based multi-agent system. Immutable once built; share freely.
///
/// The scheduler returns an index into `roster`. `visibility` decides which prior
/// steps an agent is shown (defaults to the full history). `transition` produces
/// the environment feedback attached to each step (defaults to none). `answer`
/// extracts the final answer from the history and `evaluator` maps it to an outcome.
struct SystemSpec {
  std::string name;
  std::vector<RosterEntry> roster;
  Scheduler scheduler;
  StopRule stop;
  VisibilityRule visibility;
  Transition transition;
  AnswerRule answer;
  OutcomeRule evaluator;
  std::size_t max_steps = 50;
  std::uint64_t seed = 0;

  const RosterEntry* find_agent(std::string_view agent_name) const;
};

std::vector<std::string> validate_system(const SystemSpec& system);

struct ReplayDirective {
  std::size_t pivot_step = 0;
  std::string replacement_action;
};

inline constexpr std::string_view kBudgetExhausted = "budget-exhausted";

/// Executes `system` on `query`. Deterministic for scripted policies. When the step
/// budget runs out the trajectory is truncated, its outcome forced to failure and
/// feedback_log carries the budget-exhausted flag.
/// Throws precondition_error on an empty query or invalid system.
Trajectory run(const SystemSpec& system, std::string_view query,
               std::optional<std::string> ground_truth, std::string task_id = {});

/// The rectification operator: keeps steps [0, pivot) verbatim, substitutes the
/// replacement action for the original acting agent at the pivot, then re-simulates
/// every later step from the modified history and re-evaluates the outcome.
/// Throws std::out_of_range when the pivot is past the end.
Trajectory rectify(const SystemSpec& system, const Trajectory& source, const ReplayDirective& directive);

/// What `system`'s policy for the agent acting at `step` would emit given the
/// source's prefix. Used to derive oracle fixes from a bug-free reference system.
std::string policy_action(const SystemSpec& system, const Trajectory& source, std::size_t step);

/// Per-step corrections from a reference system: policy_action for every step.
std::map<std::size_t, std::string> oracle_fixes(const SystemSpec& reference, const Trajectory& source);

struct DecisivePair {
  AgentId agent;
  std::size_t step = 0;

  friend bool operator==(const DecisivePair&, const DecisivePair&) = default;
};

/// Every (agent, step) whose fix flips the failure, in step order. Exhaustive.
std::vector<DecisivePair> decisive_candidates(const SystemSpec& system, const Trajectory& source,
                                              const std::map<std::size_t, std::string>& fixes);

/// Earliest flipping pair over an exhaustive replay of every step; absent if none flips.
/// Requires a failed source and a fix for every step.
std::optional<DecisivePair> brute_force_decisive(const SystemSpec& system, const Trajectory& source,
                                                 const std::map<std::size_t, std::string>& fixes);

// Resolves a trajectory's system_name back to an executable system.
using SystemResolver = std::function<SystemSpec(std::string_view system_name)>;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept;
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace faultline
