#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace faultline {

// Roster member. index is unique within a system, name is the role label.
struct AgentId {
  std::size_t index = 0;
  std::string name;

  friend bool operator==(const AgentId&, const AgentId&) = default;
};

// One turn of a turn-based execution: exactly one agent acts.
struct Step {
  std::size_t index = 0;
  AgentId agent;
  std::string action;
  std::optional<std::string> feedback;  // environment observation produced by this action

  friend bool operator==(const Step&, const Step&) = default;
};

enum class Outcome : std::uint8_t { failure = 0, success = 1 };

inline constexpr int to_int(Outcome o) noexcept { return static_cast<int>(o); }

struct Trajectory {
  std::string task_id;
  std::string query;
  std::string system_name;
  std::vector<Step> steps;
  std::string final_answer;
  Outcome outcome = Outcome::failure;
  std::optional<std::string> ground_truth;
  std::optional<std::string> feedback_log;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

enum class AnnotationMethod : std::uint8_t { counterfactual, injected };

std::string_view to_string(AnnotationMethod m) noexcept;
std::optional<AnnotationMethod> parse_annotation_method(std::string_view s) noexcept;

// The decisive error: earliest step whose single-action correction flips failure to success.
struct Annotation {
  AgentId agent;
  std::size_t step = 0;
  AnnotationMethod method = AnnotationMethod::counterfactual;
  std::optional<std::string> rationale;
  std::optional<std::string> corrected_action;  // counterfactual only
  std::optional<std::string> corrupted_action;  // injected only

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct AnnotatedTrajectory {
  Trajectory trajectory;
  Annotation annotation;

  friend bool operator==(const AnnotatedTrajectory&, const AnnotatedTrajectory&) = default;
};

/// Checks every structural invariant of a trajectory. Returns one human readable
/// line per violation, naming the step position and the rule; empty when valid.
std::vector<std::string> validate_trajectory(const Trajectory& t);

/// Same as above plus the annotation's bounds and agent consistency.
std::vector<std::string> validate_trajectory(const Trajectory& t, const Annotation& a);

std::vector<std::string> validate(const AnnotatedTrajectory& at);

/// The agent scheduled at `step`. Throws std::out_of_range past the end.
const AgentId& active_agent(const Trajectory& t, std::size_t step);

// Distinct agents in order of first appearance.
std::vector<AgentId> roster_of(const Trajectory& t);

}  // namespace faultline
