#include "faultline/trajectory.hpp"

#include <map>
#include <stdexcept>

namespace faultline {

std::string_view to_string(AnnotationMethod m) noexcept {
  switch (m) {
    case AnnotationMethod::counterfactual:
      return "counterfactual";
    case AnnotationMethod::injected:
      return "injected";
  }
  return "counterfactual";
}

std::optional<AnnotationMethod> parse_annotation_method(std::string_view s) noexcept {
  if (s == "counterfactual") return AnnotationMethod::counterfactual;
  if (s == "injected") return AnnotationMethod::injected;
  return std::nullopt;
}

std::vector<std::string> validate_trajectory(const Trajectory& t) {
  std::vector<std::string> out;
  if (t.steps.empty()) {
    out.emplace_back("trajectory has no steps");
    return out;
  }

  std::map<std::size_t, std::string> name_by_index;
  std::map<std::string, std::size_t> index_by_name;
  for (std::size_t pos = 0; pos < t.steps.size(); ++pos) {
    const Step& s = t.steps[pos];
    const std::string at = " at position " + std::to_string(pos);
    if (pos == 0) {
      if (s.index != 0) out.push_back("first step index must be 0" + at);
    } else if (s.index == t.steps[pos - 1].index) {
      out.push_back("more than one agent acts at step index " + std::to_string(s.index) + at);
    } else if (s.index != t.steps[pos - 1].index + 1) {
      out.push_back("non-consecutive step index" + at);
    }
    if (s.action.empty()) out.push_back("empty action" + at);
    if (s.agent.name.empty()) {
      out.push_back("empty agent name" + at);
      continue;
    }
    auto [it, fresh] = name_by_index.emplace(s.agent.index, s.agent.name);
    if (!fresh && it->second != s.agent.name) {
      out.push_back("agent index " + std::to_string(s.agent.index) + " names both '" + it->second +
                    "' and '" + s.agent.name + "'" + at);
    }
    auto [jt, fresh_name] = index_by_name.emplace(s.agent.name, s.agent.index);
    if (!fresh_name && jt->second != s.agent.index) {
      out.push_back("agent '" + s.agent.name + "' carries two indices" + at);
    }
  }
  return out;
}

std::vector<std::string> validate_trajectory(const Trajectory& t, const Annotation& a) {
  auto out = validate_trajectory(t);
  if (a.step >= t.steps.size()) {
    out.emplace_back("annotation step out of range");
  } else if (t.steps[a.step].agent != a.agent) {
    out.push_back("annotation agent '" + a.agent.name + "' did not act at step " +
                  std::to_string(a.step));
  }
  return out;
}

std::vector<std::string> validate(const AnnotatedTrajectory& at) {
  auto out = validate_trajectory(at.trajectory, at.annotation);
  if (at.trajectory.outcome != Outcome::failure) {
    out.emplace_back("annotated trajectory must be a failure");
  }
  return out;
}

const AgentId& active_agent(const Trajectory& t, std::size_t step) {
  if (step >= t.steps.size()) {
    throw std::out_of_range("step " + std::to_string(step) + " outside trajectory of " +
                            std::to_string(t.steps.size()) + " steps");
  }
  return t.steps[step].agent;
}

std::vector<AgentId> roster_of(const Trajectory& t) {
  std::vector<AgentId> out;
  for (const Step& s : t.steps) {
    bool seen = false;
    for (const AgentId& a : out) seen = seen || a == s.agent;
    if (!seen) out.push_back(s.agent);
  }
  return out;
}

}  // namespace faultline
