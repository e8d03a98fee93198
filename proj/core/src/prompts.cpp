#include "faultline/prompts.hpp"

#include <fstream>
#include <sstream>

#include "faultline/errors.hpp"

namespace faultline::prompts {

std::string_view default_analyzer_template() noexcept {
  return R"(You are diagnosing a failed run of a multi-agent system.

Task ID: {task_id}
Question: {question}
Reference answer: {ground_truth}
System answer: {model_prediction}

Execution history up to the step under review:
{history}

Environment feedback:
{feedback}

Step under review: {step} (agent {agent})
Original action:
{original_action}

Propose a corrected action for this single step only. Keep the change minimal:
repair the local mistake, keep the agent's role and output format, and do not
write out the complete final answer to the task.

Reply with JSON only:
{"corrected_action": "<replacement text for this step>", "reason": "<why the original was wrong>"}
)";
}

std::string_view default_attack_template() noexcept {
  return R"(You are stress-testing a multi-agent system using a run that succeeded.

Task ID: {task_id}
Question: {question}
Reference answer: {ground_truth}
System answer: {model_prediction}

Execution history:
{history}

Injection point: step {step} (agent {agent})
Original action:
{original_action}

Rewrite this action so that it contains one concrete, functional mistake that
would make the final result wrong (for example a changed number, swapped
operands, a negated instruction or dropped content). Keep the format of the
original action so downstream agents still consume it.

Reply with JSON only:
{"corrupted_action": "<the modified action>", "reason": "<how the change breaks the result>"}
)";
}

std::string_view default_judge_system() noexcept {
  return "You attribute failures in multi-agent systems. Given a failed run, find the decisive error: "
         "the earliest step whose correction would have made the run succeed, and the agent that took it. "
         "Reason inside <think></think>, then answer inside <answer></answer> as `AgentName | step`, "
         "using the step numbers shown in the log.";
}

std::string_view default_judge_template() noexcept {
  return R"(Question: {question}
{ground_truth_block}
Agents: {agents}

The run failed. Full execution log:
{history}
Which agent made the decisive error, and at which step?)";
}

std::string render_history(std::span<const Step> steps) {
  std::ostringstream out;
  for (const Step& s : steps) {
    out << "Step " << s.index << " \u2014 " << s.agent.name << ":\n" << s.action << "\n";
    if (s.feedback) out << "Feedback: " << *s.feedback << "\n";
    out << "\n";
  }
  return out.str();
}

std::string assemble_feedback(const Trajectory& t) {
  std::ostringstream out;
  for (const Step& s : t.steps) {
    if (s.feedback) out << "[step " << s.index << "] " << *s.feedback << "\n";
  }
  if (t.feedback_log) out << *t.feedback_log << "\n";
  const std::string f = out.str();
  return f.empty() ? std::string("(none)") : f;
}

std::string load_template(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot read prompt template " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace faultline::prompts
