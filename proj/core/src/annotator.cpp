#include "faultline/annotator.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "faultline/errors.hpp"
#include "faultline/parallel.hpp"
#include "faultline/prompts.hpp"
#include "faultline/text.hpp"

namespace faultline::annotator {

std::string_view to_string(ReplayVerdict v) noexcept {
  switch (v) {
    case ReplayVerdict::success:
      return "success";
    case ReplayVerdict::rejected:
      return "rejected";
    case ReplayVerdict::failure:
      break;
  }
  return "failure";
}

OracleAnalyzer::OracleAnalyzer(SystemResolver reference) : reference_(std::move(reference)) {}

std::string OracleAnalyzer::propose(const AnalyzerRequest& req) {
  const SystemSpec ref = reference_(req.trajectory.system_name);
  return policy_action(ref, req.trajectory, req.step);
}

std::string IdentityAnalyzer::propose(const AnalyzerRequest& req) { return req.trajectory.steps.at(req.step).action; }

LlmAnalyzer::LlmAnalyzer(llm::ChatClient& client, std::string prompt_template)
    : client_(client),
      template_(prompt_template.empty() ? std::string(prompts::default_analyzer_template())
                                        : std::move(prompt_template)) {}

std::string LlmAnalyzer::render_prompt(const AnalyzerRequest& req) const {
  const Step& s = req.trajectory.steps.at(req.step);
  return text::fill_template(template_, {{"task_id", req.trajectory.task_id},
                                         {"question", req.trajectory.query},
                                         {"ground_truth", req.ground_truth},
                                         {"model_prediction", req.trajectory.final_answer},
                                         {"history", prompts::render_history(req.history)},
                                         {"feedback", req.feedback},
                                         {"step", std::to_string(req.step)},
                                         {"agent", s.agent.name},
                                         {"original_action", s.action}});
}

std::string LlmAnalyzer::propose(const AnalyzerRequest& req) {
  const std::vector<llm::ChatMessage> msgs = {{"user", render_prompt(req)}};
  return extract_json_field(client_.complete(msgs).text, "corrected_action");
}

std::string extract_json_field(std::string_view reply, std::string_view key) {
  const std::size_t open = reply.find('{');
  const std::size_t close = reply.rfind('}');
  if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
    const auto j = nlohmann::json::parse(reply.substr(open, close - open + 1), nullptr, false);
    if (j.is_object()) {
      auto it = j.find(std::string(key));
      if (it != j.end() && it->is_string()) return it->get<std::string>();
    }
  }
  return std::string(text::trim(reply));
}

AnnotationReport annotate_failure(const SystemSpec& system, const Trajectory& t, AnalyzerBackend& backend,
                                  const AnnotatorConfig& config) {
  if (t.outcome != Outcome::failure) throw precondition_error("annotate_failure needs a failed trajectory");
  if (!t.ground_truth) throw precondition_error("annotate_failure needs a ground truth");
  if (t.steps.empty()) throw precondition_error("trajectory has no steps");
  if (config.retries_per_step == 0) throw precondition_error("retries_per_step must be positive");

  const std::size_t steps = t.steps.size();
  const std::size_t max_replays = config.max_replays ? config.max_replays : config.retries_per_step * steps;
  const std::string feedback = prompts::assemble_feedback(t);

  AnnotationReport report;
  for (std::size_t step = 0; step < steps; ++step) {
    const std::string& original = t.steps[step].action;
    std::vector<std::string> tried;
    for (std::size_t attempt = 0; attempt < config.retries_per_step; ++attempt) {
      AnalyzerRequest req{t, step, std::span<const Step>(t.steps.data(), step), feedback, *t.ground_truth, attempt};
      std::string proposal;
      ++report.backend_calls;
      try {
        proposal = backend.propose(req);
      } catch (const std::exception& e) {
        throw annotation_error(annotation_error::Kind::backend,
                               "analyzer '" + backend.id() + "' failed at step " + std::to_string(step) + ": " +
                                   e.what(),
                               std::move(report));
      }
      if (std::find(tried.begin(), tried.end(), proposal) != tried.end()) continue;
      tried.push_back(proposal);

      const bool too_long = static_cast<double>(proposal.size()) >
                            config.max_length_ratio * static_cast<double>(original.size());
      const bool leaks = config.reject_solution_leak && !t.ground_truth->empty() &&
                         proposal.find(*t.ground_truth) != std::string::npos;
      if (proposal.empty() || too_long || leaks) {
        report.attempts.push_back({step, std::move(proposal), ReplayVerdict::rejected});
        continue;
      }

      if (report.replays >= max_replays) {
        throw annotation_error(annotation_error::Kind::budget,
                               "replay budget of " + std::to_string(max_replays) + " exhausted at step " +
                                   std::to_string(step),
                               std::move(report));
      }
      ++report.replays;
      const Trajectory replay = rectify(system, t, {step, proposal});
      const bool flipped = replay.outcome == Outcome::success;
      report.attempts.push_back({step, proposal, flipped ? ReplayVerdict::success : ReplayVerdict::failure});
      if (flipped) {
        Annotation a;
        a.agent = active_agent(t, step);
        a.step = step;
        a.method = AnnotationMethod::counterfactual;
        a.rationale = "replaying with the corrected action at step " + std::to_string(step) + " succeeds";
        a.corrected_action = std::move(proposal);
        report.result = std::move(a);
        return report;
      }
    }
  }
  return report;
}

NegativeSet build_negative_set(const SystemResolver& systems, std::span<const Trajectory> failures,
                               AnalyzerBackend& backend, const AnnotatorConfig& config, std::size_t workers) {
  struct Slot {
    std::optional<AnnotationReport> report;
    std::string error;
    std::size_t replays = 0;
    std::size_t calls = 0;
  };
  std::vector<Slot> slots(failures.size());

  parallel_for(failures.size(), workers, [&](std::size_t i) {
    Slot& slot = slots[i];
    try {
      const SystemSpec system = systems(failures[i].system_name);
      slot.report = annotate_failure(system, failures[i], backend, config);
      slot.replays = slot.report->replays;
      slot.calls = slot.report->backend_calls;
    } catch (const annotation_error& e) {
      slot.error = e.what();
      slot.replays = e.partial().replays;
      slot.calls = e.partial().backend_calls;
    } catch (const std::exception& e) {
      slot.error = e.what();
    }
  });

  NegativeSet out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    Slot& slot = slots[i];
    out.replays += slot.replays;
    out.backend_calls += slot.calls;
    if (!slot.report) {
      out.failures.push_back({failures[i].task_id, std::move(slot.error)});
    } else if (slot.report->result) {
      out.annotated.push_back({failures[i], *slot.report->result});
    } else {
      out.excluded.push_back({failures[i].task_id, std::move(*slot.report)});
    }
  }
  return out;
}

}  // namespace faultline::annotator
