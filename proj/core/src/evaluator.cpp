#include "faultline/evaluator.hpp"

#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "faultline/parallel.hpp"
#include "faultline/prompts.hpp"
#include "faultline/text.hpp"

namespace faultline::evaluator {

std::vector<llm::ChatMessage> build_judge_messages(const Trajectory& t, const EvalSetting& setting,
                                                   const JudgeTemplates& templates) {
  if (setting.with_ground_truth && !t.ground_truth) {
    throw precondition_error("trajectory " + t.task_id + " has no ground truth for a w/ G evaluation");
  }
  std::vector<std::string> names;
  for (const AgentId& a : roster_of(t)) names.push_back(a.name);

  const std::string gt_block = setting.with_ground_truth ? "Ground truth answer: " + *t.ground_truth + "\n" : "";
  const std::string user_tmpl =
      templates.user.empty() ? std::string(prompts::default_judge_template()) : templates.user;
  std::vector<llm::ChatMessage> msgs;
  msgs.push_back({"system", templates.system.empty() ? std::string(prompts::default_judge_system()) : templates.system});
  msgs.push_back({"user", text::fill_template(user_tmpl, {{"question", t.query},
                                                         {"ground_truth_block", gt_block},
                                                         {"agents", text::join(names, ", ")},
                                                         {"history", prompts::render_history(t.steps)}})});
  return msgs;
}

std::string OracleAttributor::attribute(const JudgeRequest& req) {
  if (!req.truth) throw precondition_error("oracle attributor needs the annotation");
  return reward::format_answer(req.truth->agent.name, req.truth->step, "reading the label");
}

std::string ScrambledStepAttributor::attribute(const JudgeRequest& req) {
  if (!req.truth) throw precondition_error("scrambled-step attributor needs the annotation");
  const auto& steps = req.trajectory.steps;
  const std::string& who = req.truth->agent.name;
  std::optional<std::size_t> first;
  std::optional<std::size_t> next;
  for (const Step& s : steps) {
    if (s.agent.name != who) continue;
    if (!first) first = s.index;
    if (!next && s.index > req.truth->step) next = s.index;
  }
  const std::size_t step = next ? *next : first.value_or(req.truth->step);
  return reward::format_answer(who, step, "same agent, shifted turn");
}

std::string LlmAttributor::attribute(const JudgeRequest& req) { return client_.complete(req.messages).text; }

bool internally_consistent(const reward::CandidateOutput& c, const Trajectory& t) {
  if (!c.format_ok || !c.parsed) return true;
  if (c.parsed->step >= t.steps.size()) return false;
  return reward::agent_matches(*c.parsed, t.steps[c.parsed->step].agent, true);
}

reward::CandidateOutput judge(AttributorBackend& backend, const Trajectory& t, const EvalSetting& setting,
                              const Annotation* truth, const JudgeTemplates& templates) {
  const auto msgs = build_judge_messages(t, setting, templates);
  reward::CandidateOutput out = reward::parse_output(backend.attribute({t, truth, msgs}));
  if (backend.scripted() && !internally_consistent(out, t)) {
    throw contract_error("backend '" + backend.id() + "' named an agent that does not act at its step");
  }
  return out;
}

JudgeBatch judge_batch(AttributorBackend& backend, std::span<const AnnotatedTrajectory> items,
                       const EvalSetting& setting, std::size_t workers, const JudgeTemplates& templates) {
  JudgeBatch batch;
  batch.outputs.resize(items.size());
  std::vector<std::string> errors(items.size());
  std::vector<char> skipped(items.size(), 0);

  parallel_for(items.size(), workers, [&](std::size_t i) {
    const AnnotatedTrajectory& it = items[i];
    if (setting.with_ground_truth && !it.trajectory.ground_truth) {
      skipped[i] = 1;
      return;
    }
    try {
      batch.outputs[i] = judge(backend, it.trajectory, setting, &it.annotation, templates);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  for (std::size_t i = 0; i < items.size(); ++i) {
    if (skipped[i]) {
      ++batch.skipped;
    } else if (batch.outputs[i]) {
      ++batch.judged;
    } else {
      ++batch.failed;
      batch.failures.push_back({i, items[i].trajectory.task_id, errors[i]});
    }
  }
  return batch;
}

EvalResult evaluate(std::span<const reward::CandidateOutput> predictions, std::span<const Annotation> truths,
                    std::span<const std::string> task_ids) {
  if (predictions.size() != truths.size()) {
    throw precondition_error("predictions (" + std::to_string(predictions.size()) + ") and truths (" +
                             std::to_string(truths.size()) + ") are not aligned");
  }
  if (!task_ids.empty() && task_ids.size() != truths.size()) throw precondition_error("task_ids are not aligned");
  if (truths.empty()) throw precondition_error("nothing to evaluate");

  EvalResult r;
  r.n = truths.size();
  std::size_t agent_hits = 0;
  std::size_t step_hits = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    ItemResult item;
    if (!task_ids.empty()) item.task_id = task_ids[i];
    item.truth = truths[i];
    if (predictions[i].format_ok && predictions[i].parsed) {
      item.predicted = predictions[i].parsed;
      item.agent_hit = reward::agent_matches(*item.predicted, truths[i].agent, true);
      item.step_hit = item.predicted->step == truths[i].step;
    }
    agent_hits += item.agent_hit;
    step_hits += item.step_hit;
    r.per_item.push_back(std::move(item));
  }
  r.agent_accuracy = static_cast<double>(agent_hits) / static_cast<double>(r.n);
  r.step_accuracy = static_cast<double>(step_hits) / static_cast<double>(r.n);
  return r;
}

nlohmann::ordered_json to_json(const EvalResult& r) {
  nlohmann::ordered_json j;
  j["agent_accuracy"] = r.agent_accuracy;
  j["step_accuracy"] = r.step_accuracy;
  j["n"] = r.n;
  auto& items = j["per_item"] = nlohmann::ordered_json::array();
  for (const ItemResult& it : r.per_item) {
    nlohmann::ordered_json e;
    e["task_id"] = it.task_id;
    if (it.predicted) {
      e["predicted"] = {{"agent", it.predicted->agent}, {"step", it.predicted->step}};
    } else {
      e["predicted"] = nullptr;
    }
    e["truth"] = {{"agent", it.truth.agent.name}, {"step", it.truth.step}};
    e["agent_hit"] = it.agent_hit;
    e["step_hit"] = it.step_hit;
    items.push_back(std::move(e));
  }
  return j;
}

namespace {

std::string string_field(const nlohmann::json& rec, const char* key, bool required) {
  auto it = rec.find(key);
  if (it == rec.end() || it->is_null()) {
    if (required) throw parse_error(std::string("missing field '") + key + "'", 0, key);
    return {};
  }
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number()) return it->dump();
  throw parse_error(std::string("field '") + key + "' has the wrong type", 0, key);
}

std::optional<std::size_t> step_label(const nlohmann::json& rec) {
  auto it = rec.find("mistake_step");
  if (it == rec.end() || it->is_null()) return std::nullopt;
  if (it->is_number_unsigned()) return it->get<std::size_t>();
  if (it->is_number_integer()) {
    if (it->get<std::int64_t>() < 0) return std::nullopt;
    return static_cast<std::size_t>(it->get<std::int64_t>());
  }
  if (it->is_string()) {
    const auto v = text::parse_int(it->get<std::string>());
    if (v && *v >= 0) return static_cast<std::size_t>(*v);
  }
  return std::nullopt;
}

class SkipRecord : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace

ImportedRecord convert_whowhen(const nlohmann::json& rec, const std::string& source, std::size_t ordinal,
                               ImportReport& report) {
  if (!rec.is_object()) throw parse_error("record is not a JSON object");
  auto hist = rec.find("history");
  if (hist == rec.end() || !hist->is_array()) throw parse_error("missing or non-array field 'history'", 0, "history");
  if (hist->empty()) throw parse_error("field 'history' is empty", 0, "history");

  Trajectory t;
  t.query = string_field(rec, "question", true);
  std::string id = string_field(rec, "question_ID", false);
  if (id.empty()) id = std::filesystem::path(source).stem().string() + "#" + std::to_string(ordinal);
  t.task_id = "whowhen/" + id;
  t.system_name = "whowhen";
  if (const std::string gt = string_field(rec, "ground_truth", false); !gt.empty()) t.ground_truth = gt;

  std::map<std::string, std::size_t> roster;
  for (std::size_t i = 0; i < hist->size(); ++i) {
    const auto& msg = (*hist)[i];
    if (!msg.is_object()) throw parse_error("history[" + std::to_string(i) + "] is not an object", 0, "history");
    std::string name = string_field(msg, "name", false);
    if (name.empty()) name = string_field(msg, "role", false);
    if (name.empty()) throw parse_error("history[" + std::to_string(i) + "] has neither name nor role", 0, "name");
    std::string content = string_field(msg, "content", false);
    if (text::trim(content).empty()) content = "(empty message)";
    const std::size_t index = roster.emplace(name, roster.size()).first->second;
    t.steps.push_back({i, AgentId{index, name}, std::move(content), std::nullopt});
  }
  t.final_answer = t.steps.back().action;
  t.outcome = Outcome::failure;

  const auto step = step_label(rec);
  if (!step) throw SkipRecord("missing or unparseable mistake_step");
  if (*step >= t.steps.size()) {
    throw SkipRecord("mistake_step " + std::to_string(*step) + " beyond history of " +
                     std::to_string(t.steps.size()));
  }

  Annotation a;
  a.agent = t.steps[*step].agent;
  a.step = *step;
  a.method = AnnotationMethod::counterfactual;
  const std::string labelled_agent = string_field(rec, "mistake_agent", false);
  const std::string reason = string_field(rec, "mistake_reason", false);
  if (!reason.empty()) a.rationale = reason;
  if (!labelled_agent.empty() && !text::iequals(text::trim(labelled_agent), a.agent.name)) {
    ++report.agent_label_mismatches;
    spdlog::warn("{}: mistake_agent '{}' but '{}' acts at step {}", t.task_id, labelled_agent, a.agent.name, *step);
  }

  ImportedRecord out;
  out.source = source;
  out.provenance = nlohmann::ordered_json::object();
  out.provenance["format"] = "whowhen";
  out.provenance["index_base"] = 0;
  out.provenance["preamble_counted"] = true;
  out.provenance["source_file"] = source;
  if (!labelled_agent.empty()) out.provenance["mistake_agent"] = labelled_agent;
  out.item = {std::move(t), std::move(a)};
  return out;
}

ImportResult import_whowhen(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& e : fs::directory_iterator(path)) {
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else if (fs::exists(path)) {
    files.push_back(path);
  } else {
    throw config_error("no such file or directory: " + path.string());
  }

  ImportResult result;
  auto take = [&](const nlohmann::json& rec, const std::string& source, std::size_t ordinal) {
    ++result.report.records;
    try {
      result.records.push_back(convert_whowhen(rec, source, ordinal, result.report));
      ++result.report.imported;
    } catch (const SkipRecord& e) {
      spdlog::warn("skipping {} record {}: {}", source, ordinal, e.what());
      result.report.skipped.push_back({source + "#" + std::to_string(ordinal), e.what()});
    }
  };

  for (const fs::path& file : files) {
    ++result.report.files;
    std::ifstream in(file);
    if (!in) throw config_error("cannot read " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string body = ss.str();
    const std::string_view trimmed = text::trim(body);
    if (trimmed.empty()) continue;

    const auto whole = nlohmann::json::parse(trimmed, nullptr, false);
    if (!whole.is_discarded()) {
      if (whole.is_array()) {
        for (std::size_t i = 0; i < whole.size(); ++i) take(whole[i], file.string(), i);
      } else {
        take(whole, file.string(), 0);
      }
      continue;
    }
    // JSONL
    std::istringstream lines(body);
    std::string line;
    std::size_t lineno = 0;
    std::size_t ordinal = 0;
    while (std::getline(lines, line)) {
      ++lineno;
      if (text::trim(line).empty()) continue;
      const auto rec = nlohmann::json::parse(line, nullptr, false);
      if (rec.is_discarded()) throw parse_error(file.string() + ": malformed JSON", lineno);
      try {
        take(rec, file.string(), ordinal++);
      } catch (const parse_error& e) {
        throw parse_error(file.string() + ": " + e.what(), lineno, e.field());
      }
    }
  }
  return result;
}

}  // namespace faultline::evaluator
