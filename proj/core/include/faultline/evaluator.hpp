#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "faultline/errors.hpp"
#include "faultline/harness.hpp"
#include "faultline/llm_gateway.hpp"
#include "faultline/reward.hpp"
#include "faultline/trajectory.hpp"

namespace faultline::evaluator {

enum class JudgeMode : std::uint8_t { all_at_once };

struct EvalSetting {
  bool with_ground_truth = false;
  JudgeMode mode = JudgeMode::all_at_once;
};

struct JudgeTemplates {
  std::string system;  // empty selects the default
  std::string user;
};

/// System + user message carrying the whole serialized trajectory; the ground
/// truth is included iff setting.with_ground_truth.
std::vector<llm::ChatMessage> build_judge_messages(const Trajectory& t, const EvalSetting& setting,
                                                   const JudgeTemplates& templates = {});

struct JudgeRequest {
  const Trajectory& trajectory;
  const Annotation* truth = nullptr;  // only oracle-style backends may look
  std::span<const llm::ChatMessage> messages;
};

class AttributorBackend {
 public:
  virtual ~AttributorBackend() = default;
  virtual std::string id() const = 0;
  virtual std::string attribute(const JudgeRequest& req) = 0;  // raw reply text
  // Scripted backends whose predictions must be internally consistent.
  virtual bool scripted() const { return false; }
};

// Echoes the annotation.
class OracleAttributor final : public AttributorBackend {
 public:
  std::string id() const override { return "oracle"; }
  std::string attribute(const JudgeRequest& req) override;
  bool scripted() const override { return true; }
};

// Right agent, but the step is that agent's next turn after the true one (wrapping
// to its first turn). Hits the step only when the agent acts exactly once.
class ScrambledStepAttributor final : public AttributorBackend {
 public:
  std::string id() const override { return "scrambled-step"; }
  std::string attribute(const JudgeRequest& req) override;
  bool scripted() const override { return true; }
};

class LlmAttributor final : public AttributorBackend {
 public:
  explicit LlmAttributor(llm::ChatClient& client) : client_(client) {}
  std::string id() const override { return client_.id(); }
  std::string attribute(const JudgeRequest& req) override;

 private:
  llm::ChatClient& client_;
};

/// Parsed agent names the agent that acts at the parsed step.
bool internally_consistent(const reward::CandidateOutput& c, const Trajectory& t);

/// Throws precondition_error when w/ G is requested for a trajectory without ground
/// truth, contract_error when a scripted backend answers inconsistently.
reward::CandidateOutput judge(AttributorBackend& backend, const Trajectory& t, const EvalSetting& setting,
                              const Annotation* truth = nullptr, const JudgeTemplates& templates = {});

struct JudgeFailure {
  std::size_t index = 0;
  std::string task_id;
  std::string error;
};

struct JudgeBatch {
  std::vector<std::optional<reward::CandidateOutput>> outputs;  // aligned with input
  std::vector<JudgeFailure> failures;
  std::size_t judged = 0;
  std::size_t failed = 0;
  std::size_t skipped = 0;  // w/ G requested but no ground truth
};

JudgeBatch judge_batch(AttributorBackend& backend, std::span<const AnnotatedTrajectory> items,
                       const EvalSetting& setting, std::size_t workers = 1, const JudgeTemplates& templates = {});

struct ItemResult {
  std::string task_id;
  std::optional<reward::AttributionPrediction> predicted;
  Annotation truth;
  bool agent_hit = false;
  bool step_hit = false;
};

struct EvalResult {
  double agent_accuracy = 0.0;
  double step_accuracy = 0.0;
  std::size_t n = 0;
  std::vector<ItemResult> per_item;
};

/// Exact-match accuracies. Unparsed predictions miss on both counts.
/// Throws precondition_error on misaligned or empty input.
EvalResult evaluate(std::span<const reward::CandidateOutput> predictions, std::span<const Annotation> truths,
                    std::span<const std::string> task_ids = {});

nlohmann::ordered_json to_json(const EvalResult& r);

// --- Who&When import ---

struct ImportSkip {
  std::string source;
  std::string reason;
};

struct ImportedRecord {
  AnnotatedTrajectory item;
  std::string source;  // file the record came from
  nlohmann::ordered_json provenance;
};

struct ImportReport {
  std::size_t files = 0;
  std::size_t records = 0;
  std::size_t imported = 0;
  std::vector<ImportSkip> skipped;
  std::size_t agent_label_mismatches = 0;
};

struct ImportResult {
  std::vector<ImportedRecord> records;
  ImportReport report;
};

/// Reads one record object, a JSON array of records, JSONL, or a directory of *.json files.
/// `history` entries become steps (0-based, preamble messages included); the acting agent
/// is `name`, else `role`. Records without a usable mistake_step are skipped and reported.
ImportResult import_whowhen(const std::filesystem::path& path);

ImportedRecord convert_whowhen(const nlohmann::json& record, const std::string& source, std::size_t ordinal,
                               ImportReport& report);

// --- splitting ---

template <class T>
struct Split {
  std::vector<T> train;
  std::vector<T> test;
};

/// Seeded, stratified partition. Each stratum keeps floor(ratio * n) items for training,
/// chosen by a Fisher-Yates shuffle on mt19937_64; both halves keep input order.
template <class T, class StratumFn>
Split<T> split(std::span<const T> items, double ratio, std::uint64_t seed, StratumFn&& stratum_of) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw precondition_error("split ratio must be in (0, 1)");
  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < items.size(); ++i) strata[std::string(stratum_of(items[i]))].push_back(i);

  std::vector<bool> in_train(items.size(), false);
  for (auto& [name, idx] : strata) {
    std::mt19937_64 rng(mix_seed(seed, fnv1a64(name)));
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng() % i)]);
    const auto keep = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(idx.size()) + 1e-9));
    for (std::size_t i = 0; i < keep; ++i) in_train[idx[i]] = true;
  }

  Split<T> out;
  for (std::size_t i = 0; i < items.size(); ++i) (in_train[i] ? out.train : out.test).push_back(items[i]);
  if (out.train.empty() || out.test.empty()) {
    throw precondition_error("degenerate split: " + std::to_string(out.train.size()) + " train / " +
                             std::to_string(out.test.size()) + " test");
  }
  return out;
}

}  // namespace faultline::evaluator
