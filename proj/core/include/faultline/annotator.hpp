#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "faultline/harness.hpp"
#include "faultline/llm_gateway.hpp"
#include "faultline/trajectory.hpp"

// Locates decisive errors in failed trajectories: for t = 0, 1, ... ask an analyzer
// for a corrected action, replay, and stop at the first step whose replay succeeds.
namespace faultline::annotator {

struct AnalyzerRequest {
  const Trajectory& trajectory;
  std::size_t step;
  std::span<const Step> history;  // prefix [0, step); stands in for the unstored state
  std::string feedback;           // step feedback + feedback_log
  std::string ground_truth;
  std::size_t attempt = 0;        // retry index within this step
};

// Implementations must tolerate concurrent propose() calls.
class AnalyzerBackend {
 public:
  virtual ~AnalyzerBackend() = default;
  virtual std::string id() const = 0;
  virtual std::string propose(const AnalyzerRequest& req) = 0;
};

/// Proposes what the bug-free reference system would have done at that step.
/// Only available for systems with a known reference (the toy systems).
class OracleAnalyzer final : public AnalyzerBackend {
 public:
  explicit OracleAnalyzer(SystemResolver reference);
  std::string id() const override { return "scripted-oracle"; }
  std::string propose(const AnalyzerRequest& req) override;

 private:
  SystemResolver reference_;
};

// Echoes the original action. Can never flip a deterministic failure.
class IdentityAnalyzer final : public AnalyzerBackend {
 public:
  std::string id() const override { return "identity"; }
  std::string propose(const AnalyzerRequest& req) override;
};

class LlmAnalyzer final : public AnalyzerBackend {
 public:
  explicit LlmAnalyzer(llm::ChatClient& client, std::string prompt_template = {});
  std::string id() const override { return client_.id(); }
  std::string propose(const AnalyzerRequest& req) override;

  std::string render_prompt(const AnalyzerRequest& req) const;

 private:
  llm::ChatClient& client_;
  std::string template_;
};

// Pulls "corrected_action" (or the given key) out of a JSON-ish reply; falls back to the trimmed text.
std::string extract_json_field(std::string_view reply, std::string_view key);

struct AnnotatorConfig {
  std::size_t retries_per_step = 2;
  std::size_t max_replays = 0;  // 0 means retries_per_step * T
  double max_length_ratio = 4.0;
  bool reject_solution_leak = false;  // reject proposals quoting the ground truth verbatim
};

enum class ReplayVerdict : std::uint8_t { failure = 0, success = 1, rejected = 2 };

std::string_view to_string(ReplayVerdict v) noexcept;

struct AnnotationAttempt {
  std::size_t step = 0;
  std::string proposed_action;
  ReplayVerdict verdict = ReplayVerdict::failure;
};

struct AnnotationReport {
  std::optional<Annotation> result;
  std::vector<AnnotationAttempt> attempts;
  std::size_t replays = 0;
  std::size_t backend_calls = 0;
};

class annotation_error : public std::runtime_error {
 public:
  enum class Kind { backend, budget };

  annotation_error(Kind kind, const std::string& what, AnnotationReport partial)
      : std::runtime_error(what), kind_(kind), partial_(std::move(partial)) {}

  Kind kind() const noexcept { return kind_; }
  const AnnotationReport& partial() const noexcept { return partial_; }

 private:
  Kind kind_;
  AnnotationReport partial_;
};

/// Scans steps in order. Per step, up to retries_per_step proposals are drawn;
/// exact repeats of an earlier proposal for the same step are not replayed again,
/// and proposals longer than max_length_ratio x the original are rejected unreplayed.
/// Throws precondition_error unless t is a failure carrying a ground truth.
/// Throws annotation_error (backend | budget) carrying the attempts made so far.
AnnotationReport annotate_failure(const SystemSpec& system, const Trajectory& t, AnalyzerBackend& backend,
                                  const AnnotatorConfig& config = {});

struct Exclusion {
  std::string task_id;
  AnnotationReport report;
};

struct ItemFailure {
  std::string task_id;
  std::string error;
};

struct NegativeSet {
  std::vector<AnnotatedTrajectory> annotated;
  std::vector<Exclusion> excluded;   // scanned fully, nothing flipped
  std::vector<ItemFailure> failures; // errors; the batch carried on
  std::size_t replays = 0;
  std::size_t backend_calls = 0;
};

/// Annotates every failure independently (up to `workers` at a time). Output order
/// follows input order.
NegativeSet build_negative_set(const SystemResolver& systems, std::span<const Trajectory> failures,
                               AnalyzerBackend& backend, const AnnotatorConfig& config = {},
                               std::size_t workers = 1);

}  // namespace faultline::annotator
