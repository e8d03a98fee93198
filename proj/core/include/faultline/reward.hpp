#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "faultline/trajectory.hpp"

// Attribution reward: a format gate over a weighted mix of an agent hit and a
// Gaussian-smoothed step score, plus the group-relative policy-gradient pieces.
namespace faultline::reward {

inline constexpr double kDefaultLambda = 0.5;
inline constexpr double kDefaultSigma = 1.0;
inline constexpr double kDefaultEpsilon = 1e-6;
inline constexpr double kDefaultClipB0 = 0.2;
inline constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

struct AttributionPrediction {
  std::string agent;  // as written, trimmed
  std::optional<std::size_t> agent_index;  // set when the agent field is a bare integer
  std::size_t step = 0;

  bool operator==(const AttributionPrediction&) const = default;
};

struct CandidateOutput {
  std::string raw_text;
  std::optional<AttributionPrediction> parsed;  // absent iff !format_ok
  bool format_ok = false;
  std::string reasoning;  // think-block content

  bool operator==(const CandidateOutput&) const = default;
};

/// Accepts exactly `<think>...</think><answer>AGENT | STEP</answer>` with only
/// whitespace around and between the blocks. STEP is a non-negative decimal integer.
/// Never throws.
CandidateOutput parse_output(std::string_view raw_text);

/// Formats a prediction in the answer grammar (empty think block unless given).
std::string format_answer(std::string_view agent, std::size_t step, std::string_view reasoning = {});

struct RewardParams {
  double lambda = kDefaultLambda;
  double sigma = kDefaultSigma;
  bool index_fallback = true;  // a bare integer agent may match the truth's roster index
};

void validate_params(const RewardParams& p);  // precondition_error when out of range

struct RewardBreakdown {
  double format = 0.0;
  double agent = 0.0;
  double step = 0.0;
  double total = 0.0;
  double lambda = kDefaultLambda;
  double sigma = kDefaultSigma;
};

double step_reward(double predicted, double truth, double sigma);

/// Name match after trimming and case-folding; index match when allowed and the
/// truth index is known (not kNoIndex).
bool agent_matches(const AttributionPrediction& p, const AgentId& truth, bool index_fallback);

RewardBreakdown score(const CandidateOutput& candidate, const AgentId& truth_agent, std::size_t truth_step,
                      const RewardParams& params = {});
RewardBreakdown score(const CandidateOutput& candidate, const Annotation& truth, const RewardParams& params = {});

/// (R - mean) / (population std + epsilon); exactly zero for a constant group.
std::vector<double> advantages(std::span<const double> rewards, double epsilon = kDefaultEpsilon);

struct ClipSchedule {
  double b0 = kDefaultClipB0;
  std::size_t total_steps = 1;
};

/// max(0.2 * b0, b0 * (1 - s / total_steps)); requires s <= total_steps.
double clip_bound(const ClipSchedule& schedule, std::size_t s);

/// min(ratio * A, clip(ratio, 1 - bound, 1 + bound) * A); bound in (0, 1).
double surrogate_term(double ratio, double advantage, double bound);

/// Negated group mean of surrogate_term; KL penalty not included.
double surrogate_loss(std::span<const double> ratios, std::span<const double> advs, double bound);

struct RolloutGroup {
  std::vector<CandidateOutput> candidates;
  std::vector<double> rewards;
  std::vector<double> advantages;
  double epsilon = kDefaultEpsilon;
};

RolloutGroup make_group(std::span<const std::string> raw_texts, const Annotation& truth,
                        const RewardParams& params = {}, double epsilon = kDefaultEpsilon);

// --- line protocol shared by `score` and `serve-score` ---

struct ScoreRequest {
  std::string raw_text;
  std::string truth_agent;
  std::size_t truth_step = 0;
  RewardParams params;
};

/// Reads {raw_text, truth_agent, truth_step, lambda?, sigma?}; lambda/sigma fall back
/// to `defaults`. Throws parse_error naming the field, precondition_error on range.
ScoreRequest parse_score_request(const nlohmann::ordered_json& j, const RewardParams& defaults = {});

RewardBreakdown score_request(const ScoreRequest& req);

/// {format, agent, step, total}
nlohmann::ordered_json breakdown_json(const RewardBreakdown& r);

/// One protocol exchange: request line in, response line out (no trailing newline).
/// Malformed requests produce {"error": "..."} rather than throwing.
std::string handle_score_line(std::string_view line, const RewardParams& defaults = {});

}  // namespace faultline::reward
