#include "faultline/reward.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>

#include "faultline/errors.hpp"
#include "faultline/text.hpp"

namespace faultline::reward {

namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";

std::size_t count_of(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (std::size_t pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

bool blank(std::string_view s) { return text::trim(s).empty(); }

std::optional<std::size_t> parse_index(std::string_view s) {
  s = text::trim(s);
  if (s.empty() || s.size() > 18) return std::nullopt;
  std::size_t v = 0;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    v = v * 10 + static_cast<std::size_t>(c - '0');
  }
  return v;
}

}  // namespace

CandidateOutput parse_output(std::string_view raw_text) {
  CandidateOutput out;
  out.raw_text = std::string(raw_text);
  for (auto tag : {kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose}) {
    if (count_of(raw_text, tag) != 1) return out;
  }
  const std::size_t to = raw_text.find(kThinkOpen);
  const std::size_t tc = raw_text.find(kThinkClose);
  const std::size_t ao = raw_text.find(kAnswerOpen);
  const std::size_t ac = raw_text.find(kAnswerClose);
  if (!(to < tc && tc < ao && ao < ac)) return out;
  if (!blank(raw_text.substr(0, to))) return out;
  const std::size_t think_end = tc + kThinkClose.size();
  if (!blank(raw_text.substr(think_end, ao - think_end))) return out;
  if (!blank(raw_text.substr(ac + kAnswerClose.size()))) return out;

  const std::string_view answer = raw_text.substr(ao + kAnswerOpen.size(), ac - ao - kAnswerOpen.size());
  if (count_of(answer, "|") != 1) return out;
  const std::size_t bar = answer.find('|');
  const std::string_view agent = text::trim(answer.substr(0, bar));
  const auto step = parse_index(answer.substr(bar + 1));
  if (agent.empty() || !step) return out;

  AttributionPrediction p;
  p.agent = std::string(agent);
  p.agent_index = parse_index(agent);
  p.step = *step;
  out.parsed = std::move(p);
  out.format_ok = true;
  const std::size_t think_begin = to + kThinkOpen.size();
  out.reasoning = std::string(raw_text.substr(think_begin, tc - think_begin));
  return out;
}

std::string format_answer(std::string_view agent, std::size_t step, std::string_view reasoning) {
  std::string s;
  s.append(kThinkOpen).append(reasoning).append(kThinkClose);
  s.append(kAnswerOpen).append(agent).append(" | ").append(std::to_string(step)).append(kAnswerClose);
  return s;
}

void validate_params(const RewardParams& p) {
  if (!(p.lambda >= 0.0 && p.lambda <= 1.0)) {
    throw precondition_error("lambda must be in [0, 1], got " + std::to_string(p.lambda));
  }
  if (!(p.sigma > 0.0) || !std::isfinite(p.sigma)) {
    throw precondition_error("sigma must be positive and finite, got " + std::to_string(p.sigma));
  }
}

double step_reward(double predicted, double truth, double sigma) {
  const double d = predicted - truth;
  return std::exp(-(d * d) / (2.0 * sigma * sigma));
}

bool agent_matches(const AttributionPrediction& p, const AgentId& truth, bool index_fallback) {
  if (text::fold_case(text::trim(p.agent)) == text::fold_case(text::trim(truth.name))) return true;
  return index_fallback && p.agent_index && truth.index != kNoIndex && *p.agent_index == truth.index;
}

RewardBreakdown score(const CandidateOutput& candidate, const AgentId& truth_agent, std::size_t truth_step,
                      const RewardParams& params) {
  validate_params(params);
  RewardBreakdown r;
  r.lambda = params.lambda;
  r.sigma = params.sigma;
  if (!candidate.format_ok || !candidate.parsed) return r;
  r.format = 1.0;
  r.agent = agent_matches(*candidate.parsed, truth_agent, params.index_fallback) ? 1.0 : 0.0;
  r.step = step_reward(static_cast<double>(candidate.parsed->step), static_cast<double>(truth_step), params.sigma);
  r.total = r.format * (params.lambda * r.step + (1.0 - params.lambda) * r.agent);
  return r;
}

RewardBreakdown score(const CandidateOutput& candidate, const Annotation& truth, const RewardParams& params) {
  return score(candidate, truth.agent, truth.step, params);
}

std::vector<double> advantages(std::span<const double> rewards, double epsilon) {
  if (rewards.empty()) throw precondition_error("advantages of an empty group");
  if (!(epsilon > 0.0)) throw precondition_error("epsilon must be positive");
  const double n = static_cast<double>(rewards.size());
  std::vector<double> out(rewards.size(), 0.0);
  if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards.front(); })) return out;

  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / (sd + epsilon);
  return out;
}

double clip_bound(const ClipSchedule& schedule, std::size_t s) {
  if (!(schedule.b0 > 0.0)) throw precondition_error("b0 must be positive");
  if (schedule.total_steps == 0) throw precondition_error("total_steps must be positive");
  if (s > schedule.total_steps) {
    throw precondition_error("step " + std::to_string(s) + " beyond total_steps " +
                             std::to_string(schedule.total_steps));
  }
  const double frac = static_cast<double>(s) / static_cast<double>(schedule.total_steps);
  return std::max(0.2 * schedule.b0, schedule.b0 * (1.0 - frac));
}

double surrogate_term(double ratio, double advantage, double bound) {
  if (!(bound > 0.0 && bound < 1.0)) throw precondition_error("clip bound must be in (0, 1)");
  const double clipped = std::clamp(ratio, 1.0 - bound, 1.0 + bound);
  return std::min(ratio * advantage, clipped * advantage);
}

double surrogate_loss(std::span<const double> ratios, std::span<const double> advs, double bound) {
  if (ratios.size() != advs.size()) throw precondition_error("ratios and advantages differ in length");
  if (ratios.empty()) throw precondition_error("surrogate loss of an empty group");
  double sum = 0.0;
  for (std::size_t i = 0; i < ratios.size(); ++i) sum += surrogate_term(ratios[i], advs[i], bound);
  return -sum / static_cast<double>(ratios.size());
}

RolloutGroup make_group(std::span<const std::string> raw_texts, const Annotation& truth, const RewardParams& params,
                        double epsilon) {
  RolloutGroup g;
  g.epsilon = epsilon;
  for (const auto& raw : raw_texts) {
    g.candidates.push_back(parse_output(raw));
    g.rewards.push_back(score(g.candidates.back(), truth, params).total);
  }
  g.advantages = advantages(g.rewards, epsilon);
  return g;
}

ScoreRequest parse_score_request(const nlohmann::ordered_json& j, const RewardParams& defaults) {
  if (!j.is_object()) throw parse_error("score request must be a JSON object");
  auto need = [&](const char* key) -> const nlohmann::ordered_json& {
    auto it = j.find(key);
    if (it == j.end()) throw parse_error(std::string("missing field '") + key + "'", 0, key);
    return *it;
  };
  ScoreRequest req;
  req.params = defaults;
  const auto& raw = need("raw_text");
  if (!raw.is_string()) throw parse_error("'raw_text' must be a string", 0, "raw_text");
  req.raw_text = raw.get<std::string>();
  const auto& agent = need("truth_agent");
  if (!agent.is_string()) throw parse_error("'truth_agent' must be a string", 0, "truth_agent");
  req.truth_agent = agent.get<std::string>();
  const auto& step = need("truth_step");
  if (!step.is_number_integer() || step.get<std::int64_t>() < 0) {
    throw parse_error("'truth_step' must be a non-negative integer", 0, "truth_step");
  }
  req.truth_step = step.get<std::size_t>();
  for (const char* key : {"lambda", "sigma"}) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) continue;
    if (!it->is_number()) throw parse_error(std::string("'") + key + "' must be a number", 0, key);
    (std::string_view(key) == "lambda" ? req.params.lambda : req.params.sigma) = it->get<double>();
  }
  validate_params(req.params);
  return req;
}

RewardBreakdown score_request(const ScoreRequest& req) {
  return score(parse_output(req.raw_text), AgentId{kNoIndex, req.truth_agent}, req.truth_step, req.params);
}

nlohmann::ordered_json breakdown_json(const RewardBreakdown& r) {
  nlohmann::ordered_json j;
  j["format"] = r.format;
  j["agent"] = r.agent;
  j["step"] = r.step;
  j["total"] = r.total;
  return j;
}

std::string handle_score_line(std::string_view line, const RewardParams& defaults) {
  try {
    const auto j = nlohmann::ordered_json::parse(line);
    return breakdown_json(score_request(parse_score_request(j, defaults))).dump();
  } catch (const std::exception& e) {
    nlohmann::ordered_json err;
    err["error"] = e.what();
    return err.dump();
  }
}

}  // namespace faultline::reward
