#include "faultline/injector.hpp"

#include <array>
#include <cctype>
#include <numeric>
#include <random>

#include "faultline/annotator.hpp"
#include "faultline/errors.hpp"
#include "faultline/parallel.hpp"
#include "faultline/prompts.hpp"
#include "faultline/text.hpp"

namespace faultline::injector {

namespace {

constexpr std::array<Mutation, 4> kMutations = {Mutation::numeric_corruption, Mutation::operand_swap,
                                                Mutation::instruction_negation, Mutation::truncation};

bool is_integer_token(std::string_view tok) {
  if (tok.empty()) return false;
  std::size_t i = (tok[0] == '-' && tok.size() > 1) ? 1 : 0;
  for (; i < tok.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(tok[i]))) return false;
  return true;
}

struct Span {
  std::size_t pos;
  std::size_t len;
};

std::vector<Span> word_spans(std::string_view s) {
  std::vector<Span> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.push_back({start, i - start});
  }
  return out;
}

}  // namespace

std::string_view to_string(PerturbationKind k) noexcept {
  return k == PerturbationKind::llm_backed ? "llm_backed" : "scripted_mutation";
}

std::string_view to_string(Mutation m) noexcept {
  switch (m) {
    case Mutation::numeric_corruption:
      return "numeric_corruption";
    case Mutation::operand_swap:
      return "operand_swap";
    case Mutation::instruction_negation:
      return "instruction_negation";
    case Mutation::truncation:
      return "truncation";
    case Mutation::any:
      break;
  }
  return "any";
}

Mutation parse_mutation(std::string_view name) {
  for (Mutation m : {Mutation::numeric_corruption, Mutation::operand_swap, Mutation::instruction_negation,
                     Mutation::truncation, Mutation::any}) {
    if (to_string(m) == name) return m;
  }
  throw config_error("unknown mutation '" + std::string(name) + "'");
}

std::string corrupt_number(std::string_view action, std::uint64_t seed) {
  std::string out(action);
  for (std::size_t i = out.size(); i-- > 0;) {
    if (std::isdigit(static_cast<unsigned char>(out[i]))) {
      const int d = out[i] - '0';
      out[i] = static_cast<char>('0' + (d + 1 + static_cast<int>(seed % 9)) % 10);
      return out;
    }
  }
  return out;
}

// Swaps the first two differing operands: integer tokens, else items of a comma list.
std::string swap_operands(std::string_view action) {
  const auto words = word_spans(action);
  std::vector<Span> ints;
  for (const Span& w : words)
    if (is_integer_token(action.substr(w.pos, w.len))) ints.push_back(w);
  for (std::size_t a = 0; a < ints.size(); ++a) {
    for (std::size_t b = a + 1; b < ints.size(); ++b) {
      const auto x = action.substr(ints[a].pos, ints[a].len);
      const auto y = action.substr(ints[b].pos, ints[b].len);
      if (x == y) continue;
      std::string out;
      out.append(action.substr(0, ints[a].pos)).append(y);
      out.append(action.substr(ints[a].pos + ints[a].len, ints[b].pos - ints[a].pos - ints[a].len)).append(x);
      out.append(action.substr(ints[b].pos + ints[b].len));
      return out;
    }
  }
  for (const Span& w : words) {
    const auto tok = action.substr(w.pos, w.len);
    auto items = text::split(tok, ',');
    if (items.size() < 2) continue;
    for (std::size_t b = 1; b < items.size(); ++b) {
      if (items[b] == items[0]) continue;
      std::swap(items[0], items[b]);
      std::string out;
      out.append(action.substr(0, w.pos)).append(text::join(items, ","));
      out.append(action.substr(w.pos + w.len));
      return out;
    }
  }
  return std::string(action);
}

std::string negate_instruction(std::string_view action) {
  static const std::vector<std::pair<std::string_view, std::string_view>> kFlips = {
      {"add", "sub"}, {"sub", "add"}, {"mul", "sub"},     {"sum", "max"},   {"max", "sum"},
      {"upper", "reverse"}, {"reverse", "upper"}, {"shift", "upper"}, {"yes", "no"}, {"no", "yes"},
      {"true", "false"},    {"false", "true"},    {"always", "never"}, {"never", "always"},
  };
  const auto words = word_spans(action);
  for (const Span& w : words) {
    const auto tok = action.substr(w.pos, w.len);
    for (const auto& [from, to] : kFlips) {
      if (tok == from) {
        return std::string(action.substr(0, w.pos)) + std::string(to) + std::string(action.substr(w.pos + w.len));
      }
    }
    // first op of a comma list, e.g. "reverse,upper"
    const std::size_t comma = tok.find(',');
    if (comma != std::string_view::npos) {
      for (const auto& [from, to] : kFlips) {
        if (tok.substr(0, comma) == from) {
          return std::string(action.substr(0, w.pos)) + std::string(to) +
                 std::string(action.substr(w.pos + comma));
        }
      }
    }
  }
  return "NOT " + std::string(action);
}

std::string truncate_content(std::string_view action) {
  const std::size_t keep = action.size() / 2;
  if (keep == 0) return std::string(action);
  return std::string(text::trim(action.substr(0, keep))).empty() ? std::string(action)
                                                                  : std::string(action.substr(0, keep));
}

std::string ScriptedMutation::apply(Mutation m, std::string_view action, std::uint64_t seed) {
  switch (m) {
    case Mutation::numeric_corruption:
      return corrupt_number(action, seed);
    case Mutation::operand_swap:
      return swap_operands(action);
    case Mutation::instruction_negation:
      return negate_instruction(action);
    case Mutation::truncation:
      return truncate_content(action);
    case Mutation::any:
      break;
  }
  for (std::size_t i = 0; i < kMutations.size(); ++i) {
    std::string out = apply(kMutations[(seed + i) % kMutations.size()], action, seed);
    if (out != action) return out;
  }
  return std::string(action);
}

std::string ScriptedMutation::corrupt(const PerturbationContext& ctx) {
  return apply(mutation_, ctx.trajectory.steps.at(ctx.step).action, ctx.seed);
}

LlmPerturbation::LlmPerturbation(llm::ChatClient& client, std::string prompt_template)
    : client_(client),
      template_(prompt_template.empty() ? std::string(prompts::default_attack_template())
                                        : std::move(prompt_template)) {}

std::string LlmPerturbation::render_prompt(const PerturbationContext& ctx) const {
  const Trajectory& t = ctx.trajectory;
  const Step& s = t.steps.at(ctx.step);
  return text::fill_template(template_, {{"task_id", t.task_id},
                                         {"question", t.query},
                                         {"ground_truth", t.ground_truth.value_or("")},
                                         {"model_prediction", t.final_answer},
                                         {"history", prompts::render_history(t.steps)},
                                         {"step", std::to_string(ctx.step)},
                                         {"agent", s.agent.name},
                                         {"original_action", s.action}});
}

std::string LlmPerturbation::corrupt(const PerturbationContext& ctx) {
  const std::vector<llm::ChatMessage> msgs = {{"user", render_prompt(ctx)}};
  return annotator::extract_json_field(client_.complete(msgs).text, "corrupted_action");
}

std::uint64_t item_seed(const Trajectory& t, std::uint64_t seed) noexcept {
  std::string identity = t.task_id;
  identity.push_back('\x1f');
  identity += t.system_name;
  identity.push_back('\x1f');
  identity += t.query;
  return mix_seed(seed, fnv1a64(identity));
}

std::vector<std::size_t> sample_points(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k > n) throw precondition_error("cannot sample " + std::to_string(k) + " of " + std::to_string(n));
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

InjectionReport inject(const SystemSpec& system, const Trajectory& t, PerturbationOperator& op, std::size_t k,
                       std::uint64_t seed) {
  if (t.outcome != Outcome::success) throw precondition_error("inject needs a successful trajectory");
  if (k == 0 || k > t.steps.size()) {
    throw precondition_error("k must be in [1, " + std::to_string(t.steps.size()) + "], got " + std::to_string(k));
  }
  const std::uint64_t base = item_seed(t, seed);

  InjectionReport report;
  report.sampled_points = sample_points(t.steps.size(), k, base);
  for (std::size_t point : report.sampled_points) {
    const std::string& original = t.steps[point].action;
    std::string corrupted = op.corrupt({t, point, mix_seed(base, point)});
    if (corrupted == original) {
      throw contract_error("perturbation '" + op.id() + "' returned the original action at step " +
                           std::to_string(point));
    }
    Trajectory replay = rectify(system, t, {point, corrupted});
    report.attempts.push_back({point, corrupted, replay.outcome});
    if (replay.outcome == Outcome::failure) {
      Annotation a;
      a.agent = active_agent(t, point);
      a.step = point;
      a.method = AnnotationMethod::injected;
      a.rationale = "corrupting step " + std::to_string(point) + " with " + op.id() + " fails the task";
      a.corrupted_action = std::move(corrupted);
      report.result = AnnotatedTrajectory{std::move(replay), std::move(a)};
      return report;
    }
  }
  return report;
}

PositiveSet build_positive_set(const SystemResolver& systems, std::span<const Trajectory> successes,
                               PerturbationOperator& op, std::size_t k, std::uint64_t seed, std::size_t workers) {
  struct Slot {
    std::optional<InjectionReport> report;
    std::string error;
  };
  std::vector<Slot> slots(successes.size());
  parallel_for(successes.size(), workers, [&](std::size_t i) {
    try {
      slots[i].report = inject(systems(successes[i].system_name), successes[i], op, k, seed);
    } catch (const std::exception& e) {
      slots[i].error = e.what();
    }
  });

  PositiveSet out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i].report) {
      out.failures.push_back({successes[i].task_id, std::move(slots[i].error)});
    } else if (slots[i].report->result) {
      out.annotated.push_back(std::move(*slots[i].report->result));
    } else {
      out.barren.push_back({successes[i].task_id, std::move(*slots[i].report)});
    }
  }
  return out;
}

}  // namespace faultline::injector
