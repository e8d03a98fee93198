#include "faultline/harness.hpp"

#include <cstdio>
#include <stdexcept>

#include "faultline/errors.hpp"

namespace faultline {

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// splitmix64 finalizer over the pair
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

const RosterEntry* SystemSpec::find_agent(std::string_view agent_name) const {
  for (const RosterEntry& e : roster) {
    if (e.id.name == agent_name) return &e;
  }
  return nullptr;
}

std::vector<std::string> validate_system(const SystemSpec& system) {
  std::vector<std::string> out;
  if (system.name.empty()) out.emplace_back("system name is empty");
  if (system.roster.empty()) out.emplace_back("roster is empty");
  for (std::size_t i = 0; i < system.roster.size(); ++i) {
    const RosterEntry& e = system.roster[i];
    if (e.id.index != i) out.push_back("roster entry " + std::to_string(i) + " carries index " + std::to_string(e.id.index));
    if (e.id.name.empty()) out.push_back("roster entry " + std::to_string(i) + " has no name");
    if (!e.policy) out.push_back("roster entry " + std::to_string(i) + " has no policy");
  }
  if (!system.scheduler) out.emplace_back("missing scheduler");
  if (!system.stop) out.emplace_back("missing stop rule");
  if (!system.answer) out.emplace_back("missing answer rule");
  if (!system.evaluator) out.emplace_back("missing evaluator");
  if (system.max_steps == 0) out.emplace_back("max_steps must be positive");
  return out;
}

namespace {

void require_valid(const SystemSpec& system) {
  auto problems = validate_system(system);
  if (!problems.empty()) throw precondition_error("invalid system '" + system.name + "': " + problems.front());
}

std::vector<Step> visible_history(const SystemSpec& system, std::span<const Step> history, const AgentId& actor) {
  if (system.visibility) return system.visibility(history, actor);
  return {history.begin(), history.end()};
}

std::string act(const SystemSpec& system, const RosterEntry& entry, std::string_view query,
                std::span<const Step> history) {
  const std::vector<Step> visible = visible_history(system, history, entry.id);
  PolicyContext ctx;
  ctx.query = query;
  ctx.visible = visible;
  if (!history.empty() && history.back().feedback) ctx.pending_feedback = *history.back().feedback;
  ctx.step = history.size();
  ctx.seed = mix_seed(system.seed, history.size());
  std::string action = entry.policy(ctx);
  if (action.empty()) {
    throw contract_error("policy of '" + entry.id.name + "' produced an empty action at step " +
                         std::to_string(history.size()));
  }
  return action;
}

void append_step(const SystemSpec& system, std::vector<Step>& history, std::string_view query, AgentId agent,
                 std::string action) {
  Step s;
  s.index = history.size();
  s.agent = std::move(agent);
  s.action = std::move(action);
  if (system.transition) s.feedback = system.transition(s, history, query);
  history.push_back(std::move(s));
}

// Continues a (possibly empty) history until the stop rule fires or the budget runs out.
Trajectory simulate(const SystemSpec& system, std::string_view query, std::optional<std::string> ground_truth,
                    std::string task_id, std::vector<Step> history) {
  bool exhausted = false;
  while (history.empty() || !system.stop(history)) {
    if (history.size() >= system.max_steps) {
      exhausted = true;
      break;
    }
    const std::size_t who = system.scheduler(history.size(), history, query);
    if (who >= system.roster.size()) {
      throw contract_error("scheduler of '" + system.name + "' returned non-member " + std::to_string(who));
    }
    const RosterEntry& entry = system.roster[who];
    append_step(system, history, query, entry.id, act(system, entry, query, history));
  }

  Trajectory t;
  t.task_id = std::move(task_id);
  t.query = std::string(query);
  t.system_name = system.name;
  t.final_answer = system.answer(history);
  t.ground_truth = std::move(ground_truth);
  if (exhausted) {
    t.outcome = Outcome::failure;
    t.feedback_log = std::string(kBudgetExhausted) + ": stopped after " + std::to_string(history.size()) + " steps";
  } else {
    t.outcome = system.evaluator(t.final_answer, t.ground_truth) ? Outcome::success : Outcome::failure;
  }
  t.steps = std::move(history);
  return t;
}

std::string default_task_id(const SystemSpec& system, std::string_view query) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(query)));
  return system.name + "/" + buf;
}

}  // namespace

Trajectory run(const SystemSpec& system, std::string_view query, std::optional<std::string> ground_truth,
               std::string task_id) {
  if (query.empty()) throw precondition_error("query must be non-empty");
  require_valid(system);
  if (task_id.empty()) task_id = default_task_id(system, query);
  return simulate(system, query, std::move(ground_truth), std::move(task_id), {});
}

Trajectory rectify(const SystemSpec& system, const Trajectory& source, const ReplayDirective& directive) {
  if (directive.pivot_step >= source.steps.size()) {
    throw std::out_of_range("pivot step " + std::to_string(directive.pivot_step) + " outside trajectory of " +
                            std::to_string(source.steps.size()) + " steps");
  }
  if (source.query.empty()) throw precondition_error("source trajectory has an empty query");
  if (directive.replacement_action.empty()) throw precondition_error("replacement action must be non-empty");
  require_valid(system);

  std::vector<Step> history(source.steps.begin(),
                            source.steps.begin() + static_cast<std::ptrdiff_t>(directive.pivot_step));
  append_step(system, history, source.query, source.steps[directive.pivot_step].agent,
              directive.replacement_action);
  return simulate(system, source.query, source.ground_truth, source.task_id, std::move(history));
}

std::string policy_action(const SystemSpec& system, const Trajectory& source, std::size_t step) {
  const AgentId& actor = active_agent(source, step);
  const RosterEntry* entry = system.find_agent(actor.name);
  if (entry == nullptr) {
    throw precondition_error("system '" + system.name + "' has no agent named '" + actor.name + "'");
  }
  std::span<const Step> prefix(source.steps.data(), step);
  return act(system, *entry, source.query, prefix);
}

std::map<std::size_t, std::string> oracle_fixes(const SystemSpec& reference, const Trajectory& source) {
  std::map<std::size_t, std::string> fixes;
  for (std::size_t t = 0; t < source.steps.size(); ++t) fixes.emplace(t, policy_action(reference, source, t));
  return fixes;
}

std::vector<DecisivePair> decisive_candidates(const SystemSpec& system, const Trajectory& source,
                                              const std::map<std::size_t, std::string>& fixes) {
  if (source.outcome != Outcome::failure) throw precondition_error("decisive search needs a failed trajectory");
  std::vector<DecisivePair> out;
  for (std::size_t t = 0; t < source.steps.size(); ++t) {
    auto it = fixes.find(t);
    if (it == fixes.end()) throw precondition_error("no oracle fix for step " + std::to_string(t));
    const Trajectory replay = rectify(system, source, {t, it->second});
    if (replay.outcome == Outcome::success) out.push_back({source.steps[t].agent, t});
  }
  return out;
}

std::optional<DecisivePair> brute_force_decisive(const SystemSpec& system, const Trajectory& source,
                                                 const std::map<std::size_t, std::string>& fixes) {
  const auto all = decisive_candidates(system, source, fixes);
  if (all.empty()) return std::nullopt;
  const DecisivePair* best = &all.front();
  for (const DecisivePair& p : all) {
    if (p.step < best->step) best = &p;
  }
  return *best;
}

}  // namespace faultline
