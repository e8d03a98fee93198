#include "faultline/toy_systems.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <set>

#include "faultline/errors.hpp"
#include "faultline/text.hpp"

namespace faultline::toy {

namespace {

using text::last_integer;
using text::parse_int;
using text::trim;

// ---- shared pieces -------------------------------------------------------

struct Bugs {
  std::set<std::string> on;
  bool has(std::string_view b) const { return on.contains(std::string(b)); }
};

std::vector<Step> only_from(std::span<const Step> history, std::initializer_list<std::string_view> agents) {
  std::vector<Step> out;
  for (const Step& s : history) {
    for (std::string_view a : agents) {
      if (s.agent.name == a) {
        out.push_back(s);
        break;
      }
    }
  }
  return out;
}

const Step* latest_by(std::span<const Step> steps, std::string_view agent) {
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    if (it->agent.name == agent) return &*it;
  }
  return nullptr;
}

std::size_t count_by(std::span<const Step> steps, std::string_view agent) {
  return static_cast<std::size_t>(
      std::count_if(steps.begin(), steps.end(), [&](const Step& s) { return s.agent.name == agent; }));
}

StopRule stop_after(std::string agent) {
  return [agent = std::move(agent)](std::span<const Step> h) { return !h.empty() && h.back().agent.name == agent; };
}

AnswerRule final_line() {
  return [](std::span<const Step> h) -> std::string {
    if (h.empty()) return {};
    const std::string_view a = trim(h.back().action);
    if (!text::starts_with_word(a, "FINAL")) return {};
    return std::string(trim(a.substr(5)));
  };
}

OutcomeRule exact_match() {
  return [](std::string_view answer, const std::optional<std::string>& truth) {
    return truth.has_value() && trim(answer) == trim(*truth);
  };
}

std::vector<RosterEntry> roster(std::vector<std::pair<std::string, AgentPolicy>> agents) {
  std::vector<RosterEntry> out;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    out.push_back({AgentId{i, std::move(agents[i].first)}, std::move(agents[i].second)});
  }
  return out;
}

std::string int_str(std::int64_t v) { return std::to_string(v); }

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

// ---- arithmetic ----------------------------------------------------------

struct BinaryQuery {
  char op;
  std::int64_t lhs;
  std::int64_t rhs;
};

std::optional<BinaryQuery> parse_binary(std::string_view q) {
  q = trim(q);
  for (std::size_t i = 1; i < q.size(); ++i) {
    const char c = q[i];
    if (c == '+' || c == '-' || c == '*') {
      auto a = parse_int(q.substr(0, i));
      auto b = parse_int(q.substr(i + 1));
      if (a && b) return BinaryQuery{c, *a, *b};
      return std::nullopt;
    }
  }
  return std::nullopt;
}

std::string_view op_word(char op) {
  switch (op) {
    case '+':
      return "add";
    case '-':
      return "sub";
    default:
      return "mul";
  }
}

std::optional<std::int64_t> apply_op(std::string_view op, std::int64_t a, std::int64_t b) {
  std::int64_t r = 0;
  if (op == "add") {
    if (__builtin_add_overflow(a, b, &r)) return std::nullopt;
  } else if (op == "sub") {
    if (__builtin_sub_overflow(a, b, &r)) return std::nullopt;
  } else if (op == "mul") {
    if (__builtin_mul_overflow(a, b, &r)) return std::nullopt;
  } else {
    return std::nullopt;
  }
  return r;
}

// Column addition that forgets every carry: 17 + 25 -> 32.
std::optional<std::int64_t> add_without_carry(std::int64_t a, std::int64_t b) {
  if (a < 0 || b < 0) return apply_op("add", a, b);
  std::int64_t out = 0;
  std::int64_t place = 1;
  while (a > 0 || b > 0) {
    out += ((a % 10 + b % 10) % 10) * place;
    a /= 10;
    b /= 10;
    if (place > 100000000000000000LL) break;
    place *= 10;
  }
  return out;
}

AgentPolicy arithmetic_planner(const Bugs& bugs) {
  const bool swap = bugs.has("planner_swaps_operands");
  const bool misread = bugs.has("planner_misreads_op");
  return [swap, misread](const PolicyContext& ctx) -> std::string {
    auto q = parse_binary(ctx.query);
    if (!q) return "PLAN unknown";
    std::string_view op = op_word(q->op);
    if (misread) op = (op == "add") ? "sub" : "add";
    std::int64_t a = q->lhs;
    std::int64_t b = q->rhs;
    if (swap) std::swap(a, b);
    return "PLAN " + std::string(op) + " " + int_str(a) + " " + int_str(b);
  };
}

std::string solve_plan(std::string_view plan_action, bool drop_carry, bool off_by_one) {
  const auto tok = text::split_ws(plan_action);
  if (tok.size() != 4 || tok[0] != "PLAN") return "RESULT none";
  auto a = parse_int(tok[2]);
  auto b = parse_int(tok[3]);
  if (!a || !b) return "RESULT none";
  std::optional<std::int64_t> r = (drop_carry && tok[1] == "add") ? add_without_carry(*a, *b) : apply_op(tok[1], *a, *b);
  if (!r) return "RESULT none";
  if (off_by_one) *r += 1;
  return "RESULT " + int_str(*r);
}

AgentPolicy arithmetic_solver(const Bugs& bugs) {
  const bool drop = bugs.has("solver_drops_carry");
  const bool obo = bugs.has("solver_off_by_one");
  return [drop, obo](const PolicyContext& ctx) -> std::string {
    const Step* plan = latest_by(ctx.visible, "Planner");
    if (plan == nullptr) return "RESULT none";
    return solve_plan(plan->action, drop, obo);
  };
}

AgentPolicy arithmetic_verifier(const Bugs& bugs) {
  const bool drop_sign = bugs.has("verifier_drops_sign");
  const bool truncate = bugs.has("verifier_truncates");
  return [drop_sign, truncate](const PolicyContext& ctx) -> std::string {
    const Step* res = latest_by(ctx.visible, "Solver");
    auto n = res ? last_integer(res->action) : std::nullopt;
    if (!n) return "FINAL none";
    std::int64_t v = *n;
    if (drop_sign && v < 0) v = -v;
    if (truncate && (v >= 10 || v <= -10)) v /= 10;
    return "FINAL " + int_str(v);
  };
}

SystemSpec make_arithmetic(const Bugs& bugs) {
  SystemSpec s;
  s.roster = roster({{"Planner", arithmetic_planner(bugs)},
                     {"Solver", arithmetic_solver(bugs)},
                     {"Verifier", arithmetic_verifier(bugs)}});
  s.scheduler = [](std::size_t step, std::span<const Step>, std::string_view) { return std::min<std::size_t>(step, 2); };
  s.stop = stop_after("Verifier");
  s.visibility = [](std::span<const Step> h, const AgentId& actor) -> std::vector<Step> {
    if (actor.name == "Solver") return only_from(h, {"Planner"});
    if (actor.name == "Verifier") return only_from(h, {"Planner", "Solver"});
    return {};
  };
  s.answer = final_line();
  s.evaluator = exact_match();
  return s;
}

std::string solve_arithmetic(std::string_view query) {
  auto q = parse_binary(query);
  if (!q) throw precondition_error("malformed arithmetic query '" + std::string(query) + "'");
  auto r = apply_op(op_word(q->op), q->lhs, q->rhs);
  if (!r) throw precondition_error("arithmetic overflow in '" + std::string(query) + "'");
  return int_str(*r);
}

std::string random_arithmetic(std::mt19937_64& rng) {
  const std::size_t r = pick(rng, 10);
  const char op = r < 5 ? '+' : (r < 8 ? '-' : '*');
  const std::size_t bound = op == '*' ? 100 : 1000;
  return int_str(static_cast<std::int64_t>(pick(rng, bound))) + op + int_str(static_cast<std::int64_t>(pick(rng, bound)));
}

// ---- string relay --------------------------------------------------------

const std::vector<std::pair<std::string, std::string>>& relay_owners() {
  static const std::vector<std::pair<std::string, std::string>> owners = {
      {"reverse", "Reverser"}, {"upper", "Upcaser"}, {"shift", "Shifter"}};
  return owners;
}

struct RelayQuery {
  std::vector<std::string> ops;
  std::string value;
};

// "ops=reverse,upper; text=hello"
std::optional<RelayQuery> parse_relay(std::string_view q) {
  q = trim(q);
  const std::size_t semi = q.find(';');
  if (semi == std::string_view::npos) return std::nullopt;
  std::string_view ops = trim(q.substr(0, semi));
  std::string_view txt = trim(q.substr(semi + 1));
  if (!ops.starts_with("ops=") || !txt.starts_with("text=")) return std::nullopt;
  RelayQuery out;
  for (auto& op : text::split(ops.substr(4), ',')) {
    std::string o(trim(op));
    if (!o.empty()) out.ops.push_back(std::move(o));
  }
  out.value = std::string(trim(txt.substr(5)));
  return out;
}

// "ROUTE reverse,upper VALUE hello"; ops "-" means none
std::vector<std::string> parse_route(std::string_view action) {
  const auto tok = text::split_ws(action);
  if (tok.size() < 2 || tok[0] != "ROUTE") return {};
  if (tok[1] == "-") return {};
  return text::split(tok[1], ',');
}

std::string latest_value(std::span<const Step> steps) {
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    const std::size_t pos = it->action.rfind("VALUE");
    if (pos != std::string::npos) return std::string(trim(std::string_view(it->action).substr(pos + 5)));
  }
  return {};
}

std::string shift_letters(std::string s, int by) {
  for (char& c : s) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>('a' + (c - 'a' + by) % 26);
    else if (c >= 'A' && c <= 'Z') c = static_cast<char>('A' + (c - 'A' + by) % 26);
  }
  return s;
}

std::string upper(std::string s, std::size_t limit) {
  for (std::size_t i = 0; i < s.size() && i < limit; ++i) {
    s[i] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[i])));
  }
  return s;
}

std::string apply_relay_op(std::string_view op, std::string v) {
  if (op == "reverse") return {v.rbegin(), v.rend()};
  if (op == "upper") return upper(std::move(v), std::string::npos);
  if (op == "shift") return shift_letters(std::move(v), 1);
  return v;
}

SystemSpec make_string_relay(const Bugs& bugs) {
  const bool drop_last = bugs.has("dispatcher_drops_last_op");
  const bool keep_first = bugs.has("reverser_keeps_first");
  const bool half = bugs.has("upcaser_half");
  const bool dbl = bugs.has("shifter_double");
  const bool trims = bugs.has("writer_trims");

  AgentPolicy dispatcher = [drop_last](const PolicyContext& ctx) -> std::string {
    auto q = parse_relay(ctx.query);
    if (!q) return "ROUTE - VALUE none";
    if (drop_last && q->ops.size() > 1) q->ops.pop_back();
    const std::string ops = q->ops.empty() ? "-" : text::join(q->ops, ",");
    return "ROUTE " + ops + " VALUE " + q->value;
  };
  AgentPolicy reverser = [keep_first](const PolicyContext& ctx) -> std::string {
    std::string v = latest_value(ctx.visible);
    if (keep_first && v.size() > 1) return "VALUE " + v.substr(0, 1) + std::string(v.rbegin(), v.rend() - 1);
    return "VALUE " + apply_relay_op("reverse", std::move(v));
  };
  AgentPolicy upcaser = [half](const PolicyContext& ctx) -> std::string {
    std::string v = latest_value(ctx.visible);
    return "VALUE " + upper(v, half ? v.size() / 2 : std::string::npos);
  };
  AgentPolicy shifter = [dbl](const PolicyContext& ctx) -> std::string {
    return "VALUE " + shift_letters(latest_value(ctx.visible), dbl ? 2 : 1);
  };
  AgentPolicy writer = [trims](const PolicyContext& ctx) -> std::string {
    std::string v = latest_value(ctx.visible);
    if (trims && !v.empty()) v.pop_back();
    return "FINAL " + v;
  };

  SystemSpec s;
  s.roster = roster({{"Dispatcher", dispatcher},
                     {"Reverser", reverser},
                     {"Upcaser", upcaser},
                     {"Shifter", shifter},
                     {"Writer", writer}});
  s.scheduler = [](std::size_t step, std::span<const Step> h, std::string_view) -> std::size_t {
    if (step == 0) return 0;
    const std::vector<std::string> ops = h.front().agent.name == "Dispatcher" ? parse_route(h.front().action)
                                                                               : std::vector<std::string>{};
    const std::size_t i = step - 1;
    if (i >= ops.size()) return 4;
    const auto& owners = relay_owners();
    for (std::size_t k = 0; k < owners.size(); ++k) {
      if (owners[k].first == ops[i]) return k + 1;
    }
    return 4;  // unknown op aborts the relay
  };
  s.stop = stop_after("Writer");
  s.answer = final_line();
  s.evaluator = exact_match();
  return s;
}

std::string solve_relay(std::string_view query) {
  auto q = parse_relay(query);
  if (!q) throw precondition_error("malformed relay query '" + std::string(query) + "'");
  std::string v = q->value;
  for (const auto& op : q->ops) v = apply_relay_op(op, std::move(v));
  return v;
}

std::string random_relay(std::mt19937_64& rng) {
  const std::size_t n_ops = 1 + pick(rng, 3);
  std::vector<std::string> ops;
  for (std::size_t i = 0; i < n_ops; ++i) ops.push_back(relay_owners()[pick(rng, 3)].first);
  const std::size_t len = 3 + pick(rng, 6);
  std::string word;
  for (std::size_t i = 0; i < len; ++i) word += static_cast<char>('a' + pick(rng, 26));
  return "ops=" + text::join(ops, ",") + "; text=" + word;
}

// ---- lookup chain --------------------------------------------------------

std::optional<int> price_of(std::string_view key) {
  for (const auto& [k, v] : price_table()) {
    if (k == key) return v;
  }
  return std::nullopt;
}

struct LookupQuery {
  std::string op;
  std::vector<std::string> keys;
};

// "sum: apple, fig"
std::optional<LookupQuery> parse_lookup(std::string_view q) {
  q = trim(q);
  const std::size_t colon = q.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  LookupQuery out;
  out.op = std::string(trim(q.substr(0, colon)));
  if (out.op != "sum" && out.op != "max") return std::nullopt;
  for (auto& k : text::split(q.substr(colon + 1), ',')) {
    std::string key(trim(k));
    if (!key.empty()) out.keys.push_back(std::move(key));
  }
  if (out.keys.empty()) return std::nullopt;
  return out;
}

// "PLAN sum KEYS apple,fig"
std::optional<LookupQuery> parse_lookup_plan(std::string_view action) {
  const auto tok = text::split_ws(action);
  if (tok.size() != 4 || tok[0] != "PLAN" || tok[2] != "KEYS") return std::nullopt;
  LookupQuery out{tok[1], {}};
  for (auto& k : text::split(tok[3], ',')) {
    if (!k.empty()) out.keys.push_back(k);
  }
  return out;
}

std::int64_t combine(std::string_view op, const std::vector<std::int64_t>& values) {
  if (values.empty()) return 0;
  if (op == "max") return *std::max_element(values.begin(), values.end());
  std::int64_t s = 0;
  for (auto v : values) s += v;
  return s;
}

std::string next_key(std::string_view key) {
  const auto& table = price_table();
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i].first == key) return table[(i + 1) % table.size()].first;
  }
  return std::string(key);
}

SystemSpec make_lookup_chain(const Bugs& bugs) {
  const bool drop_first = bugs.has("router_drops_first_key");
  const bool wrong_key = bugs.has("retriever_wrong_key");
  const bool ignore_last = bugs.has("calculator_ignores_last");
  const bool wrong_op = bugs.has("calculator_wrong_op");
  const bool rounds = bugs.has("reporter_rounds");

  AgentPolicy router = [drop_first](const PolicyContext& ctx) -> std::string {
    auto q = parse_lookup(ctx.query);
    if (!q) return "PLAN none";
    if (drop_first && q->keys.size() > 1) q->keys.erase(q->keys.begin());
    return "PLAN " + q->op + " KEYS " + text::join(q->keys, ",");
  };
  AgentPolicy retriever = [wrong_key](const PolicyContext& ctx) -> std::string {
    const Step* plan = latest_by(ctx.visible, "Router");
    auto p = plan ? parse_lookup_plan(plan->action) : std::nullopt;
    const std::size_t done = count_by(ctx.visible, "Retriever");
    if (!p || done >= p->keys.size()) return "GET none";
    std::string key = p->keys[done];
    if (wrong_key && done == 1) key = next_key(key);
    return "GET " + key;
  };
  AgentPolicy calculator = [ignore_last, wrong_op](const PolicyContext& ctx) -> std::string {
    const Step* plan = latest_by(ctx.visible, "Router");
    auto p = plan ? parse_lookup_plan(plan->action) : std::nullopt;
    std::string op = p ? p->op : "sum";
    if (wrong_op) op = (op == "sum") ? "max" : "sum";
    std::vector<std::int64_t> values;
    for (const Step& s : ctx.visible) {
      if (s.agent.name != "Retriever" || !s.feedback) continue;
      if (s.feedback->find('=') == std::string::npos) {
        values.push_back(0);
        continue;
      }
      values.push_back(last_integer(*s.feedback).value_or(0));
    }
    if (ignore_last && !values.empty()) values.pop_back();
    return "VALUE " + int_str(combine(op, values));
  };
  AgentPolicy reporter = [rounds](const PolicyContext& ctx) -> std::string {
    const Step* calc = latest_by(ctx.visible, "Calculator");
    auto n = calc ? last_integer(calc->action) : std::nullopt;
    if (!n) return "FINAL none";
    std::int64_t v = *n;
    if (rounds) v = ((v + 5) / 10) * 10;
    return "FINAL " + int_str(v);
  };

  SystemSpec s;
  s.roster = roster({{"Router", router}, {"Retriever", retriever}, {"Calculator", calculator}, {"Reporter", reporter}});
  s.scheduler = [](std::size_t step, std::span<const Step> h, std::string_view) -> std::size_t {
    if (step == 0) return 0;
    auto p = h.front().agent.name == "Router" ? parse_lookup_plan(h.front().action) : std::nullopt;
    const std::size_t wanted = p ? p->keys.size() : 0;
    if (count_by(h, "Retriever") < wanted && count_by(h, "Calculator") == 0) return 1;
    if (count_by(h, "Calculator") == 0) return 2;
    return 3;
  };
  s.stop = stop_after("Reporter");
  s.visibility = [](std::span<const Step> h, const AgentId& actor) -> std::vector<Step> {
    if (actor.name == "Retriever" || actor.name == "Calculator") return only_from(h, {"Router", "Retriever"});
    if (actor.name == "Reporter") return only_from(h, {"Calculator"});
    return {};
  };
  s.transition = [](const Step& acted, std::span<const Step>, std::string_view) -> std::optional<std::string> {
    if (acted.agent.name != "Retriever") return std::nullopt;
    const auto tok = text::split_ws(acted.action);
    if (tok.size() != 2 || tok[0] != "GET") return "tool error: malformed request";
    if (auto v = price_of(tok[1])) return tok[1] + "=" + std::to_string(*v);
    return tok[1] + " NOT_FOUND";
  };
  s.answer = final_line();
  s.evaluator = exact_match();
  return s;
}

std::string solve_lookup(std::string_view query) {
  auto q = parse_lookup(query);
  if (!q) throw precondition_error("malformed lookup query '" + std::string(query) + "'");
  std::vector<std::int64_t> values;
  for (const auto& k : q->keys) values.push_back(price_of(k).value_or(0));
  return int_str(combine(q->op, values));
}

std::string random_lookup(std::mt19937_64& rng) {
  const auto& table = price_table();
  std::vector<std::string> keys;
  const std::size_t n = 1 + pick(rng, 4);
  while (keys.size() < n) {
    const std::string& k = table[pick(rng, table.size())].first;
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  }
  return std::string(pick(rng, 3) == 0 ? "max" : "sum") + ": " + text::join(keys, ", ");
}

// ---- majority vote -------------------------------------------------------

SystemSpec make_majority_vote(const Bugs& bugs) {
  auto solver = [](bool drop) -> AgentPolicy {
    return [drop](const PolicyContext& ctx) -> std::string {
      auto q = parse_binary(ctx.query);
      if (!q) return "RESULT none";
      return solve_plan("PLAN " + std::string(op_word(q->op)) + " " + int_str(q->lhs) + " " + int_str(q->rhs), drop,
                        false);
    };
  };
  SystemSpec s;
  s.roster = roster({{"SolverA", solver(bugs.has("a_drops_carry"))},
                     {"SolverB", solver(bugs.has("b_drops_carry"))},
                     {"SolverC", solver(bugs.has("c_drops_carry"))}});
  s.scheduler = [](std::size_t step, std::span<const Step>, std::string_view) { return std::min<std::size_t>(step, 2); };
  s.stop = [](std::span<const Step> h) { return h.size() >= 3; };
  s.visibility = [](std::span<const Step>, const AgentId&) { return std::vector<Step>{}; };
  s.answer = [](std::span<const Step> h) -> std::string {
    std::vector<std::int64_t> votes;
    for (const Step& st : h) {
      if (auto v = last_integer(st.action)) votes.push_back(*v);
    }
    for (auto v : votes) {
      if (std::count(votes.begin(), votes.end(), v) >= 2) return int_str(v);
    }
    return "none";
  };
  s.evaluator = exact_match();
  return s;
}

}  // namespace

const std::vector<std::pair<std::string, int>>& price_table() {
  static const std::vector<std::pair<std::string, int>> table = {
      {"apple", 3}, {"banana", 5}, {"cherry", 7}, {"date", 11}, {"elder", 13},
      {"fig", 17},  {"grape", 19}, {"kiwi", 23},  {"lemon", 29}, {"mango", 31}};
  return table;
}

std::string_view to_string(Family f) noexcept {
  switch (f) {
    case Family::arithmetic:
      return "arithmetic";
    case Family::string_relay:
      return "string_relay";
    case Family::lookup_chain:
      return "lookup_chain";
    case Family::majority_vote:
      return "majority_vote";
  }
  return "arithmetic";
}

std::optional<Family> parse_family(std::string_view s) noexcept {
  for (Family f : {Family::arithmetic, Family::string_relay, Family::lookup_chain, Family::majority_vote}) {
    if (to_string(f) == s) return f;
  }
  return std::nullopt;
}

const std::vector<Family>& workload_families() {
  static const std::vector<Family> fams = {Family::arithmetic, Family::string_relay, Family::lookup_chain};
  return fams;
}

const std::vector<std::string>& bug_switches(Family f) {
  static const std::vector<std::string> arithmetic = {"planner_misreads_op", "planner_swaps_operands",
                                                      "solver_drops_carry",  "solver_off_by_one",
                                                      "verifier_drops_sign", "verifier_truncates"};
  static const std::vector<std::string> relay = {"dispatcher_drops_last_op", "reverser_keeps_first", "shifter_double",
                                                 "upcaser_half", "writer_trims"};
  static const std::vector<std::string> lookup = {"calculator_ignores_last", "calculator_wrong_op", "reporter_rounds",
                                                  "retriever_wrong_key", "router_drops_first_key"};
  static const std::vector<std::string> vote = {"a_drops_carry", "b_drops_carry", "c_drops_carry"};
  switch (f) {
    case Family::arithmetic:
      return arithmetic;
    case Family::string_relay:
      return relay;
    case Family::lookup_chain:
      return lookup;
    case Family::majority_vote:
      return vote;
  }
  return arithmetic;
}

std::string system_name(const ToyConfig& cfg) {
  std::set<std::string> bugs(cfg.bugs.begin(), cfg.bugs.end());
  std::string name(to_string(cfg.family));
  for (const auto& b : bugs) name += "+" + b;
  return name;
}

ToyConfig parse_system_name(std::string_view name) {
  const auto parts = text::split(name, '+');
  auto fam = parse_family(parts.front());
  if (!fam) throw precondition_error("unknown toy system family '" + parts.front() + "'");
  ToyConfig cfg;
  cfg.family = *fam;
  const auto& known = bug_switches(*fam);
  for (std::size_t i = 1; i < parts.size(); ++i) {
    if (std::find(known.begin(), known.end(), parts[i]) == known.end()) {
      throw precondition_error("unknown bug switch '" + parts[i] + "' for " + parts.front());
    }
    cfg.bugs.push_back(parts[i]);
  }
  return cfg;
}

SystemSpec make_system(const ToyConfig& cfg) {
  Bugs bugs;
  const auto& known = bug_switches(cfg.family);
  for (const auto& b : cfg.bugs) {
    if (std::find(known.begin(), known.end(), b) == known.end()) {
      throw precondition_error("unknown bug switch '" + b + "'");
    }
    bugs.on.insert(b);
  }
  SystemSpec s;
  switch (cfg.family) {
    case Family::arithmetic:
      s = make_arithmetic(bugs);
      break;
    case Family::string_relay:
      s = make_string_relay(bugs);
      break;
    case Family::lookup_chain:
      s = make_lookup_chain(bugs);
      break;
    case Family::majority_vote:
      s = make_majority_vote(bugs);
      break;
  }
  s.name = system_name(cfg);
  s.max_steps = cfg.max_steps;
  return s;
}

SystemSpec system_from_name(std::string_view name) { return make_system(parse_system_name(name)); }

SystemSpec reference_for(std::string_view name) {
  ToyConfig cfg = parse_system_name(name);
  cfg.bugs.clear();
  return make_system(cfg);
}

std::string_view domain_of(Family f) noexcept {
  switch (f) {
    case Family::string_relay:
      return "coding";
    case Family::lookup_chain:
      return "agentic";
    default:
      return "math";
  }
}

std::string solve(Family f, std::string_view query) {
  switch (f) {
    case Family::string_relay:
      return solve_relay(query);
    case Family::lookup_chain:
      return solve_lookup(query);
    default:
      return solve_arithmetic(query);
  }
}

std::vector<ToyTask> generate_tasks(Family f, std::size_t count, std::uint64_t seed, double bug_rate) {
  if (bug_rate < 0.0 || bug_rate > 1.0) throw precondition_error("bug_rate must lie in [0, 1]");
  std::vector<ToyTask> out;
  out.reserve(count);
  const auto threshold = static_cast<std::uint64_t>(bug_rate * 1000.0);
  for (std::size_t i = 0; i < count; ++i) {
    std::mt19937_64 rng(mix_seed(seed, fnv1a64(to_string(f)) + i));
    ToyTask task;
    switch (f) {
      case Family::string_relay:
        task.query = random_relay(rng);
        break;
      case Family::lookup_chain:
        task.query = random_lookup(rng);
        break;
      default:
        task.query = random_arithmetic(rng);
        break;
    }
    task.ground_truth = solve(f, task.query);
    ToyConfig cfg{f, {}, 50};
    for (const auto& b : bug_switches(f)) {
      if (rng() % 1000 < threshold) cfg.bugs.push_back(b);
    }
    task.system_name = system_name(cfg);
    task.task_id = std::string(to_string(f)) + "-" + std::to_string(seed) + "-" + std::to_string(i);
    out.push_back(std::move(task));
  }
  return out;
}

}  // namespace faultline::toy
