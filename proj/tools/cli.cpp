#include "cli.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "faultline/annotator.hpp"
#include "faultline/errors.hpp"
#include "faultline/evaluator.hpp"
#include "faultline/harness.hpp"
#include "faultline/injector.hpp"
#include "faultline/llm_gateway.hpp"
#include "faultline/prompts.hpp"
#include "faultline/reward.hpp"
#include "faultline/store.hpp"
#include "faultline/toy_systems.hpp"

namespace faultline::cli {

namespace {

using json = nlohmann::ordered_json;

struct Options {
  // global
  std::string config_path;
  std::optional<std::string> cache_mode;
  std::optional<std::string> cache_path;
  std::string log_level = "warn";

  // shared across subcommands
  std::string in;
  std::vector<std::string> inputs;
  std::string out;
  std::string report;
  std::string backend;
  std::string prompt;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;

  // gen-tasks / collect
  std::string family = "all";
  std::size_t count = 0;
  double bug_rate = 0.35;
  std::optional<std::size_t> max_steps;

  // annotate
  std::optional<std::size_t> retries;
  std::optional<std::size_t> max_replays;
  std::optional<double> length_ratio;
  bool reject_leak = false;

  // inject
  std::string op = "any";
  std::optional<std::size_t> k;

  // score
  std::optional<double> lambda;
  std::optional<double> sigma;

  // judge / evaluate
  bool with_gt = false;
  std::string predictions;

  // split
  std::optional<double> ratio;
  std::string train;
  std::string test;

  // import-whowhen
  std::string domain = "agentic";
};

void emit_error(std::ostream& err, std::string_view kind, std::string_view message) {
  json j;
  j["error"] = {{"kind", kind}, {"message", message}};
  err << j.dump() << '\n';
}

store::RunConfig resolve_config(const Options& o) {
  store::RunConfig cfg = o.config_path.empty() ? store::RunConfig{} : store::load_config(o.config_path);
  if (o.lambda) cfg.lambda = *o.lambda;
  if (o.sigma) cfg.sigma = *o.sigma;
  if (o.k) cfg.k = *o.k;
  if (o.seed) cfg.seed = *o.seed;
  if (o.retries) cfg.retries_per_step = *o.retries;
  if (o.max_replays) cfg.max_replays = *o.max_replays;
  if (o.length_ratio) cfg.length_ratio = *o.length_ratio;
  if (o.reject_leak) cfg.reject_solution_leak = true;
  if (o.max_steps) cfg.max_steps = *o.max_steps;
  if (o.workers) cfg.workers = *o.workers;
  if (o.ratio) cfg.split_ratio = *o.ratio;
  if (o.cache_mode) cfg.cache_mode = *o.cache_mode;
  if (o.cache_path) cfg.cache_path = *o.cache_path;
  store::validate(cfg);
  return cfg;
}

SystemResolver toy_resolver(std::size_t max_steps) {
  return [max_steps](std::string_view name) {
    SystemSpec s = toy::system_from_name(name);
    s.max_steps = max_steps;
    return s;
  };
}

store::Domain domain_for_system(std::string_view system) {
  return store::parse_domain(toy::domain_of(toy::parse_system_name(system).family));
}

// Owns the optional LLM client and its replay cache for one command.
struct LlmSession {
  std::shared_ptr<llm::ReplayCache> cache;
  std::unique_ptr<llm::ChatClient> client;
  llm::CacheMode mode = llm::CacheMode::off;

  explicit LlmSession(const store::RunConfig& cfg) {
    mode = *llm::parse_cache_mode(cfg.cache_mode);
    if (mode != llm::CacheMode::off) {
      if (cfg.cache_path.empty()) throw config_error("cache mode '" + cfg.cache_mode + "' needs --cache-path");
      cache = std::make_shared<llm::ReplayCache>(cfg.cache_path);
    }
    client = std::make_unique<llm::ChatClient>(cfg.endpoint, cache, mode);
  }

  ~LlmSession() {
    if (cache && mode == llm::CacheMode::record) {
      try {
        cache->flush();
      } catch (const std::exception& e) {
        spdlog::error("could not flush replay cache: {}", e.what());
      }
    }
  }

  json usage() const {
    const auto u = client->usage();
    return {{"calls", u.calls}, {"http_requests", u.http_requests}, {"cache_hits", u.cache_hits}};
  }
};

std::string template_or_empty(const std::string& path) { return path.empty() ? std::string{} : prompts::load_template(path); }

void stamp(store::Provenance& p) { p.timestamps["created"] = store::utc_timestamp(); }

// --- subcommands ---

int cmd_gen_tasks(const Options& o, std::ostream& out) {
  const store::RunConfig cfg = resolve_config(o);
  std::vector<toy::Family> families;
  if (o.family == "all") {
    families = toy::workload_families();
  } else {
    const auto f = toy::parse_family(o.family);
    if (!f) throw config_error("unknown family '" + o.family + "'");
    families.push_back(*f);
  }
  if (!(o.bug_rate >= 0.0 && o.bug_rate <= 1.0)) throw config_error("bug-rate must be in [0, 1]");
  std::vector<json> rows;
  for (toy::Family f : families) {
    for (const toy::ToyTask& t : toy::generate_tasks(f, o.count, cfg.seed, o.bug_rate)) {
      rows.push_back({{"task_id", t.task_id}, {"system_name", t.system_name}, {"query", t.query},
                      {"ground_truth", t.ground_truth}});
    }
  }
  store::write_json_lines(rows, o.out);
  out << json{{"command", "gen-tasks"}, {"tasks", rows.size()}}.dump() << '\n';
  return kExitOk;
}

int cmd_collect(const Options& o, std::ostream& out) {
  const store::RunConfig cfg = resolve_config(o);
  const auto resolver = toy_resolver(cfg.max_steps);
  std::vector<store::DatasetRecord> records;
  std::size_t successes = 0;
  std::size_t lineno = 0;
  for (const json& row : store::read_json_lines(o.in)) {
    ++lineno;
    auto need = [&](const char* key) {
      auto it = row.find(key);
      if (it == row.end() || !it->is_string()) {
        throw parse_error(o.in + ":" + std::to_string(lineno) + ": task needs string field '" + key + "'", lineno, key);
      }
      return it->get<std::string>();
    };
    const std::string system = need("system_name");
    store::DatasetRecord r;
    r.trajectory = run(resolver(system), need("query"), need("ground_truth"), need("task_id"));
    r.domain = domain_for_system(system);
    r.source_system = system;
    r.provenance.method = "collect";
    r.provenance.backend_ids = {"scripted"};
    stamp(r.provenance);
    successes += r.trajectory.outcome == Outcome::success;
    records.push_back(std::move(r));
  }
  store::write_jsonl(records, o.out);
  out << json{{"command", "collect"},
              {"trajectories", records.size()},
              {"successes", successes},
              {"failures", records.size() - successes}}
             .dump()
      << '\n';
  return kExitOk;
}

int cmd_annotate(const Options& o, std::ostream& out) {
  const store::RunConfig cfg = resolve_config(o);
  const auto input = store::read_jsonl(o.in);

  std::vector<Trajectory> failures;
  std::map<std::string, store::Domain> domains;
  std::size_t skipped = 0;
  for (const auto& r : input) {
    if (r.trajectory.outcome != Outcome::failure || r.annotation) {
      ++skipped;
      continue;
    }
    failures.push_back(r.trajectory);
    domains[r.trajectory.task_id] = r.domain;
  }

  std::unique_ptr<LlmSession> session;
  std::unique_ptr<annotator::AnalyzerBackend> backend;
  if (o.backend == "scripted-oracle") {
    backend = std::make_unique<annotator::OracleAnalyzer>(toy::reference_for);
  } else if (o.backend == "identity") {
    backend = std::make_unique<annotator::IdentityAnalyzer>();
  } else if (o.backend == "llm") {
    session = std::make_unique<LlmSession>(cfg);
    backend = std::make_unique<annotator::LlmAnalyzer>(*session->client, template_or_empty(o.prompt));
  } else {
    throw config_error("unknown analyzer backend '" + o.backend + "'");
  }

  annotator::AnnotatorConfig acfg;
  acfg.retries_per_step = cfg.retries_per_step;
  acfg.max_replays = cfg.max_replays;
  acfg.max_length_ratio = cfg.length_ratio;
  acfg.reject_solution_leak = cfg.reject_solution_leak;
  const auto set = annotator::build_negative_set(toy_resolver(cfg.max_steps), failures, *backend, acfg, cfg.workers);

  std::vector<store::DatasetRecord> records;
  for (const AnnotatedTrajectory& at : set.annotated) {
    store::DatasetRecord r;
    r.trajectory = at.trajectory;
    r.annotation = at.annotation;
    r.domain = domains.at(at.trajectory.task_id);
    r.source_system = at.trajectory.system_name;
    r.provenance.method = "counterfactual";
    r.provenance.backend_ids = {backend->id()};
    stamp(r.provenance);
    records.push_back(std::move(r));
  }
  store::write_jsonl(records, o.out);

  if (!o.report.empty()) {
    std::vector<json> rows;
    for (const auto& e : set.excluded) {
      rows.push_back({{"task_id", e.task_id}, {"status", "excluded"}, {"replays", e.report.replays},
                      {"backend_calls", e.report.backend_calls}});
    }
    for (const auto& f : set.failures) rows.push_back({{"task_id", f.task_id}, {"status", "error"}, {"error", f.error}});
    store::write_json_lines(rows, o.report);
  }

  json summary{{"command", "annotate"},
               {"backend", backend->id()},
               {"annotated", set.annotated.size()},
               {"excluded", set.excluded.size()},
               {"failed", set.failures.size()},
               {"skipped", skipped},
               {"replays", set.replays},
               {"backend_calls", set.backend_calls}};
  if (session) summary["llm"] = session->usage();
  out << summary.dump() << '\n';
  return kExitOk;
}

int cmd_inject(const Options& o, std::ostream& out) {
  const store::RunConfig cfg = resolve_config(o);
  const auto input = store::read_jsonl(o.in);

  std::vector<Trajectory> successes;
  std::map<std::string, store::Domain> domains;
  std::size_t skipped = 0;
  for (const auto& r : input) {
    if (r.trajectory.outcome != Outcome::success) {
      ++skipped;
      continue;
    }
    successes.push_back(r.trajectory);
    domains[r.trajectory.task_id] = r.domain;
  }

  std::unique_ptr<LlmSession> session;
  std::unique_ptr<injector::PerturbationOperator> op;
  if (o.op == "llm") {
    session = std::make_unique<LlmSession>(cfg);
    op = std::make_unique<injector::LlmPerturbation>(*session->client, template_or_empty(o.prompt));
  } else {
    op = std::make_unique<injector::ScriptedMutation>(injector::parse_mutation(o.op));
  }

  const auto set =
      injector::build_positive_set(toy_resolver(cfg.max_steps), successes, *op, cfg.k, cfg.seed, cfg.workers);

  std::vector<store::DatasetRecord> records;
  for (const AnnotatedTrajectory& at : set.annotated) {
    store::DatasetRecord r;
    r.trajectory = at.trajectory;
    r.annotation = at.annotation;
    r.domain = domains.at(at.trajectory.task_id);
    r.source_system = at.trajectory.system_name;
    r.provenance.method = "injected";
    r.provenance.seed = cfg.seed;
    r.provenance.backend_ids = {op->id()};
    r.provenance.extra = {{"k", cfg.k}};
    stamp(r.provenance);
    records.push_back(std::move(r));
  }
  store::write_jsonl(records, o.out);

  if (!o.report.empty()) {
    std::vector<json> rows;
    for (const auto& b : set.barren) {
      rows.push_back({{"task_id", b.task_id}, {"status", "barren"}, {"sampled_points", b.report.sampled_points}});
    }
    for (const auto& f : set.failures) rows.push_back({{"task_id", f.task_id}, {"status", "error"}, {"error", f.error}});
    store::write_json_lines(rows, o.report);
  }

  json summary{{"command", "inject"},  {"operator", op->id()},        {"k", cfg.k},
               {"seed", cfg.seed},     {"injected", set.annotated.size()}, {"barren", set.barren.size()},
               {"failed", set.failures.size()}, {"skipped", skipped}};
  if (session) summary["llm"] = session->usage();
  out << summary.dump() << '\n';
  return kExitOk;
}

int cmd_score(const Options& o, std::ostream& out) {
  const store::RunConfig cfg = resolve_config(o);
  reward::RewardParams defaults;
  defaults.lambda = cfg.lambda;
  defaults.sigma = cfg.sigma;

  std::vector<json> rows = store::read_json_lines(o.in);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    reward::ScoreRequest req;
    try {
      req = reward::parse_score_request(rows[i], defaults);
    } catch (const parse_error& e) {
      throw parse_error(o.in + ":" + std::to_string(i + 1) + ": " + e.what(), i + 1, e.field());
    }
    const auto r = reward::score_request(req);
    const json breakdown = reward::breakdown_json(r);
    for (const auto& [key, value] : breakdown.items()) rows[i][key] = value;
    rows[i]["lambda"] = r.lambda;
    rows[i]["sigma"] = r.sigma;
  }
  if (o.out.empty()) {
    for (const json& row : rows) out << row.dump() << '\n';
  } else {
    store::write_json_lines(rows, o.out);
    out << json{{"command", "score"}, {"scored", rows.size()}}.dump() << '\n';
  }
  return kExitOk;
}

// Line protocol: one request object per line in, one response object per line out.
int cmd_serve_score(const Options& o, std::istream& in, std::ostream& out) {
  const store::RunConfig cfg = resolve_config(o);
  reward::RewardParams defaults;
  defaults.lambda = cfg.lambda;
  defaults.sigma = cfg.sigma;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out << reward::handle_score_line(line, defaults) << '\n' << std::flush;
  }
  return kExitOk;
}

std::vector<AnnotatedTrajectory> annotated_items(const std::vector<store::DatasetRecord>& records) {
  std::vector<AnnotatedTrajectory> items;
  for (const auto& r : records)
    if (r.annotation) items.push_back({r.trajectory, *r.annotation});
  return items;
}

int cmd_judge(const Options& o, std::ostream& out) {
  const store::RunConfig cfg = resolve_config(o);
  const auto items = annotated_items(store::read_jsonl(o.in));

  std::unique_ptr<LlmSession> session;
  std::unique_ptr<evaluator::AttributorBackend> backend;
  if (o.backend == "oracle") {
    backend = std::make_unique<evaluator::OracleAttributor>();
  } else if (o.backend == "scrambled-step") {
    backend = std::make_unique<evaluator::ScrambledStepAttributor>();
  } else if (o.backend == "llm") {
    session = std::make_unique<LlmSession>(cfg);
    backend = std::make_unique<evaluator::LlmAttributor>(*session->client);
  } else {
    throw config_error("unknown attributor backend '" + o.backend + "'");
  }

  evaluator::EvalSetting setting;
  setting.with_ground_truth = o.with_gt;
  const auto batch = evaluator::judge_batch(*backend, items, setting, cfg.workers);

  std::map<std::size_t, std::string> errors;
  for (const auto& f : batch.failures) errors[f.index] = f.error;
  std::vector<json> rows;
  for (std::size_t i = 0; i < items.size(); ++i) {
    json row{{"task_id", items[i].trajectory.task_id}};
    if (batch.outputs[i]) {
      row["raw_text"] = batch.outputs[i]->raw_text;
    } else {
      row["raw_text"] = "";
      row["error"] = errors.count(i) ? errors[i] : std::string("skipped: no ground truth");
    }
    rows.push_back(std::move(row));
  }
  store::write_json_lines(rows, o.out);

  json summary{{"command", "judge"},         {"backend", backend->id()},
               {"with_ground_truth", o.with_gt}, {"judged", batch.judged},
               {"failed", batch.failed},      {"skipped", batch.skipped}};
  if (session) summary["llm"] = session->usage();
  out << summary.dump() << '\n';
  return kExitOk;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  resolve_config(o);
  const auto items = annotated_items(store::read_jsonl(o.in));
  const auto rows = store::read_json_lines(o.predictions);
  if (rows.size() != items.size()) {
    throw precondition_error("predictions file has " + std::to_string(rows.size()) + " lines for " +
                             std::to_string(items.size()) + " annotated records");
  }
  std::vector<reward::CandidateOutput> preds;
  std::vector<Annotation> truths;
  std::vector<std::string> ids;
  std::size_t errored = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const json& row = rows[i];
    const std::string tid = row.value("task_id", std::string{});
    if (tid != items[i].trajectory.task_id) {
      throw precondition_error("prediction line " + std::to_string(i + 1) + " is for '" + tid + "', expected '" +
                               items[i].trajectory.task_id + "'");
    }
    if (!row.contains("raw_text") || !row["raw_text"].is_string()) {
      throw parse_error(o.predictions + ":" + std::to_string(i + 1) + ": missing string field 'raw_text'", i + 1,
                        "raw_text");
    }
    errored += row.contains("error");
    preds.push_back(reward::parse_output(row["raw_text"].get<std::string>()));
    truths.push_back(items[i].annotation);
    ids.push_back(tid);
  }
  json result = evaluator::to_json(evaluator::evaluate(preds, truths, ids));
  result["judge_errors"] = errored;
  if (o.out.empty()) {
    out << result.dump(2) << '\n';
  } else {
    std::ofstream f(o.out, std::ios::binary | std::ios::trunc);
    if (!f) throw config_error("cannot write " + o.out);
    f << result.dump(2) << '\n';
    out << json{{"command", "evaluate"},
                {"n", result["n"]},
                {"agent_accuracy", result["agent_accuracy"]},
                {"step_accuracy", result["step_accuracy"]}}
               .dump()
        << '\n';
  }
  return kExitOk;
}

int cmd_split(const Options& o, std::ostream& out) {
  const store::RunConfig cfg = resolve_config(o);
  const auto records = store::read_jsonl(o.in);
  const auto parts = evaluator::split<store::DatasetRecord>(
      records, cfg.split_ratio, cfg.seed, [](const store::DatasetRecord& r) { return store::to_string(r.domain); });
  store::write_jsonl(parts.train, o.train);
  store::write_jsonl(parts.test, o.test);
  out << json{{"command", "split"}, {"train", parts.train.size()}, {"test", parts.test.size()}}.dump() << '\n';
  return kExitOk;
}

int cmd_stats(const Options& o, std::ostream& out) {
  resolve_config(o);
  std::vector<store::DatasetRecord> all;
  for (const std::string& path : o.inputs) {
    auto part = store::read_jsonl(path);
    all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  out << store::to_json(store::compute_stats(all)).dump(2) << '\n';
  return kExitOk;
}

int cmd_import_whowhen(const Options& o, std::ostream& out) {
  resolve_config(o);
  const store::Domain domain = store::parse_domain(o.domain);
  const auto imported = evaluator::import_whowhen(o.in);
  std::vector<store::DatasetRecord> records;
  for (const auto& rec : imported.records) {
    store::DatasetRecord r;
    r.trajectory = rec.item.trajectory;
    r.annotation = rec.item.annotation;
    r.domain = domain;
    r.source_system = rec.item.trajectory.system_name;
    r.provenance.method = "whowhen";
    r.provenance.backend_ids = {"human"};
    r.provenance.extra = rec.provenance;
    stamp(r.provenance);
    records.push_back(std::move(r));
  }
  store::write_jsonl(records, o.out);
  json skipped = json::array();
  for (const auto& s : imported.report.skipped) skipped.push_back({{"source", s.source}, {"reason", s.reason}});
  out << json{{"command", "import-whowhen"},
              {"files", imported.report.files},
              {"records", imported.report.records},
              {"imported", imported.report.imported},
              {"skipped", skipped},
              {"agent_label_mismatches", imported.report.agent_label_mismatches}}
             .dump()
      << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Failure attribution pipeline for turn-based multi-agent systems", "faultline"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.add_option("--config", o.config_path, "key = value run configuration file")->check(CLI::ExistingFile);
  app.add_option("--cache-mode", o.cache_mode, "LLM replay cache: off, record or replay");
  app.add_option("--cache-path", o.cache_path, "LLM replay cache file");
  app.add_option("--log-level", o.log_level, "trace, debug, info, warn, error or off");

  auto* gen = app.add_subcommand("gen-tasks", "Generate seeded toy tasks");
  gen->add_option("--family", o.family, "arithmetic, string_relay, lookup_chain, majority_vote or all");
  gen->add_option("--count", o.count, "Tasks per family")->required();
  gen->add_option("--seed", o.seed, "Generator seed");
  gen->add_option("--bug-rate", o.bug_rate, "Probability of enabling each bug switch");
  gen->add_option("--out", o.out, "Task file (JSONL)")->required();

  auto* collect = app.add_subcommand("collect", "Run toy systems over a task file");
  collect->add_option("--tasks", o.in, "Task file (JSONL)")->required();
  collect->add_option("--out", o.out, "Trajectory dataset (JSONL)")->required();
  collect->add_option("--max-steps", o.max_steps, "Step budget per run");

  auto* annotate = app.add_subcommand("annotate", "Locate decisive errors in failed trajectories");
  annotate->add_option("--in", o.in, "Dataset with failed trajectories")->required();
  annotate->add_option("--out", o.out, "Annotated failures (JSONL)")->required();
  annotate->add_option("--backend", o.backend, "scripted-oracle, identity or llm")->required();
  annotate->add_option("--workers", o.workers, "Trajectories annotated concurrently");
  annotate->add_option("--retries", o.retries, "Proposals per step");
  annotate->add_option("--max-replays", o.max_replays, "Replay budget per trajectory (0 = retries x T)");
  annotate->add_option("--length-ratio", o.length_ratio, "Reject proposals longer than this multiple");
  annotate->add_flag("--reject-leak", o.reject_leak, "Reject proposals quoting the ground truth");
  annotate->add_option("--prompt", o.prompt, "Analyzer prompt template file");
  annotate->add_option("--report", o.report, "Exclusions and errors (JSONL)");

  auto* inject = app.add_subcommand("inject", "Synthesize failures from successful trajectories");
  inject->add_option("--in", o.in, "Dataset with successful trajectories")->required();
  inject->add_option("--out", o.out, "Injected failures (JSONL)")->required();
  inject->add_option("--operator", o.op,
                     "numeric_corruption, operand_swap, instruction_negation, truncation, any or llm");
  inject->add_option("--k", o.k, "Injection points sampled per trajectory");
  inject->add_option("--seed", o.seed, "Sampling seed");
  inject->add_option("--workers", o.workers, "Trajectories processed concurrently");
  inject->add_option("--prompt", o.prompt, "Attack prompt template file");
  inject->add_option("--report", o.report, "Barren items and errors (JSONL)");

  auto* score = app.add_subcommand("score", "Score candidate attributions");
  score->add_option("--in", o.in, "Candidates (JSONL: raw_text, truth_agent, truth_step)")->required();
  score->add_option("--out", o.out, "Scored candidates; stdout when omitted");
  score->add_option("--lambda", o.lambda, "Step weight in [0, 1]");
  score->add_option("--sigma", o.sigma, "Step reward width (> 0)");

  auto* serve = app.add_subcommand("serve-score", "Score requests line by line on stdin/stdout");
  serve->add_option("--lambda", o.lambda, "Default step weight");
  serve->add_option("--sigma", o.sigma, "Default step reward width");

  auto* judge = app.add_subcommand("judge", "Run an attributor over annotated trajectories");
  judge->add_option("--in", o.in, "Annotated dataset")->required();
  judge->add_option("--out", o.out, "Predictions (JSONL: task_id, raw_text)")->required();
  judge->add_option("--backend", o.backend, "oracle, scrambled-step or llm")->required();
  judge->add_flag("--with-gt", o.with_gt, "Show the ground truth to the attributor");
  judge->add_option("--workers", o.workers, "Concurrent judge calls");

  auto* evaluate = app.add_subcommand("evaluate", "Agent- and step-level accuracy");
  evaluate->add_option("--in", o.in, "Annotated dataset")->required();
  evaluate->add_option("--predictions", o.predictions, "Predictions from judge")->required();
  evaluate->add_option("--out", o.out, "Result JSON; stdout when omitted");

  auto* split = app.add_subcommand("split", "Seeded train/test split stratified by domain");
  split->add_option("--in", o.in, "Dataset")->required();
  split->add_option("--train", o.train, "Train output")->required();
  split->add_option("--test", o.test, "Test output")->required();
  split->add_option("--ratio", o.ratio, "Train fraction in (0, 1)");
  split->add_option("--seed", o.seed, "Shuffle seed");

  auto* stats = app.add_subcommand("stats", "Per-domain record and annotation counts");
  stats->add_option("--in", o.inputs, "One or more datasets")->required();

  auto* import = app.add_subcommand("import-whowhen", "Convert Who&When records to the dataset format");
  import->add_option("--in", o.in, "File or directory of benchmark records")->required();
  import->add_option("--out", o.out, "Dataset output")->required();
  import->add_option("--domain", o.domain, "Domain label for the imported records");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    emit_error(err, "usage", e.what());
    return kExitUsage;
  }

  const auto level = spdlog::level::from_str(o.log_level);
  if (level == spdlog::level::off && o.log_level != "off") {
    emit_error(err, "usage", "unknown log level '" + o.log_level + "'");
    return kExitUsage;
  }
  spdlog::set_level(level);

  try {
    if (gen->parsed()) return cmd_gen_tasks(o, out);
    if (collect->parsed()) return cmd_collect(o, out);
    if (annotate->parsed()) return cmd_annotate(o, out);
    if (inject->parsed()) return cmd_inject(o, out);
    if (score->parsed()) return cmd_score(o, out);
    if (serve->parsed()) return cmd_serve_score(o, in, out);
    if (judge->parsed()) return cmd_judge(o, out);
    if (evaluate->parsed()) return cmd_evaluate(o, out);
    if (split->parsed()) return cmd_split(o, out);
    if (stats->parsed()) return cmd_stats(o, out);
    if (import->parsed()) return cmd_import_whowhen(o, out);
  } catch (const config_error& e) {
    emit_error(err, "config", e.what());
    return kExitUsage;
  } catch (const precondition_error& e) {
    emit_error(err, "precondition", e.what());
    return kExitUsage;
  } catch (const parse_error& e) {
    emit_error(err, "parse", e.what());
    return kExitRuntime;
  } catch (const transport_error& e) {
    emit_error(err, "transport", e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    emit_error(err, "runtime", e.what());
    return kExitRuntime;
  }
  emit_error(err, "usage", "no subcommand");
  return kExitUsage;
}

}  // namespace faultline::cli
