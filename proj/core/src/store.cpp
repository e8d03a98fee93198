#include "faultline/store.hpp"

#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include "faultline/errors.hpp"
#include "faultline/text.hpp"

namespace faultline::store {

using json = nlohmann::ordered_json;

std::string_view to_string(Domain d) noexcept {
  switch (d) {
    case Domain::coding:
      return "coding";
    case Domain::agentic:
      return "agentic";
    case Domain::math:
      break;
  }
  return "math";
}

Domain parse_domain(std::string_view s) {
  for (Domain d : {Domain::coding, Domain::math, Domain::agentic})
    if (to_string(d) == s) return d;
  throw parse_error("unknown domain '" + std::string(s) + "'", 0, "domain");
}

std::vector<std::string> validate(const DatasetRecord& r) {
  std::vector<std::string> problems = r.annotation ? validate_trajectory(r.trajectory, *r.annotation)
                                                   : validate_trajectory(r.trajectory);
  if (r.annotation && r.trajectory.outcome != Outcome::failure) {
    problems.push_back("annotated record must carry a failed trajectory");
  }
  if (r.source_system.empty()) problems.push_back("empty source_system");
  return problems;
}

json to_json(const Trajectory& t) {
  json j;
  j["task_id"] = t.task_id;
  j["query"] = t.query;
  j["system_name"] = t.system_name;
  auto& steps = j["steps"] = json::array();
  for (const Step& s : t.steps) {
    json e;
    e["index"] = s.index;
    e["agent"] = {{"index", s.agent.index}, {"name", s.agent.name}};
    e["action"] = s.action;
    if (s.feedback) e["feedback"] = *s.feedback;
    steps.push_back(std::move(e));
  }
  j["final_answer"] = t.final_answer;
  j["outcome"] = to_int(t.outcome);
  if (t.ground_truth) j["ground_truth"] = *t.ground_truth;
  if (t.feedback_log) j["feedback_log"] = *t.feedback_log;
  return j;
}

json to_json(const Annotation& a) {
  json j;
  j["agent"] = {{"index", a.agent.index}, {"name", a.agent.name}};
  j["step"] = a.step;
  j["method"] = std::string(to_string(a.method));
  if (a.rationale) j["rationale"] = *a.rationale;
  if (a.corrected_action) j["corrected_action"] = *a.corrected_action;
  if (a.corrupted_action) j["corrupted_action"] = *a.corrupted_action;
  return j;
}

json to_json(const DatasetRecord& r) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["domain"] = std::string(to_string(r.domain));
  j["source_system"] = r.source_system;
  j["trajectory"] = to_json(r.trajectory);
  if (r.annotation) j["annotation"] = to_json(*r.annotation);
  json p;
  p["method"] = r.provenance.method;
  if (r.provenance.seed) p["seed"] = *r.provenance.seed;
  p["backend_ids"] = r.provenance.backend_ids;
  p["timestamps"] = json::object();
  for (const auto& [k, v] : r.provenance.timestamps) p["timestamps"][k] = v;
  if (!r.provenance.extra.empty()) p["extra"] = r.provenance.extra;
  j["provenance"] = std::move(p);
  return j;
}

namespace {

const json& field(const json& j, const std::string& path, const char* key) {
  if (!j.is_object()) throw parse_error(path + " is not an object", 0, path);
  auto it = j.find(key);
  if (it == j.end()) throw parse_error("missing field '" + path + "." + key + "'", 0, path + "." + key);
  return *it;
}

std::string str(const json& j, const std::string& path, const char* key) {
  const json& v = field(j, path, key);
  if (!v.is_string()) throw parse_error("field '" + path + "." + key + "' must be a string", 0, path + "." + key);
  return v.get<std::string>();
}

std::optional<std::string> opt_str(const json& j, const std::string& path, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw parse_error("field '" + path + "." + key + "' must be a string", 0, path + "." + key);
  return it->get<std::string>();
}

std::size_t uint(const json& j, const std::string& path, const char* key) {
  const json& v = field(j, path, key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw parse_error("field '" + path + "." + key + "' must be a non-negative integer", 0, path + "." + key);
  }
  return v.get<std::size_t>();
}

AgentId agent_from(const json& j, const std::string& path) {
  return AgentId{uint(j, path, "index"), str(j, path, "name")};
}

}  // namespace

Trajectory trajectory_from_json(const json& j) {
  const std::string p = "trajectory";
  Trajectory t;
  t.task_id = str(j, p, "task_id");
  t.query = str(j, p, "query");
  t.system_name = str(j, p, "system_name");
  const json& steps = field(j, p, "steps");
  if (!steps.is_array()) throw parse_error("field 'trajectory.steps' must be an array", 0, "trajectory.steps");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const std::string sp = p + ".steps[" + std::to_string(i) + "]";
    Step s;
    s.index = uint(steps[i], sp, "index");
    s.agent = agent_from(field(steps[i], sp, "agent"), sp + ".agent");
    s.action = str(steps[i], sp, "action");
    s.feedback = opt_str(steps[i], sp, "feedback");
    t.steps.push_back(std::move(s));
  }
  t.final_answer = str(j, p, "final_answer");
  const std::size_t outcome = uint(j, p, "outcome");
  if (outcome > 1) throw parse_error("field 'trajectory.outcome' must be 0 or 1", 0, "trajectory.outcome");
  t.outcome = outcome ? Outcome::success : Outcome::failure;
  t.ground_truth = opt_str(j, p, "ground_truth");
  t.feedback_log = opt_str(j, p, "feedback_log");
  return t;
}

Annotation annotation_from_json(const json& j) {
  const std::string p = "annotation";
  Annotation a;
  a.agent = agent_from(field(j, p, "agent"), p + ".agent");
  a.step = uint(j, p, "step");
  const std::string m = str(j, p, "method");
  const auto method = parse_annotation_method(m);
  if (!method) throw parse_error("unknown annotation method '" + m + "'", 0, "annotation.method");
  a.method = *method;
  a.rationale = opt_str(j, p, "rationale");
  a.corrected_action = opt_str(j, p, "corrected_action");
  a.corrupted_action = opt_str(j, p, "corrupted_action");
  return a;
}

DatasetRecord record_from_json(const json& j) {
  if (!j.is_object()) throw parse_error("record is not a JSON object");
  const std::size_t version = uint(j, "record", "schema_version");
  if (version != kSchemaVersion) {
    throw parse_error("unsupported schema_version " + std::to_string(version), 0, "schema_version");
  }
  DatasetRecord r;
  r.domain = parse_domain(str(j, "record", "domain"));
  r.source_system = str(j, "record", "source_system");
  r.trajectory = trajectory_from_json(field(j, "record", "trajectory"));
  if (auto it = j.find("annotation"); it != j.end() && !it->is_null()) r.annotation = annotation_from_json(*it);

  const json& p = field(j, "record", "provenance");
  r.provenance.method = str(p, "provenance", "method");
  if (auto it = p.find("seed"); it != p.end() && !it->is_null()) {
    if (!it->is_number_unsigned()) throw parse_error("field 'provenance.seed' must be unsigned", 0, "provenance.seed");
    r.provenance.seed = it->get<std::uint64_t>();
  }
  const json& ids = field(p, "provenance", "backend_ids");
  if (!ids.is_array()) throw parse_error("field 'provenance.backend_ids' must be an array", 0, "provenance.backend_ids");
  for (const json& id : ids) {
    if (!id.is_string()) throw parse_error("backend id must be a string", 0, "provenance.backend_ids");
    r.provenance.backend_ids.push_back(id.get<std::string>());
  }
  if (auto it = p.find("timestamps"); it != p.end()) {
    if (!it->is_object()) throw parse_error("field 'provenance.timestamps' must be an object", 0, "provenance.timestamps");
    for (const auto& [k, v] : it->items()) {
      if (!v.is_string()) throw parse_error("timestamp values must be strings", 0, "provenance.timestamps");
      r.provenance.timestamps[k] = v.get<std::string>();
    }
  }
  if (auto it = p.find("extra"); it != p.end()) r.provenance.extra = *it;

  if (const auto problems = validate(r); !problems.empty()) throw parse_error("invalid record: " + problems.front());
  return r;
}

std::string to_line(const DatasetRecord& r) { return to_json(r).dump(); }

void write_jsonl(std::span<const DatasetRecord> records, const std::filesystem::path& path) {
  std::vector<json> rows;
  rows.reserve(records.size());
  for (const DatasetRecord& r : records) {
    if (const auto problems = validate(r); !problems.empty()) {
      throw precondition_error("refusing to write invalid record " + r.trajectory.task_id + ": " + problems.front());
    }
    rows.push_back(to_json(r));
  }
  write_json_lines(rows, path);
}

std::vector<json> read_json_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot read " + path.string());
  std::vector<json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw parse_error(path.string() + ":" + std::to_string(lineno) + ": malformed JSON", lineno);
    rows.push_back(std::move(j));
  }
  return rows;
}

void write_json_lines(std::span<const json> rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw config_error("cannot write " + path.string());
  for (const json& j : rows) out << j.dump() << '\n';
  out.flush();
  if (!out) throw config_error("write failed for " + path.string());
}

std::vector<DatasetRecord> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot read " + path.string());
  std::vector<DatasetRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw parse_error(path.string() + ":" + std::to_string(lineno) + ": malformed JSON", lineno);
    try {
      records.push_back(record_from_json(j));
    } catch (const parse_error& e) {
      throw parse_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what(), lineno, e.field());
    }
  }
  return records;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// --- config ---

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "lambda",          "sigma",          "k",
      "seed",            "retries_per_step", "max_replays",
      "length_ratio",    "reject_solution_leak", "max_steps",
      "workers",         "split_ratio",    "clip_b0",
      "endpoint.base_url", "endpoint.model", "endpoint.temperature",
      "endpoint.max_tokens", "endpoint.seed", "endpoint.timeout_ms",
      "endpoint.max_retries", "endpoint.backoff_ms", "endpoint.credential_env",
      "endpoint.max_in_flight", "endpoint.min_interval_ms", "cache.mode",
      "cache.path",
  };
  return keys;
}

namespace {

double to_double(std::string_view key, std::string_view v) {
  const std::string s(text::trim(v));
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw config_error("'" + std::string(key) + "' expects a number, got '" + s + "'");
  return out;
}

std::uint64_t to_uint(std::string_view key, std::string_view v) {
  const std::string_view s = text::trim(v);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw config_error("'" + std::string(key) + "' expects a non-negative integer, got '" + std::string(s) + "'");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  const std::string s = text::fold_case(text::trim(v));
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw config_error("'" + std::string(key) + "' expects a boolean, got '" + s + "'");
}

}  // namespace

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  const std::string val(text::trim(value));
  if (key == "lambda") cfg.lambda = to_double(key, val);
  else if (key == "sigma") cfg.sigma = to_double(key, val);
  else if (key == "k") cfg.k = to_uint(key, val);
  else if (key == "seed") cfg.seed = to_uint(key, val);
  else if (key == "retries_per_step") cfg.retries_per_step = to_uint(key, val);
  else if (key == "max_replays") cfg.max_replays = to_uint(key, val);
  else if (key == "length_ratio") cfg.length_ratio = to_double(key, val);
  else if (key == "reject_solution_leak") cfg.reject_solution_leak = to_bool(key, val);
  else if (key == "max_steps") cfg.max_steps = to_uint(key, val);
  else if (key == "workers") cfg.workers = to_uint(key, val);
  else if (key == "split_ratio") cfg.split_ratio = to_double(key, val);
  else if (key == "clip_b0") cfg.clip_b0 = to_double(key, val);
  else if (key == "endpoint.base_url") cfg.endpoint.base_url = val;
  else if (key == "endpoint.model") cfg.endpoint.model = val;
  else if (key == "endpoint.temperature") cfg.endpoint.temperature = to_double(key, val);
  else if (key == "endpoint.max_tokens") cfg.endpoint.max_tokens = static_cast<int>(to_uint(key, val));
  else if (key == "endpoint.seed") {
    if (val == "none") cfg.endpoint.seed.reset();
    else cfg.endpoint.seed = static_cast<std::int64_t>(to_uint(key, val));
  } else if (key == "endpoint.timeout_ms") cfg.endpoint.timeout = std::chrono::milliseconds(to_uint(key, val));
  else if (key == "endpoint.max_retries") cfg.endpoint.retry.max_retries = static_cast<int>(to_uint(key, val));
  else if (key == "endpoint.backoff_ms") cfg.endpoint.retry.initial_backoff = std::chrono::milliseconds(to_uint(key, val));
  else if (key == "endpoint.credential_env") cfg.endpoint.credential_env = val;
  else if (key == "endpoint.max_in_flight") cfg.endpoint.max_in_flight = to_uint(key, val);
  else if (key == "endpoint.min_interval_ms") cfg.endpoint.min_interval = std::chrono::milliseconds(to_uint(key, val));
  else if (key == "cache.mode") {
    if (!llm::parse_cache_mode(val)) throw config_error("cache.mode must be off, record or replay");
    cfg.cache_mode = val;
  } else if (key == "cache.path") cfg.cache_path = val;
  else throw config_error("unknown config key '" + std::string(key) + "'");
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot read config " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const std::size_t eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw config_error(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    try {
      apply_setting(base, text::trim(body.substr(0, eq)), body.substr(eq + 1));
    } catch (const config_error& e) {
      throw config_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  validate(base);
  return base;
}

void validate(const RunConfig& c) {
  auto fail = [](const std::string& msg) { throw config_error(msg); };
  if (!(c.lambda >= 0.0 && c.lambda <= 1.0)) fail("lambda must be in [0, 1]");
  if (!(c.sigma > 0.0)) fail("sigma must be positive");
  if (c.k == 0) fail("k must be at least 1");
  if (c.retries_per_step == 0) fail("retries_per_step must be at least 1");
  if (!(c.length_ratio > 0.0)) fail("length_ratio must be positive");
  if (c.max_steps == 0) fail("max_steps must be at least 1");
  if (c.workers == 0 || c.workers > 256) fail("workers must be in [1, 256]");
  if (!(c.split_ratio > 0.0 && c.split_ratio < 1.0)) fail("split_ratio must be in (0, 1)");
  if (!(c.clip_b0 > 0.0 && c.clip_b0 < 1.0)) fail("clip_b0 must be in (0, 1)");
  if (const auto problems = llm::validate_profile(c.endpoint); !problems.empty()) fail("endpoint: " + problems.front());
  if (!llm::parse_cache_mode(c.cache_mode)) fail("cache.mode must be off, record or replay");
}

// --- stats ---

CorpusStats compute_stats(std::span<const DatasetRecord> records) {
  CorpusStats s;
  for (Domain d : {Domain::coding, Domain::math, Domain::agentic}) s.by_domain[std::string(to_string(d))];
  for (const DatasetRecord& r : records) {
    for (DomainStats* d : {&s.by_domain[std::string(to_string(r.domain))], &s.total}) {
      ++d->records;
      (r.trajectory.outcome == Outcome::success ? d->successes : d->failures) += 1;
      if (r.annotation) {
        ++d->annotated;
        (r.annotation->method == AnnotationMethod::injected ? d->injected : d->counterfactual) += 1;
      }
    }
  }
  s.negative = s.total.counterfactual;
  s.positive = s.total.injected;
  s.combined = s.negative + s.positive;
  return s;
}

json to_json(const CorpusStats& s) {
  auto row = [](const DomainStats& d) {
    json j;
    j["records"] = d.records;
    j["successes"] = d.successes;
    j["failures"] = d.failures;
    j["annotated"] = d.annotated;
    j["counterfactual"] = d.counterfactual;
    j["injected"] = d.injected;
    return j;
  };
  json j;
  j["by_domain"] = json::object();
  for (const auto& [name, d] : s.by_domain) j["by_domain"][name] = row(d);
  j["total"] = row(s.total);
  j["negative"] = s.negative;
  j["positive"] = s.positive;
  j["combined"] = s.combined;
  return j;
}

}  // namespace faultline::store
