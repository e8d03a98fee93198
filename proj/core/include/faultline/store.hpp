#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "faultline/llm_gateway.hpp"
#include "faultline/trajectory.hpp"

// JSONL dataset records, run configuration and corpus statistics.
namespace faultline::store {

inline constexpr int kSchemaVersion = 1;

enum class Domain : std::uint8_t { coding, math, agentic };

std::string_view to_string(Domain d) noexcept;
Domain parse_domain(std::string_view s);  // throws parse_error

struct Provenance {
  std::string method;  // collect | counterfactual | injected | whowhen
  std::optional<std::uint64_t> seed;
  std::vector<std::string> backend_ids;
  // Wall-clock values live only here so determinism checks can drop them.
  std::map<std::string, std::string> timestamps;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct DatasetRecord {
  Trajectory trajectory;
  std::optional<Annotation> annotation;
  Domain domain = Domain::math;
  std::string source_system;
  Provenance provenance;

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

/// Structural checks plus: an annotation is present only on failed trajectories.
std::vector<std::string> validate(const DatasetRecord& r);

nlohmann::ordered_json to_json(const Trajectory& t);
nlohmann::ordered_json to_json(const Annotation& a);
nlohmann::ordered_json to_json(const DatasetRecord& r);

// All throw parse_error naming the offending field.
Trajectory trajectory_from_json(const nlohmann::ordered_json& j);
Annotation annotation_from_json(const nlohmann::ordered_json& j);
DatasetRecord record_from_json(const nlohmann::ordered_json& j);

std::string to_line(const DatasetRecord& r);

void write_jsonl(std::span<const DatasetRecord> records, const std::filesystem::path& path);

/// Throws parse_error carrying the 1-based line number; never returns a partial list.
std::vector<DatasetRecord> read_jsonl(const std::filesystem::path& path);

// Raw JSON lines for the simpler side files (tasks, predictions, candidates).
std::vector<nlohmann::ordered_json> read_json_lines(const std::filesystem::path& path);
void write_json_lines(std::span<const nlohmann::ordered_json> rows, const std::filesystem::path& path);

std::string utc_timestamp();

// --- run configuration ---

struct RunConfig {
  double lambda = 0.5;
  double sigma = 1.0;
  std::size_t k = 3;
  std::uint64_t seed = 0;
  std::size_t retries_per_step = 2;
  std::size_t max_replays = 0;
  double length_ratio = 4.0;
  bool reject_solution_leak = false;
  std::size_t max_steps = 50;
  std::size_t workers = 1;
  double split_ratio = 0.9;
  double clip_b0 = 0.2;
  llm::EndpointProfile endpoint;
  std::string cache_mode = "off";
  std::string cache_path;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Documented keys in file order of appearance in the README.
const std::vector<std::string>& config_keys();

/// Sets one key from its textual value. Throws config_error on unknown keys,
/// unparseable values or out-of-range values.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

/// `key = value` lines; blank lines and `#` comments ignored. Starts from `base`.
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

void validate(const RunConfig& cfg);  // throws config_error

// --- statistics ---

struct DomainStats {
  std::size_t records = 0;
  std::size_t successes = 0;
  std::size_t failures = 0;
  std::size_t annotated = 0;
  std::size_t counterfactual = 0;  // D-
  std::size_t injected = 0;        // D+
};

struct CorpusStats {
  std::map<std::string, DomainStats> by_domain;
  DomainStats total;
  std::size_t negative = 0;  // |D-|
  std::size_t positive = 0;  // |D+|
  std::size_t combined = 0;  // |D-| + |D+|
};

CorpusStats compute_stats(std::span<const DatasetRecord> records);
nlohmann::ordered_json to_json(const CorpusStats& s);

}  // namespace faultline::store
