#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "faultline/harness.hpp"

// Scripted multi-agent systems for offline verification. Each family has named bug
// switches; a system's name encodes its family and active bugs, e.g.
// "arithmetic+solver_drops_carry", so trajectories can be replayed from files.
//
//   arithmetic     Planner -> Solver -> Verifier over "17+25" style queries.
//   string_relay   Dispatcher routes a word through Reverser/Upcaser/Shifter, Writer reports.
//                  The route decides the schedule, so corrupting it reshapes the replay.
//   lookup_chain   Router -> Retriever (one GET per key, table lookups arrive as step
//                  feedback) -> Calculator -> Reporter.
//   majority_vote  Three independent solvers, answer is the majority result. Used as
//                  the robust / unfixable fixture: one action never decides it alone.
namespace faultline::toy {

enum class Family { arithmetic, string_relay, lookup_chain, majority_vote };

std::string_view to_string(Family f) noexcept;
std::optional<Family> parse_family(std::string_view s) noexcept;

// The three bundled workload families (majority_vote excluded).
const std::vector<Family>& workload_families();

const std::vector<std::string>& bug_switches(Family f);

struct ToyConfig {
  Family family = Family::arithmetic;
  std::vector<std::string> bugs;  // any order; canonicalised by system_name
  std::size_t max_steps = 50;
};

std::string system_name(const ToyConfig& cfg);
/// Throws precondition_error on unknown family or bug.
ToyConfig parse_system_name(std::string_view name);

SystemSpec make_system(const ToyConfig& cfg);
SystemSpec system_from_name(std::string_view name);
/// Bug-free sibling of the named system: the source of oracle fixes.
SystemSpec reference_for(std::string_view name);

// Dataset domain label: math, coding or agentic.
std::string_view domain_of(Family f) noexcept;

/// Bug-free answer to a query of the family. Throws precondition_error if malformed.
std::string solve(Family f, std::string_view query);

struct ToyTask {
  std::string task_id;
  std::string system_name;
  std::string query;
  std::string ground_truth;
};

/// Seeded random queries; each bug switch is turned on independently with bug_rate.
std::vector<ToyTask> generate_tasks(Family f, std::size_t count, std::uint64_t seed, double bug_rate = 0.35);

// The fixed price table behind lookup_chain.
const std::vector<std::pair<std::string, int>>& price_table();

}  // namespace faultline::toy
