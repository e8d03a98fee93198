#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faultline/harness.hpp"
#include "faultline/llm_gateway.hpp"
#include "faultline/trajectory.hpp"

// Synthesizes labelled failures from successful trajectories by corrupting one
// sampled step and replaying.
namespace faultline::injector {

enum class PerturbationKind : std::uint8_t { scripted_mutation, llm_backed };

std::string_view to_string(PerturbationKind k) noexcept;

struct PerturbationContext {
  const Trajectory& trajectory;
  std::size_t step;
  std::uint64_t seed;
};

// corrupt() must return something other than the original action; inject() checks.
class PerturbationOperator {
 public:
  virtual ~PerturbationOperator() = default;
  virtual std::string id() const = 0;
  virtual PerturbationKind kind() const = 0;
  virtual std::string corrupt(const PerturbationContext& ctx) = 0;
};

enum class Mutation : std::uint8_t { numeric_corruption, operand_swap, instruction_negation, truncation, any };

std::string_view to_string(Mutation m) noexcept;
Mutation parse_mutation(std::string_view name);  // throws config_error

/// Pure text mutations. Each returns the input unchanged when it does not apply
/// (no digit, fewer than two operands, ...).
std::string corrupt_number(std::string_view action, std::uint64_t seed);
std::string swap_operands(std::string_view action);
std::string negate_instruction(std::string_view action);
std::string truncate_content(std::string_view action);

class ScriptedMutation final : public PerturbationOperator {
 public:
  explicit ScriptedMutation(Mutation m = Mutation::any) : mutation_(m) {}
  std::string id() const override { return "scripted:" + std::string(to_string(mutation_)); }
  PerturbationKind kind() const override { return PerturbationKind::scripted_mutation; }
  std::string corrupt(const PerturbationContext& ctx) override;

  /// `any` tries the four mutations starting at seed % 4 and keeps the first that changes the text.
  static std::string apply(Mutation m, std::string_view action, std::uint64_t seed);

 private:
  Mutation mutation_;
};

class LlmPerturbation final : public PerturbationOperator {
 public:
  explicit LlmPerturbation(llm::ChatClient& client, std::string prompt_template = {});
  std::string id() const override { return client_.id(); }
  PerturbationKind kind() const override { return PerturbationKind::llm_backed; }
  std::string corrupt(const PerturbationContext& ctx) override;

  std::string render_prompt(const PerturbationContext& ctx) const;

 private:
  llm::ChatClient& client_;
  std::string template_;
};

struct InjectionAttempt {
  std::size_t step = 0;
  std::string corrupted_action;
  Outcome replay_outcome = Outcome::success;
};

struct InjectionReport {
  std::optional<AnnotatedTrajectory> result;
  std::vector<std::size_t> sampled_points;
  std::vector<InjectionAttempt> attempts;
};

inline constexpr std::size_t kDefaultInjectionPoints = 3;

/// Item-level seed: mixes the batch seed with the trajectory's identity so that
/// duplicates of one trajectory share a seed and distinct ones do not.
std::uint64_t item_seed(const Trajectory& t, std::uint64_t seed) noexcept;

/// k distinct indices from [0, n) via a partial Fisher-Yates on mt19937_64(seed).
std::vector<std::size_t> sample_points(std::size_t n, std::size_t k, std::uint64_t seed);

/// Corrupts the sampled points in sampled order and stops at the first replay that fails.
/// Throws precondition_error unless t succeeded and 1 <= k <= T; contract_error when the
/// operator hands back the original action.
InjectionReport inject(const SystemSpec& system, const Trajectory& t, PerturbationOperator& op,
                       std::size_t k = kDefaultInjectionPoints, std::uint64_t seed = 0);

struct Barren {
  std::string task_id;
  InjectionReport report;
};

struct ItemFailure {
  std::string task_id;
  std::string error;
};

struct PositiveSet {
  std::vector<AnnotatedTrajectory> annotated;
  std::vector<Barren> barren;  // no sampled corruption changed the outcome
  std::vector<ItemFailure> failures;
};

PositiveSet build_positive_set(const SystemResolver& systems, std::span<const Trajectory> successes,
                               PerturbationOperator& op, std::size_t k = kDefaultInjectionPoints,
                               std::uint64_t seed = 0, std::size_t workers = 1);

}  // namespace faultline::injector
