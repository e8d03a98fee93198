#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "faultline/trajectory.hpp"

namespace faultline::prompts {

// Placeholders: {task_id} {question} {ground_truth} {model_prediction} {history}
// {feedback} {step} {agent} {original_action}
std::string_view default_analyzer_template() noexcept;

// Placeholders: {task_id} {question} {ground_truth} {model_prediction} {history}
// {step} {agent} {original_action}
std::string_view default_attack_template() noexcept;

std::string_view default_judge_system() noexcept;

// Placeholders: {question} {ground_truth_block} {history} {agents}
std::string_view default_judge_template() noexcept;

/// One block per step, headed by its index and agent name, then the action and, when present,
/// its feedback. Step numbers are the 0-based indices used by the answer grammar.
std::string render_history(std::span<const Step> steps);

/// Step-level feedback followed by the trajectory-level feedback_log.
std::string assemble_feedback(const Trajectory& t);

std::string load_template(const std::filesystem::path& path);

}  // namespace faultline::prompts
