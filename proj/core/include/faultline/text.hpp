#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace faultline::text {

std::string_view trim(std::string_view s) noexcept;
std::string fold_case(std::string_view s);
bool iequals(std::string_view a, std::string_view b) noexcept;

std::vector<std::string> split(std::string_view s, char sep);
std::vector<std::string> split_ws(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool starts_with_word(std::string_view s, std::string_view word) noexcept;

// Strict decimal parse of the whole (trimmed) string, optional leading '-'.
std::optional<std::int64_t> parse_int(std::string_view s) noexcept;

// Last signed integer token appearing anywhere in s.
std::optional<std::int64_t> last_integer(std::string_view s) noexcept;

// Replaces every occurrence of {name} for each (name, value) pair.
std::string fill_template(std::string_view tmpl, const std::vector<std::pair<std::string, std::string>>& values);

}  // namespace faultline::text
