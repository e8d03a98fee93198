#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace faultline {

// Caller broke an operation's precondition (empty query, k = 0, ratio out of range, ...).
class precondition_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A pluggable component (scheduler, perturbation operator, backend) broke its contract.
class contract_error : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Invalid configuration, including HTTP 4xx answers from an endpoint.
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class transport_error : public std::runtime_error {
 public:
  transport_error(const std::string& what, bool retryable)
      : std::runtime_error(what), retryable_(retryable) {}

  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

class budget_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input data. line is 1-based, 0 when not line-oriented.
class parse_error : public std::runtime_error {
 public:
  parse_error(const std::string& what, std::size_t line = 0, std::string field = {})
      : std::runtime_error(what), line_(line), field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

}  // namespace faultline
