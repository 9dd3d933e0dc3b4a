#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace netmon {

enum class Errc {
  malformed_line,
  invariant_violation,
  non_monotonic_time,
  mismatched_entity,
  unsorted_input,
  budget_infeasible,
  kind_mismatch,
  storage_io_failure,
  unknown_metric,
  unknown_entity,
  corrupt_file,
  version_mismatch,
  empty_window,
  insufficient_baseline,
  insufficient_history,
  validation,
  tool_denied,
  step_budget_exhausted,
  backend_unreachable,
  malformed_response,
  no_script_match,
  malformed_payload,
  no_agents,
  partial_failure,
  scenario_target_missing,
  not_found,
  invalid_transition,
  gateway_unreachable,
  partial_ingest,
  config,
};

const char* to_string(Errc code) noexcept;

class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

private:
  Errc code_;
};

// Carries the 1-based line number and the offending field for record parsing.
class ParseError : public Error {
public:
  ParseError(Errc code, std::size_t line, std::string field, const std::string& detail)
      : Error(code, "line " + std::to_string(line) + ", field '" + field + "': " + detail),
        line_(line), field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

private:
  std::size_t line_;
  std::string field_;
};

} // namespace netmon
