#include "netmon/error.hpp"

namespace netmon {

const char* to_string(Errc code) noexcept {
  switch (code) {
  case Errc::malformed_line: return "malformed-line";
  case Errc::invariant_violation: return "invariant-violation";
  case Errc::non_monotonic_time: return "non-monotonic-time";
  case Errc::mismatched_entity: return "mismatched-entity";
  case Errc::unsorted_input: return "unsorted-input";
  case Errc::budget_infeasible: return "budget-infeasible";
  case Errc::kind_mismatch: return "kind-mismatch";
  case Errc::storage_io_failure: return "storage-io-failure";
  case Errc::unknown_metric: return "unknown-metric";
  case Errc::unknown_entity: return "unknown-entity";
  case Errc::corrupt_file: return "corrupt-file";
  case Errc::version_mismatch: return "version-mismatch";
  case Errc::empty_window: return "empty-window";
  case Errc::insufficient_baseline: return "insufficient-baseline";
  case Errc::insufficient_history: return "insufficient-history";
  case Errc::validation: return "validation";
  case Errc::tool_denied: return "tool-denied";
  case Errc::step_budget_exhausted: return "step-budget-exhausted";
  case Errc::backend_unreachable: return "backend-unreachable";
  case Errc::malformed_response: return "malformed-response";
  case Errc::no_script_match: return "no-script-match";
  case Errc::malformed_payload: return "malformed-payload";
  case Errc::no_agents: return "no-agents";
  case Errc::partial_failure: return "partial-failure";
  case Errc::scenario_target_missing: return "scenario-target-missing";
  case Errc::not_found: return "not-found";
  case Errc::invalid_transition: return "invalid-transition";
  case Errc::gateway_unreachable: return "gateway-unreachable";
  case Errc::partial_ingest: return "partial-ingest";
  case Errc::config: return "config";
  }
  return "unknown";
}

} // namespace netmon
