#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "netmon/anomaly.hpp"

namespace netmon {

using json = nlohmann::json;

inline constexpr std::size_t kMaxSummaryChars = 2000;

/// An agent's sanitized account of one window in its own database: events,
/// aggregates and entity keys only, never raw records.
struct PatternReport {
  std::string report_id;
  std::string agent_id;
  Window window;
  std::vector<AnomalyEvent> events;
  std::string summary;
  std::vector<std::string> correlation_keys;

  bool operator==(const PatternReport&) const = default;
};

json to_json(const AnomalyEvent& e);
AnomalyEvent event_from_json(const json& j); // throws Error(malformed_payload)
json to_json(const PatternReport& r);
PatternReport report_from_json(const json& j);

// Strict readers for enum spellings; throw Error(malformed_payload).
DbKind db_kind_from_string(const std::string& s);

} // namespace netmon
