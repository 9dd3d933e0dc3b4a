#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "netmon/report.hpp"

namespace netmon {

/// Operator-supplied map of which entities in different databases refer to
/// the same equipment.
///
/// File format, one association per line:
///   link iface=<id> port=<id>    interface <-> optical port (at most one per interface)
///   link iface=<id> booth=<id>   interface <-> exhibitor booth
///   link iface=<id> addr=<addr>  interface <-> flow source address
class TopologyMap {
public:
  enum class LinkType { port, booth, addr };

  struct Link {
    std::string iface;
    LinkType type = LinkType::port;
    std::string other;

    bool operator==(const Link&) const = default;
  };

  static TopologyMap parse(std::string_view text);
  static TopologyMap load(const std::filesystem::path& path);
  std::string format() const;

  void add(Link link); // throws Error(config) on duplicates or a second port

  const std::vector<Link>& links() const noexcept { return links_; }
  // Same entity or directly associated.
  bool linked(std::string_view a, std::string_view b) const;
  std::vector<std::string> neighbours(std::string_view entity) const;
  std::optional<std::string> port_of(std::string_view iface) const;
  std::optional<std::string> booth_of(std::string_view iface) const;
  std::vector<std::string> interfaces_of(std::string_view entity) const;
  // The entity itself plus every directly associated id (booths included).
  std::vector<std::string> correlation_keys(std::string_view entity) const;

private:
  std::vector<Link> links_;
  std::map<std::string, std::set<std::string>, std::less<>> adjacency_;
};

const char* to_string(TopologyMap::LinkType type) noexcept;

enum class IncidentStatus { open, acknowledged, resolved };
const char* to_string(IncidentStatus s) noexcept;

struct Hypothesis {
  std::string cause;
  std::string entity_id;
  DbKind layer = DbKind::interface;
  std::int64_t onset = 0;
  double score = 0.0;

  bool operator==(const Hypothesis&) const = default;
};

struct Incident {
  std::string incident_id;
  Window window;
  std::vector<AnomalyEvent> members; // canonical event order
  std::vector<Hypothesis> hypotheses;
  IncidentStatus status = IncidentStatus::open;

  std::map<DbKind, std::vector<AnomalyEvent>> members_by_kind() const;
  bool touches(std::string_view entity) const;
};

inline constexpr std::int64_t kDefaultMergeGap = 900;

// Groups events whose entities are linked and whose windows overlap or sit
// within gap_s of each other (transitively). Duplicate events collapse.
std::vector<Incident> correlate(std::span<const PatternReport> reports, const TopologyMap& topo,
                                std::int64_t gap_s = kDefaultMergeGap);

// One hypothesis per affected entity, scored by layer (optical > interface >
// flow), links to other affected entities, and onset order; normalized to
// sum to 1 and sorted by score, then onset, then entity id.
std::vector<Hypothesis> rank_root_cause(const Incident& incident, const TopologyMap& topo);

json to_json(const Incident& incident);

} // namespace netmon
