#include "netmon/correlator.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <tuple>

#include "netmon/error.hpp"

namespace netmon {

const char* to_string(TopologyMap::LinkType type) noexcept {
  switch (type) {
  case TopologyMap::LinkType::port: return "port";
  case TopologyMap::LinkType::booth: return "booth";
  case TopologyMap::LinkType::addr: return "addr";
  }
  return "unknown";
}

const char* to_string(IncidentStatus s) noexcept {
  switch (s) {
  case IncidentStatus::open: return "open";
  case IncidentStatus::acknowledged: return "acknowledged";
  case IncidentStatus::resolved: return "resolved";
  }
  return "unknown";
}

TopologyMap TopologyMap::parse(std::string_view text) {
  TopologyMap topo;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto fail = [&](const std::string& what) {
      throw Error(Errc::config, "topology line " + std::to_string(line_no) + ": " + what);
    };
    std::istringstream tokens(line);
    std::string verb, left, right, extra;
    tokens >> verb >> left >> right;
    if (verb != "link" || left.empty() || right.empty() || (tokens >> extra)) fail("expected 'link iface=<id> <port|booth|addr>=<id>'");
    if (left.rfind("iface=", 0) != 0 || left.size() == 6) fail("first field must be iface=<id>");
    const std::size_t eq = right.find('=');
    if (eq == std::string::npos || eq + 1 == right.size()) fail("second field must be key=value");
    const std::string key = right.substr(0, eq);
    Link link;
    link.iface = left.substr(6);
    link.other = right.substr(eq + 1);
    if (key == "port") link.type = LinkType::port;
    else if (key == "booth") link.type = LinkType::booth;
    else if (key == "addr") link.type = LinkType::addr;
    else fail("unknown association '" + key + "'");
    try {
      topo.add(std::move(link));
    } catch (const Error& e) {
      fail(e.what());
    }
  }
  return topo;
}

TopologyMap TopologyMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::config, "cannot read topology " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str());
}

std::string TopologyMap::format() const {
  std::string out;
  for (const auto& l : links_)
    out += "link iface=" + l.iface + " " + to_string(l.type) + "=" + l.other + "\n";
  return out;
}

void TopologyMap::add(Link link) {
  for (const auto& l : links_) {
    if (l == link) throw Error(Errc::config, "duplicate association " + link.iface + " <-> " + link.other);
    if (link.type == LinkType::port && l.type == LinkType::port && l.iface == link.iface)
      throw Error(Errc::config, "interface " + link.iface + " already maps to port " + l.other);
  }
  adjacency_[link.iface].insert(link.other);
  adjacency_[link.other].insert(link.iface);
  links_.push_back(std::move(link));
}

bool TopologyMap::linked(std::string_view a, std::string_view b) const {
  if (a == b) return true;
  const auto it = adjacency_.find(a);
  return it != adjacency_.end() && it->second.count(std::string(b)) > 0;
}

std::vector<std::string> TopologyMap::neighbours(std::string_view entity) const {
  const auto it = adjacency_.find(entity);
  if (it == adjacency_.end()) return {};
  return {it->second.begin(), it->second.end()};
}

std::optional<std::string> TopologyMap::port_of(std::string_view iface) const {
  for (const auto& l : links_)
    if (l.type == LinkType::port && l.iface == iface) return l.other;
  return std::nullopt;
}

std::optional<std::string> TopologyMap::booth_of(std::string_view iface) const {
  for (const auto& l : links_)
    if (l.type == LinkType::booth && l.iface == iface) return l.other;
  return std::nullopt;
}

std::vector<std::string> TopologyMap::interfaces_of(std::string_view entity) const {
  std::set<std::string> out;
  for (const auto& l : links_) {
    if (l.iface == entity) out.insert(l.iface);
    if (l.other == entity) out.insert(l.iface);
  }
  return {out.begin(), out.end()};
}

std::vector<std::string> TopologyMap::correlation_keys(std::string_view entity) const {
  std::set<std::string> keys{std::string(entity)};
  if (const auto it = adjacency_.find(entity); it != adjacency_.end()) {
    keys.insert(it->second.begin(), it->second.end());
    // Reach the booth of an interface linked to a port or address.
    for (const auto& n : it->second)
      if (const auto booth = booth_of(n)) keys.insert(*booth);
  }
  return {keys.begin(), keys.end()};
}

std::map<DbKind, std::vector<AnomalyEvent>> Incident::members_by_kind() const {
  std::map<DbKind, std::vector<AnomalyEvent>> out;
  for (const auto& e : members) out[e.source].push_back(e);
  return out;
}

bool Incident::touches(std::string_view entity) const {
  return std::any_of(members.begin(), members.end(), [&](const AnomalyEvent& e) { return e.entity_id == entity; });
}

namespace {

auto event_key(const AnomalyEvent& e) {
  return std::tie(e.window_start, e.source, e.entity_id, e.metric, e.kind, e.window_end);
}

class DisjointSets {
public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

private:
  std::vector<std::size_t> parent_;
};

std::string cause_label(DbKind layer, const std::string& entity, const std::vector<const AnomalyEvent*>& events) {
  switch (layer) {
  case DbKind::optical: {
    const bool drop = std::any_of(events.begin(), events.end(),
                                  [](const AnomalyEvent* e) { return e->direction == Direction::low; });
    return (drop ? "optical degradation on " : "optical power anomaly on ") + entity;
  }
  case DbKind::interface: {
    const bool errors = std::any_of(events.begin(), events.end(),
                                    [](const AnomalyEvent* e) { return e->kind == EventKind::error_spike; });
    if (errors) return "interface errors on " + entity;
    const bool loss = std::any_of(events.begin(), events.end(),
                                  [](const AnomalyEvent* e) { return e->direction == Direction::low; });
    return (loss ? "traffic loss on " : "traffic surge on ") + entity;
  }
  case DbKind::flow: return "flow volume anomaly from " + entity;
  }
  return entity;
}

double layer_weight(DbKind layer) {
  switch (layer) {
  case DbKind::optical: return 6.0;
  case DbKind::interface: return 3.0;
  case DbKind::flow: return 1.0;
  }
  return 0.0;
}

} // namespace

std::vector<Hypothesis> rank_root_cause(const Incident& incident, const TopologyMap& topo) {
  struct Candidate {
    DbKind layer;
    std::string entity;
    std::int64_t onset;
    std::vector<const AnomalyEvent*> events;
  };
  std::map<std::pair<DbKind, std::string>, Candidate> by_entity;
  for (const auto& e : incident.members) {
    auto [it, inserted] = by_entity.try_emplace({e.source, e.entity_id}, Candidate{e.source, e.entity_id, e.window_start, {}});
    it->second.onset = std::min(it->second.onset, e.window_start);
    it->second.events.push_back(&e);
  }

  std::vector<Candidate> candidates;
  for (auto& [key, c] : by_entity) candidates.push_back(std::move(c));
  const std::size_t n = candidates.size();

  std::vector<double> raw(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t breadth = 0;
    std::size_t later = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (candidates[i].entity != candidates[j].entity && topo.linked(candidates[i].entity, candidates[j].entity))
        ++breadth;
      if (candidates[j].onset > candidates[i].onset) ++later;
    }
    const double temporal = n > 1 ? static_cast<double>(later) / static_cast<double>(n - 1) : 0.0;
    raw[i] = layer_weight(candidates[i].layer) + static_cast<double>(breadth) + temporal;
  }
  const double total = std::accumulate(raw.begin(), raw.end(), 0.0);

  std::vector<Hypothesis> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Hypothesis h;
    h.cause = cause_label(candidates[i].layer, candidates[i].entity, candidates[i].events);
    h.entity_id = candidates[i].entity;
    h.layer = candidates[i].layer;
    h.onset = candidates[i].onset;
    h.score = raw[i] / total;
    out.push_back(std::move(h));
  }
  std::sort(out.begin(), out.end(), [](const Hypothesis& a, const Hypothesis& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.onset != b.onset) return a.onset < b.onset;
    if (a.entity_id != b.entity_id) return a.entity_id < b.entity_id;
    return a.layer < b.layer;
  });
  return out;
}

std::vector<Incident> correlate(std::span<const PatternReport> reports, const TopologyMap& topo,
                                std::int64_t gap_s) {
  std::vector<AnomalyEvent> events;
  for (const auto& r : reports) events.insert(events.end(), r.events.begin(), r.events.end());
  std::sort(events.begin(), events.end(),
            [](const AnomalyEvent& a, const AnomalyEvent& b) { return event_key(a) < event_key(b); });
  events.erase(std::unique(events.begin(), events.end(),
                           [](const AnomalyEvent& a, const AnomalyEvent& b) { return event_key(a) == event_key(b); }),
               events.end());

  DisjointSets sets(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) {
    for (std::size_t j = i + 1; j < events.size(); ++j) {
      const auto& a = events[i];
      const auto& b = events[j];
      // Sorted by start: once b starts too late for a, every later b does too.
      if (b.window_start - a.window_end > gap_s) break;
      const std::int64_t gap = std::max(a.window_start, b.window_start) - std::min(a.window_end, b.window_end);
      if (gap <= gap_s && topo.linked(a.entity_id, b.entity_id)) sets.unite(i, j);
    }
  }

  std::map<std::size_t, Incident> groups;
  for (std::size_t i = 0; i < events.size(); ++i) {
    Incident& inc = groups[sets.find(i)];
    if (inc.members.empty()) {
      inc.window = {events[i].window_start, events[i].window_end};
    } else {
      inc.window.start = std::min(inc.window.start, events[i].window_start);
      inc.window.end = std::max(inc.window.end, events[i].window_end);
    }
    inc.members.push_back(events[i]);
  }

  std::vector<Incident> out;
  out.reserve(groups.size());
  for (auto& [root, inc] : groups) {
    const AnomalyEvent& first = inc.members.front();
    inc.incident_id = "inc-" + std::to_string(first.window_start) + "-" + first.entity_id + "-" + first.metric;
    inc.hypotheses = rank_root_cause(inc, topo);
    out.push_back(std::move(inc));
  }
  std::sort(out.begin(), out.end(), [](const Incident& a, const Incident& b) {
    return std::tie(a.window.start, a.incident_id) < std::tie(b.window.start, b.incident_id);
  });
  return out;
}

json to_json(const Incident& incident) {
  json members = json::object();
  for (const auto& [kind, events] : incident.members_by_kind()) {
    json list = json::array();
    for (const auto& e : events) list.push_back(to_json(e));
    members[to_string(kind)] = std::move(list);
  }
  json hypotheses = json::array();
  for (const auto& h : incident.hypotheses)
    hypotheses.push_back({{"cause", h.cause},
                          {"entity_id", h.entity_id},
                          {"layer", to_string(h.layer)},
                          {"onset", h.onset},
                          {"score", h.score}});
  return {{"incident_id", incident.incident_id},
          {"window", {{"start", incident.window.start}, {"end", incident.window.end}}},
          {"members", std::move(members)},
          {"member_count", incident.members.size()},
          {"hypotheses", std::move(hypotheses)},
          {"status", to_string(incident.status)}};
}

} // namespace netmon
