#include <gtest/gtest.h>

#include "netmon/correlator.hpp"
#include "netmon/error.hpp"
#include "netmon/report.hpp"

using namespace netmon;

namespace {

constexpr std::int64_t kH = 3600;
constexpr std::int64_t kT0 = 1712016000;

AnomalyEvent ev(DbKind src, std::string entity, std::string metric, std::int64_t start, Severity sev,
                Direction dir = Direction::high, EventKind kind = EventKind::level_shift) {
  AnomalyEvent e;
  e.source = src;
  e.entity_id = std::move(entity);
  e.metric = std::move(metric);
  e.window_start = start;
  e.window_end = start + kH;
  e.observed = 1.0;
  e.score = 9.0;
  e.severity = sev;
  e.direction = dir;
  e.kind = kind;
  return e;
}

PatternReport report(std::string agent, std::vector<AnomalyEvent> events) {
  PatternReport r;
  r.agent_id = agent;
  r.report_id = agent + "-" + std::to_string(events.empty() ? 0 : events.front().window_start);
  r.events = std::move(events);
  r.window = {r.events.front().window_start, r.events.front().window_end};
  return r;
}

TopologyMap topo() {
  return TopologyMap::parse("# demo\n"
                            "link iface=b1-eth0 port=port-01\n"
                            "link iface=b1-eth0 booth=b1\n"
                            "link iface=b1-eth1 booth=b1\n"
                            "link iface=b2-eth0 port=port-02\n"
                            "link iface=b1-eth0 addr=10.0.1.10\n");
}

const AnomalyEvent kOpticalDrop =
    ev(DbKind::optical, "port-01", "rx_power_dbm", kT0, Severity::critical, Direction::low);
const AnomalyEvent kErrorSpike =
    ev(DbKind::interface, "b1-eth0", "eps_in", kT0, Severity::critical, Direction::high, EventKind::error_spike);

} // namespace

TEST(Topology, ParseFormatAndQueries) {
  const auto t = topo();
  EXPECT_EQ(TopologyMap::parse(t.format()).links(), t.links());
  EXPECT_EQ(t.port_of("b1-eth0"), "port-01");
  EXPECT_EQ(t.booth_of("b1-eth1"), "b1");
  EXPECT_TRUE(t.linked("port-01", "b1-eth0"));
  EXPECT_TRUE(t.linked("b1-eth0", "b1-eth0"));
  EXPECT_FALSE(t.linked("port-01", "b2-eth0"));
  EXPECT_EQ(t.interfaces_of("port-02"), (std::vector<std::string>{"b2-eth0"}));
  const auto keys = t.correlation_keys("b1-eth0");
  for (const char* k : {"b1-eth0", "port-01", "b1", "10.0.1.10"})
    EXPECT_NE(std::find(keys.begin(), keys.end(), k), keys.end()) << k;
}

TEST(Topology, RejectsDuplicatesAndSecondPort) {
  EXPECT_THROW(TopologyMap::parse("link iface=a port=p\nlink iface=a port=q\n"), Error);
  EXPECT_THROW(TopologyMap::parse("link iface=a booth=b\nlink iface=a booth=b\n"), Error);
  EXPECT_THROW(TopologyMap::parse("link iface=a\n"), Error);
  EXPECT_THROW(TopologyMap::parse("bogus\n"), Error);
}

TEST(Correlate, LoneEventIsOneIncident) {
  const std::vector<PatternReport> reports = {report("interface-agent", {kErrorSpike})};
  const auto incidents = correlate(reports, topo());
  ASSERT_EQ(incidents.size(), 1u);
  EXPECT_EQ(incidents[0].members.size(), 1u);
  ASSERT_EQ(incidents[0].hypotheses.size(), 1u);
  EXPECT_DOUBLE_EQ(incidents[0].hypotheses[0].score, 1.0);
}

TEST(Correlate, OpticalDropAndMappedErrorsMerge) {
  const std::vector<PatternReport> reports = {report("optical-agent", {kOpticalDrop}),
                                              report("interface-agent", {kErrorSpike})};
  const auto incidents = correlate(reports, topo());
  ASSERT_EQ(incidents.size(), 1u);
  EXPECT_EQ(incidents[0].members.size(), 2u);
  EXPECT_EQ(incidents[0].members_by_kind().size(), 2u);
  EXPECT_TRUE(incidents[0].touches("port-01"));
  EXPECT_TRUE(incidents[0].touches("b1-eth0"));
}

TEST(Correlate, UnlinkedEventsTwoHoursApartStaySeparate) {
  const std::vector<PatternReport> reports = {
      report("interface-agent", {ev(DbKind::interface, "b1-eth0", "bps_in", kT0, Severity::critical)}),
      report("interface-agent", {ev(DbKind::interface, "b2-eth0", "bps_in", kT0 + 2 * kH, Severity::critical)})};
  EXPECT_EQ(correlate(reports, topo()).size(), 2u);
}

TEST(Correlate, GapRuleAndDuplicates) {
  const auto late = ev(DbKind::interface, "b1-eth0", "eps_in", kT0 + kH + 900, Severity::critical,
                       Direction::high, EventKind::error_spike);
  const auto too_late = ev(DbKind::interface, "b1-eth0", "bps_in", kT0 + kH + 901, Severity::critical);
  const std::vector<PatternReport> within = {report("o", {kOpticalDrop}), report("i", {late}),
                                             report("i", {late})};
  const auto merged = correlate(within, topo());
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_EQ(merged[0].members.size(), 2u);
  const std::vector<PatternReport> beyond = {report("o", {kOpticalDrop}), report("i", {too_late})};
  EXPECT_EQ(correlate(beyond, topo()).size(), 2u);
}

TEST(Correlate, TransitiveChainsMerge) {
  // port-01 ~ b1-eth0 ~ 10.0.1.10: the optical event and the flow event are
  // not linked directly but share the interface.
  const std::vector<PatternReport> reports = {
      report("o", {kOpticalDrop}), report("i", {kErrorSpike}),
      report("f", {ev(DbKind::flow, "10.0.1.10", "bytes", kT0, Severity::warn)})};
  const auto incidents = correlate(reports, topo());
  ASSERT_EQ(incidents.size(), 1u);
  EXPECT_EQ(incidents[0].members.size(), 3u);
}

TEST(RootCause, OpticalFirstIsTopHypothesis) {
  auto later_errors = kErrorSpike;
  later_errors.window_start += kH;
  later_errors.window_end += kH;
  const std::vector<PatternReport> reports = {report("o", {kOpticalDrop}), report("i", {later_errors})};
  const auto incidents = correlate(reports, topo());
  ASSERT_EQ(incidents.size(), 1u);
  const auto& h = incidents[0].hypotheses;
  ASSERT_EQ(h.size(), 2u);
  EXPECT_EQ(h[0].entity_id, "port-01");
  EXPECT_EQ(h[0].cause, "optical degradation on port-01");
  EXPECT_EQ(h[0].layer, DbKind::optical);
  // Raw scores by hand: optical 6 + 1 link + 1 later = 8; interface 3 + 1 + 0 = 4.
  EXPECT_NEAR(h[0].score, 8.0 / 12.0, 1e-12);
  EXPECT_NEAR(h[1].score, 4.0 / 12.0, 1e-12);
  EXPECT_EQ(h[1].cause, "interface errors on b1-eth0");
}

TEST(RootCause, SameLayerTieBreaksByEntityId) {
  Incident inc;
  inc.members = {ev(DbKind::interface, "b1-eth1", "bps_in", kT0, Severity::critical),
                 ev(DbKind::interface, "b1-eth0", "bps_in", kT0, Severity::critical)};
  const auto t = TopologyMap::parse("link iface=b1-eth0 booth=b1\nlink iface=b1-eth1 booth=b1\n");
  const auto a = rank_root_cause(inc, t);
  std::reverse(inc.members.begin(), inc.members.end());
  const auto b = rank_root_cause(inc, t);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a[0].entity_id, "b1-eth0");
  EXPECT_DOUBLE_EQ(a[0].score, 0.5);
}

TEST(ReportJson, RoundTripAndStrictEnums) {
  auto r = report("optical-agent", {kOpticalDrop});
  r.summary = "1 critical";
  r.correlation_keys = {"port-01"};
  EXPECT_EQ(report_from_json(to_json(r)), r);
  auto j = to_json(kOpticalDrop);
  j["severity"] = "loud";
  EXPECT_THROW(event_from_json(j), Error);
  EXPECT_THROW(db_kind_from_string("iface2"), Error);
}

TEST(IncidentJson, Shape) {
  const std::vector<PatternReport> reports = {report("o", {kOpticalDrop}), report("i", {kErrorSpike})};
  const auto j = to_json(correlate(reports, topo()).at(0));
  EXPECT_EQ(j["member_count"], 2);
  EXPECT_EQ(j["status"], "open");
  EXPECT_TRUE(j["members"].contains("optical"));
  EXPECT_TRUE(j["members"].contains("interface"));
  EXPECT_EQ(j["hypotheses"][0]["layer"], "optical");
}
