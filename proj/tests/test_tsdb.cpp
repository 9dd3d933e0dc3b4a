#include <gtest/gtest.h>

#include <random>

#include "netmon/error.hpp"
#include "netmon/tsdb.hpp"
#include "support.hpp"

using namespace netmon;
using namespace netmon::testing;

namespace {

WindowQuery q(std::optional<std::string> entity, std::string metric, std::int64_t a, std::int64_t b,
              std::optional<std::int64_t> step = std::nullopt) {
  return {std::move(entity), std::move(metric), a, b, step};
}

// Optical records with random ports and shuffled timestamps.
std::vector<Record> random_optical(std::mt19937_64& rng, int n, int ports, std::int64_t span) {
  std::uniform_int_distribution<std::int64_t> ts(1, span);
  std::uniform_int_distribution<int> port(1, ports);
  std::normal_distribution<double> dbm(-7.0, 1.0);
  std::vector<Record> out;
  for (int i = 0; i < n; ++i)
    out.push_back(optical(ts(rng), "p" + std::to_string(port(rng)), -2.0 + dbm(rng) / 10, dbm(rng)));
  return out;
}

// Linear scan over the records in append order, stable-sorted by time.
Series scan_oracle(const std::vector<Record>& records, const std::optional<std::string>& entity,
                   std::int64_t a, std::int64_t b) {
  std::vector<std::pair<std::int64_t, std::pair<std::string, double>>> hits;
  for (const auto& r : records) {
    const auto& o = std::get<OpticalSample>(r);
    if (o.timestamp < a || o.timestamp >= b) continue;
    if (entity && o.port_id != *entity) continue;
    hits.push_back({o.timestamp, {o.port_id, o.rx_power_dbm}});
  }
  // Store order: per entity sorted by time (ties in append order), then
  // merged across entities by time with entity-name order on ties.
  std::stable_sort(hits.begin(), hits.end(), [](const auto& x, const auto& y) {
    return std::tie(x.second.first, x.first) < std::tie(y.second.first, y.first);
  });
  std::stable_sort(hits.begin(), hits.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  Series out;
  for (const auto& h : hits) out.push_back({h.first, h.second.second, 1});
  return out;
}

} // namespace

TEST(Store, CountsAppends) {
  Store s(DbKind::interface, "interface");
  s.append(iface(100, "e0"));
  EXPECT_EQ(s.record_count(), 1u);
  EXPECT_EQ(s.handle().db_name, "interface");
}

TEST(Store, RejectsForeignKind) {
  Store s(DbKind::interface, "interface");
  try {
    s.append(flow(1, 2, "10.0.0.1", 10, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kind_mismatch);
  }
  EXPECT_EQ(s.record_count(), 0u);
}

TEST(Store, BatchAppendIsAllOrNothing) {
  Store s(DbKind::optical, "optical");
  const std::vector<Record> batch = {optical(1, "p", 0, 0), optical(0, "p", 0, 0)};
  EXPECT_THROW(s.append(batch), Error);
  EXPECT_EQ(s.record_count(), 0u);
}

TEST(Store, TenThousandRecordsFullRange) {
  std::mt19937_64 rng(5);
  const auto records = random_optical(rng, 10000, 40, 1'000'000);
  Store s(DbKind::optical, "optical");
  s.append(records);
  EXPECT_EQ(s.query_window(q(std::nullopt, "rx_power_dbm", 0, 2'000'000)).size(), 10000u);
}

TEST(Store, EmptyStoreEmptySeries) {
  Store s(DbKind::optical, "optical");
  EXPECT_TRUE(s.query_window(q(std::nullopt, "rx_power_dbm", 0, 100)).empty());
  EXPECT_FALSE(s.coverage());
}

TEST(Store, WindowBoundsAreHalfOpen) {
  Store s(DbKind::optical, "optical");
  s.append(optical(100, "p", -2, -7.5));
  const auto hit = s.query_window(q("p", "rx_power_dbm", 100, 101));
  ASSERT_EQ(hit.size(), 1u);
  EXPECT_EQ(hit[0].value, -7.5);
  EXPECT_TRUE(s.query_window(q("p", "rx_power_dbm", 50, 100)).empty());
  EXPECT_TRUE(s.query_window(q("p", "rx_power_dbm", 101, 200)).empty());
}

TEST(Store, QueryErrors) {
  Store s(DbKind::optical, "optical");
  s.append(optical(100, "p", -2, -7.5));
  EXPECT_THROW(s.query_window(q("p", "bps_in", 0, 10)), Error);
  EXPECT_THROW(s.query_window(q("nope", "rx_power_dbm", 0, 10)), Error);
  EXPECT_THROW(s.query_window(q("p", "rx_power_dbm", 10, 10)), Error);
  EXPECT_THROW(s.query_window(q("p", "rx_power_dbm", 0, 10, 0)), Error);
}

TEST(Store, RandomWindowsMatchLinearScan) {
  std::mt19937_64 rng(9);
  const auto records = random_optical(rng, 500, 5, 10000);
  Store s(DbKind::optical, "optical");
  for (const auto& r : records) s.append(r);
  std::uniform_int_distribution<std::int64_t> t(0, 10001);
  std::uniform_int_distribution<int> port(0, 5);
  for (int i = 0; i < 50; ++i) {
    std::int64_t a = t(rng), b = t(rng);
    if (a > b) std::swap(a, b);
    if (a == b) ++b;
    const int p = port(rng);
    const std::optional<std::string> entity = p == 0 ? std::nullopt : std::optional("p" + std::to_string(p));
    EXPECT_EQ(s.query_window(q(entity, "rx_power_dbm", a, b)), scan_oracle(records, entity, a, b)) << a << " " << b;
  }
}

TEST(Store, RatesSkipResetsAndUseThePrecedingSample) {
  Store s(DbKind::interface, "interface");
  s.append(iface(60, "e", 0));
  s.append(iface(120, "e", 600));
  s.append(iface(180, "e", 100)); // device restart
  s.append(iface(240, "e", 1300));
  const auto pps = s.query_window(q("e", "pps_in", 120, 1000));
  ASSERT_EQ(pps.size(), 2u);
  EXPECT_EQ(pps[0], (Point{120, 10.0, 1}));
  EXPECT_EQ(pps[1], (Point{240, 20.0, 1}));
}

TEST(Store, LateRecordsSlotIntoPlace) {
  Store s(DbKind::optical, "optical");
  s.append(optical(300, "p", 0, 3));
  s.append(optical(100, "p", 0, 1));
  s.append(optical(200, "p", 0, 2));
  const auto pts = s.query_window(q("p", "rx_power_dbm", 0, 1000));
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_EQ(pts[0].value, 1);
  EXPECT_EQ(pts[2].value, 3);
  EXPECT_EQ(s.coverage()->first_ts, 100);
  EXPECT_EQ(s.coverage()->last_ts, 300);
}

TEST(Store, StepAggregatesMeansPerSlot) {
  Store s(DbKind::optical, "optical");
  for (int i = 0; i < 10; ++i) s.append(optical(1000 + 60 * i, "p", 0, i));
  const auto pts = s.query_window(q("p", "rx_power_dbm", 1000, 1600, 300));
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_EQ(pts[0], (Point{1000, 2.0, 5}));
  EXPECT_EQ(pts[1], (Point{1300, 7.0, 5}));
}

TEST(Store, ListEntitiesDedupedAndSorted) {
  Store s(DbKind::optical, "optical");
  EXPECT_TRUE(s.list_entities().empty());
  s.append(optical(1, "b", 0, 0));
  s.append(optical(2, "a", 0, 0));
  s.append(optical(3, "a", 0, 0));
  EXPECT_EQ(s.list_entities(), (std::vector<std::string>{"a", "b"}));
}

TEST(Persist, EmptyStoreRoundTrip) {
  TempDir dir;
  Store s(DbKind::flow, "flow");
  s.persist(dir / "f.nwts");
  const auto back = Store::open(dir / "f.nwts");
  EXPECT_EQ(back->record_count(), 0u);
  EXPECT_EQ(back->kind(), DbKind::flow);
  EXPECT_EQ(back->name(), "f"); // named after the file stem
}

TEST(Persist, SingleRecordRoundTrip) {
  TempDir dir;
  Store s(DbKind::interface, "interface");
  s.append(iface(60, "e", 10));
  s.persist(dir / "i.nwts");
  const auto back = Store::open(dir / "i.nwts");
  EXPECT_EQ(back->records(), s.records());
  EXPECT_EQ(back->query_window(q("e", "pkts_in", 0, 100)), s.query_window(q("e", "pkts_in", 0, 100)));
}

TEST(Persist, TenThousandRecordsTwentyQueries) {
  TempDir dir;
  std::mt19937_64 rng(21);
  Store s(DbKind::optical, "optical");
  s.append(random_optical(rng, 10000, 30, 500000));
  s.persist(dir / "o.nwts");
  const auto back = Store::open(dir / "o.nwts");
  std::uniform_int_distribution<std::int64_t> t(0, 500001);
  for (int i = 0; i < 20; ++i) {
    std::int64_t a = t(rng), b = t(rng);
    if (a > b) std::swap(a, b);
    const auto query = q(i % 2 ? std::optional<std::string>("p" + std::to_string(i)) : std::nullopt,
                         i % 3 ? "rx_power_dbm" : "tx_power_dbm", a, b + 1, i % 4 == 0 ? std::optional(3600) : std::nullopt);
    EXPECT_EQ(back->query_window(query), s.query_window(query));
  }
}

TEST(Persist, DetectsCorruptionAndVersion) {
  TempDir dir;
  Store s(DbKind::optical, "optical");
  for (int i = 1; i <= 20; ++i) s.append(optical(i, "p", 1.0, 2.0));
  s.persist(dir / "o.nwts");
  auto bytes = slurp(dir / "o.nwts");

  auto corrupt = bytes;
  corrupt[corrupt.size() / 2] ^= 0x5a;
  write_file(dir / "bad.nwts", corrupt);
  try {
    Store::open(dir / "bad.nwts");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::corrupt_file);
  }

  auto versioned = bytes;
  versioned[4] = 99;
  write_file(dir / "ver.nwts", versioned);
  try {
    Store::open(dir / "ver.nwts");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::version_mismatch);
  }

  write_file(dir / "short.nwts", bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(Store::open(dir / "short.nwts"), Error);
  EXPECT_THROW(Store::open(dir / "missing.nwts"), Error);
}
