#include <gtest/gtest.h>

#include <map>
#include <random>

#include "netmon/error.hpp"
#include "netmon/telemetry.hpp"
#include "support.hpp"

using namespace netmon;
using namespace netmon::testing;

namespace {

// Reference loader: split on spaces, split on '=', undo %XX, convert by
// field name. Shares nothing with the library parser.
std::map<std::string, std::string> oracle_fields(const std::string& line) {
  std::map<std::string, std::string> out;
  std::stringstream ss(line);
  for (std::string tok; ss >> tok;) {
    const auto eq = tok.find('=');
    std::string value;
    const std::string raw = tok.substr(eq + 1);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == '%') {
        value += static_cast<char>(std::stoi(raw.substr(i + 1, 2), nullptr, 16));
        i += 2;
      } else {
        value += raw[i];
      }
    }
    out[tok.substr(0, eq)] = value;
  }
  return out;
}

void expect_matches_oracle(const Record& r, const std::string& line) {
  auto f = oracle_fields(line);
  if (f["kind"] == "iface") {
    const auto& s = std::get<TelemetrySample>(r);
    EXPECT_EQ(s.timestamp, std::stoll(f["ts"]));
    EXPECT_EQ(s.interface_id, f["if"]);
    EXPECT_EQ(s.pkts_in, std::stoull(f["pkts_in"]));
    EXPECT_EQ(s.pkts_out, std::stoull(f["pkts_out"]));
    EXPECT_EQ(s.octets_in, std::stoull(f["octets_in"]));
    EXPECT_EQ(s.octets_out, std::stoull(f["octets_out"]));
    EXPECT_EQ(s.errs_in, std::stoull(f["errs_in"]));
    EXPECT_EQ(s.errs_out, std::stoull(f["errs_out"]));
    EXPECT_EQ(s.speed_bps, std::stoull(f["speed"]));
    EXPECT_EQ(s.descr, f["descr"]);
  } else if (f["kind"] == "flow") {
    const auto& x = std::get<FlowRecord>(r);
    EXPECT_EQ(x.start_ts, std::stoll(f["start_ts"]));
    EXPECT_EQ(x.end_ts, std::stoll(f["end_ts"]));
    EXPECT_EQ(x.src_addr, f["src_addr"]);
    EXPECT_EQ(x.dst_addr, f["dst_addr"]);
    EXPECT_EQ(x.src_port, std::stoul(f["src_port"]));
    EXPECT_EQ(x.dst_port, std::stoul(f["dst_port"]));
    EXPECT_EQ(x.proto, std::stoul(f["proto"]));
    EXPECT_EQ(x.bytes, std::stoull(f["bytes"]));
    EXPECT_EQ(x.packets, std::stoull(f["packets"]));
  } else {
    const auto& o = std::get<OpticalSample>(r);
    EXPECT_EQ(o.timestamp, std::stoll(f["ts"]));
    EXPECT_EQ(o.port_id, f["port"]);
    EXPECT_EQ(o.tx_power_dbm, std::stod(f["tx_power_dbm"]));
    EXPECT_EQ(o.rx_power_dbm, std::stod(f["rx_power_dbm"]));
  }
}

} // namespace

TEST(Parse, ZeroCountersInterfaceLine) {
  const auto r = parse_record(
      "kind=iface ts=100 if=eth0 pkts_in=0 pkts_out=0 octets_in=0 octets_out=0 errs_in=0 errs_out=0 "
      "speed=1000 descr=uplink");
  const auto& s = std::get<TelemetrySample>(r);
  EXPECT_EQ(s.pkts_in, 0u);
  EXPECT_EQ(s.errs_in, 0u);
  EXPECT_EQ(s.interface_id, "eth0");
}

TEST(Parse, FlowEndBeforeStartIsInvariantViolation) {
  try {
    parse_record("kind=flow start_ts=200 end_ts=100 src_addr=a dst_addr=b src_port=1 dst_port=2 proto=6 "
                 "bytes=10 packets=1",
                 7);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.code(), Errc::invariant_violation);
    EXPECT_EQ(e.field(), "end_ts");
    EXPECT_EQ(e.line(), 7u);
  }
}

TEST(Parse, RejectsUnknownKindAndMissingFields) {
  EXPECT_THROW(parse_record("kind=bogus ts=1"), ParseError);
  EXPECT_THROW(parse_record("kind=optical ts=1 port=p tx_power_dbm=1"), ParseError);
  EXPECT_THROW(parse_record("kind=optical ts=1 port=p tx_power_dbm=1 rx_power_dbm=x"), ParseError);
  EXPECT_THROW(parse_record("kind=optical ts=1 port=p tx_power_dbm=1 rx_power_dbm=2", DbKind::flow), ParseError);
}

TEST(Parse, HundredLineFixtureMatchesReferenceLoader) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<std::uint64_t> big(0, 1ull << 50);
  std::vector<std::string> lines;
  for (int i = 0; i < 100; ++i) {
    std::string line;
    switch (i % 3) {
    case 0:
      line = "kind=iface ts=" + std::to_string(1000 + i) + " if=sw" + std::to_string(i) + "/1 pkts_in=" +
             std::to_string(big(rng)) + " pkts_out=" + std::to_string(big(rng)) + " octets_in=" +
             std::to_string(big(rng)) + " octets_out=" + std::to_string(big(rng)) + " errs_in=" +
             std::to_string(i) + " errs_out=0 speed=10000000000 descr=hall%20B%25" + std::to_string(i);
      break;
    case 1:
      line = "kind=flow start_ts=" + std::to_string(2000 + i) + " end_ts=" + std::to_string(2100 + i) +
             " src_addr=10.0.0." + std::to_string(i) + " dst_addr=192.0.2.1 src_port=" +
             std::to_string(1024 + i) + " dst_port=443 proto=17 bytes=" + std::to_string(big(rng)) +
             " packets=" + std::to_string(1 + i);
      break;
    default:
      line = "kind=optical ts=" + std::to_string(3000 + i) + " port=p" + std::to_string(i) +
             " tx_power_dbm=-2." + std::to_string(i) + " rx_power_dbm=-7.25";
    }
    lines.push_back(line);
  }
  TempDir dir;
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  write_file(dir / "fixture.txt", text);

  std::ifstream in(dir / "fixture.txt");
  std::vector<Record> parsed;
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) parsed.push_back(parse_record(line, ++n));
  ASSERT_EQ(parsed.size(), 100u);
  for (std::size_t i = 0; i < parsed.size(); ++i) expect_matches_oracle(parsed[i], lines[i]);
}

TEST(Format, RoundTripsEveryKind) {
  TelemetrySample s = iface(5, "booth 1/eth0", 1, 2, 3, 4, 5, 6);
  s.descr = "100% up\tlink";
  const std::vector<Record> records = {s, flow(1, 2, "10.0.0.1", 100, 2), optical(9, "p1", -1.125, -7.0625)};
  for (const auto& r : records) {
    const auto line = format_record(r);
    EXPECT_EQ(line.find('\t'), std::string::npos);
    EXPECT_EQ(parse_record(line), r) << line;
  }
}

TEST(Rates, PacketRateFromCounterDelta) {
  const auto r = counters_to_rate(iface(0 + 60, "e", 1000), iface(120, "e", 7000));
  EXPECT_DOUBLE_EQ(r.pps_in, 100.0);
  EXPECT_FALSE(r.reset);
}

TEST(Rates, BitRateIsOctetsTimesEight) {
  const auto r = counters_to_rate(iface(60, "e", 0, 0, 0, 0), iface(120, "e", 0, 0, 0, 750));
  EXPECT_DOUBLE_EQ(r.bps_out, 100.0);
}

TEST(Rates, CounterWrapIsResetWithZeroRates) {
  const auto r = counters_to_rate(iface(60, "e", UINT64_MAX - 99, 10), iface(120, "e", 400, 20));
  EXPECT_TRUE(r.reset);
  for (std::size_t m = 0; m < kRateMetricCount; ++m) EXPECT_EQ(rate_metric(r, m), 0.0);
}

TEST(Rates, RejectsMismatchedOrBackwardSamples) {
  EXPECT_THROW(counters_to_rate(iface(60, "a"), iface(120, "b")), Error);
  EXPECT_THROW(counters_to_rate(iface(120, "a"), iface(120, "a")), Error);
}

namespace {

std::vector<RateSample> minute_rates(const std::vector<std::string>& ids, std::int64_t t0, int minutes,
                                     std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1000.0);
  std::vector<RateSample> out;
  for (const auto& id : ids)
    for (int i = 0; i < minutes; ++i) {
      RateSample r;
      r.timestamp = t0 + 60 * i;
      r.interface_id = id;
      r.pps_in = u(rng);
      r.pps_out = u(rng);
      r.bps_in = u(rng);
      r.bps_out = u(rng);
      r.eps_in = u(rng);
      r.eps_out = u(rng);
      r.interval_s = 60;
      out.push_back(r);
    }
  return out;
}

} // namespace

TEST(Consolidate, OneHourOfMinutesIsOneBucket) {
  std::mt19937_64 rng(1);
  const auto rates = minute_rates({"e"}, 3600 * 10, 60, rng);
  const auto c = consolidate(rates, 3600, 10);
  ASSERT_EQ(c.buckets.size(), 1u);
  EXPECT_EQ(c.buckets[0].count, 60u);
  EXPECT_EQ(c.window_s, 3600);
}

TEST(Consolidate, ConstantSeriesAggregates) {
  std::vector<RateSample> rates;
  for (int i = 0; i < 30; ++i) {
    RateSample r;
    r.timestamp = 7200 + 60 * i;
    r.interface_id = "e";
    r.pps_in = 5.0;
    rates.push_back(r);
  }
  const auto c = consolidate(rates, 3600, 4);
  ASSERT_EQ(c.buckets.size(), 1u);
  EXPECT_EQ(c.buckets[0].metrics[0].mean, 5.0);
  EXPECT_EQ(c.buckets[0].metrics[0].max, 5.0);
  EXPECT_EQ(c.buckets[0].metrics[0].min, 5.0);
}

TEST(Consolidate, GroupByOracleOnThreeEntitiesTwoDays) {
  std::mt19937_64 rng(7);
  const std::int64_t t0 = 1711929600;
  auto rates = minute_rates({"a", "b", "c"}, t0, 48 * 60, rng);
  std::stable_sort(rates.begin(), rates.end(),
                   [](const RateSample& x, const RateSample& y) { return x.timestamp < y.timestamp; });
  const auto c = consolidate(rates, 3600, 144);
  ASSERT_EQ(c.window_s, 3600);
  ASSERT_EQ(c.buckets.size(), 144u);

  std::map<std::pair<std::string, std::int64_t>, std::array<double, 6>> sums;
  std::map<std::pair<std::string, std::int64_t>, int> counts;
  for (const auto& r : rates) {
    const auto key = std::make_pair(r.interface_id, (r.timestamp / 3600) * 3600);
    auto& s = sums[key];
    s[0] += r.pps_in, s[1] += r.pps_out, s[2] += r.bps_in, s[3] += r.bps_out, s[4] += r.eps_in, s[5] += r.eps_out;
    ++counts[key];
  }
  ASSERT_EQ(sums.size(), 144u);
  for (const auto& b : c.buckets) {
    const auto key = std::make_pair(b.entity_id, b.bucket_start);
    ASSERT_TRUE(sums.count(key));
    EXPECT_EQ(b.count, static_cast<std::uint64_t>(counts[key]));
    for (std::size_t m = 0; m < 6; ++m) EXPECT_TRUE(close(b.metrics[m].sum, sums[key][m], 1e-12));
  }
}

TEST(Consolidate, BudgetDoublesWindowAndStaysInRange) {
  std::mt19937_64 rng(3);
  const auto rates = minute_rates({"a", "b"}, 0, 7 * 24 * 60, rng);
  const std::size_t budget = 50;
  const auto c = consolidate(rates, 3600, budget);
  EXPECT_LE(c.buckets.size(), budget);
  EXPECT_GE(c.buckets.size(), budget / 2);
  EXPECT_GT(c.window_s, 3600);
}

TEST(Consolidate, RejectsUnsortedAndInfeasible) {
  std::mt19937_64 rng(3);
  auto rates = minute_rates({"a", "b"}, 0, 10, rng);
  EXPECT_THROW(consolidate(rates, 60, 1), Error);
  std::swap(rates[0], rates[1]);
  EXPECT_THROW(consolidate(rates, 60, 100), Error);
}
