#include <gtest/gtest.h>

#include <cstdlib>
#include <regex>
#include <set>

#include "netmon/error.hpp"
#include "netmon/gateway.hpp"
#include "netmon/ops.hpp"
#include "netmon/synth.hpp"
#include "fixtures.hpp"
#include "support.hpp"

using namespace netmon;
using namespace netmon::testing;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status;
  std::string out;
  std::string err;
};

Run run_cli(const std::string& args, const TempDir& dir) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd = std::string(NETMON_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int rc = std::system(cmd.c_str());
  return {WIFEXITED(rc) ? WEXITSTATUS(rc) : -1, slurp(out), slurp(err)};
}

SynthConfig one_interface_day() {
  SynthConfig cfg;
  cfg.interfaces = 1;
  cfg.days = 1;
  return cfg;
}

} // namespace

TEST(Synth, OneInterfaceOneDay) {
  const auto out = synth(one_interface_day());
  ASSERT_EQ(out.interface.size(), 1440u);
  std::int64_t prev = 0;
  for (const auto& r : out.interface) {
    const auto& s = std::get<TelemetrySample>(r);
    EXPECT_EQ(s.errs_in, 0u);
    EXPECT_EQ(s.errs_out, 0u);
    EXPECT_EQ(s.interface_id, "booth01-eth0");
    EXPECT_GT(s.timestamp, prev);
    prev = s.timestamp;
  }
  EXPECT_EQ(out.manifest["faults"].size(), 0u);
}

TEST(Synth, SameSeedSameBytes) {
  auto cfg = one_interface_day();
  cfg.interfaces = 3;
  cfg.scenarios = {{FaultKind::traffic_flood, "booth01-eth1", cfg.start_ts + 7200, 3600, 4.0}};
  TempDir a, b, c;
  write_synth(synth(cfg), a.path());
  write_synth(synth(cfg), b.path());
  cfg.seed = 2;
  write_synth(synth(cfg), c.path());
  for (const char* f : {"interface.txt", "flow.txt", "optical.txt", "topology.txt", "manifest.json"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    EXPECT_FALSE(slurp(a / f).empty()) << f;
  }
  EXPECT_NE(slurp(a / "interface.txt"), slurp(c / "interface.txt"));
}

TEST(Synth, OpticalDegradationDropsRxByMagnitude) {
  auto cfg = one_interface_day();
  const auto clean = synth(cfg);
  const std::int64_t onset = cfg.start_ts + 3 * 3600;
  cfg.scenarios = {{FaultKind::optical_degradation, "port-01", onset, 3600, 10.0}};
  const auto faulty = synth(cfg);
  ASSERT_EQ(clean.optical.size(), faulty.optical.size());
  int inside = 0;
  for (std::size_t i = 0; i < clean.optical.size(); ++i) {
    const auto& a = std::get<OpticalSample>(clean.optical[i]);
    const auto& b = std::get<OpticalSample>(faulty.optical[i]);
    EXPECT_DOUBLE_EQ(a.tx_power_dbm, b.tx_power_dbm);
    const bool active = a.timestamp >= onset && a.timestamp < onset + 3600;
    inside += active;
    EXPECT_NEAR(a.rx_power_dbm - b.rx_power_dbm, active ? 10.0 : 0.0, 1e-9) << a.timestamp;
  }
  EXPECT_EQ(inside, 12);
  // Other streams are untouched.
  EXPECT_EQ(clean.interface, faulty.interface);
}

TEST(Synth, RejectsUnknownTargetsAndBadConfig) {
  auto cfg = one_interface_day();
  cfg.scenarios = {{FaultKind::error_storm, "booth99-eth0", cfg.start_ts, 600, 5.0}};
  try {
    synth(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::scenario_target_missing);
  }
  cfg = one_interface_day();
  cfg.interfaces = 0;
  EXPECT_THROW(synth(cfg), Error);
}

TEST(Synth, StandardSuiteCoversEveryKind) {
  SynthConfig cfg;
  const auto faults = standard_faults(cfg);
  ASSERT_EQ(faults.size(), 12u);
  std::map<FaultKind, int> kinds;
  std::set<std::string> targets;
  for (const auto& f : faults) {
    ++kinds[f.kind];
    targets.insert(f.target);
    EXPECT_GE(f.onset_ts, cfg.start_ts + 86400);
    EXPECT_LE(f.end_ts(), cfg.end_ts());
  }
  EXPECT_EQ(kinds.size(), 4u);
  for (const auto& [k, n] : kinds) EXPECT_EQ(n, 3);
  EXPECT_EQ(targets.size(), 12u);
}

TEST(Cli, SynthIngestReport) {
  TempDir dir;
  const std::int64_t start = 1711929600;
  const std::int64_t onset = start + 2 * 86400 - 7200;
  const auto synth_run = run_cli("synth --out " + (dir / "ds").string() +
                                     " --interfaces 4 --days 2 --seed 11 --faults none --fault optical_degradation:port-01:" +
                                     std::to_string(onset) + ":3600:10",
                                 dir);
  ASSERT_EQ(synth_run.status, 0) << synth_run.err;
  EXPECT_NE(synth_run.out.find("interface 11520\n"), std::string::npos) << synth_run.out;

  const auto ds = dir / "ds";
  const auto ingest = run_cli("ingest " + (ds / "interface.txt").string() + " " + (ds / "flow.txt").string() + " " +
                                  (ds / "optical.txt").string() + " --store-dir " + (dir / "stores").string(),
                              dir);
  ASSERT_EQ(ingest.status, 0) << ingest.err;
  EXPECT_NE(ingest.out.find("interface 11520\n"), std::string::npos) << ingest.out;
  EXPECT_EQ(Store::open(dir / "stores" / "interface.nwts")->record_count(), 11520u);

  const auto report = run_cli("report --store-dir " + (dir / "stores").string() + " --start " +
                                  std::to_string(start + 86400) + " --end " + std::to_string(start + 2 * 86400),
                              dir);
  ASSERT_EQ(report.status, 0) << report.err;
  // Every flagged entity is a manifest fault target.
  const json manifest = json::parse(slurp(ds / "manifest.json"));
  std::set<std::string> targets;
  for (const auto& f : manifest["faults"]) targets.insert(f["target"].get<std::string>());
  EXPECT_EQ(targets, (std::set<std::string>{"port-01"}));
  const std::regex line(R"(^\[(\d+),(\d+)\) (\w+) (\S+) (\S+) observed=)");
  std::set<std::string> flagged;
  std::stringstream ss(report.out);
  int events = 0;
  for (std::string l; std::getline(ss, l);) {
    std::smatch m;
    if (!std::regex_search(l, m, line)) continue;
    ++events;
    flagged.insert(m[4]);
    EXPECT_EQ(m[5], "rx_power_dbm");
    EXPECT_EQ(std::stoll(m[1]), onset);
  }
  EXPECT_EQ(flagged, targets);
  EXPECT_NE(report.out.find(std::to_string(events) + " events\n"), std::string::npos);
}

TEST(Cli, IngestReportsBadLines) {
  TempDir dir;
  write_file(dir / "bad.txt", format_record(iface(1000, "a", 1, 1, 1, 1, 0, 0)) + "\nkind=iface nonsense\n");
  const auto r = run_cli("ingest " + (dir / "bad.txt").string() + " --store-dir " + (dir / "s").string(), dir);
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.out.find("interface 1\n"), std::string::npos);
  EXPECT_NE(r.err.find("bad.txt:2:"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("partial-ingest"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrors) {
  TempDir dir;
  EXPECT_NE(run_cli("", dir).status, 0);
  EXPECT_NE(run_cli("report --start 10", dir).status, 0);
  EXPECT_NE(run_cli("synth --faults bogus", dir).status, 0);
}

TEST(Replay, CompressedHourArrivesIntact) {
  auto cfg = one_interface_day();
  const auto out = synth(cfg);
  std::vector<Record> hour;
  for (const auto& r : out.interface)
    if (timestamp_of(r) < cfg.start_ts + 3600) hour.push_back(r);
  for (const auto& r : out.optical)
    if (timestamp_of(r) < cfg.start_ts + 3600) hour.push_back(r);
  ASSERT_EQ(hour.size(), 72u);

  TempDir dir;
  ServiceConfig sc;
  for (auto k : {DbKind::interface, DbKind::flow, DbKind::optical}) {
    sc.stores[k] = dir / (std::string(to_string(k)) + ".nwts");
    Store(k, to_string(k)).persist(sc.stores[k]);
  }
  write_file(dir / "script.txt", "\"x\" -> say:x\n");
  sc.backend.script_path = dir / "script.txt";
  sc.listen_port = 0;
  sc.tick_loop = false;
  Gateway gw(sc);
  const int port = gw.start();

  ReplayOptions opt;
  opt.url = "http://127.0.0.1:" + std::to_string(port);
  opt.speedup = 3600;
  const auto stats = replay_records(hour, opt);
  EXPECT_EQ(stats.sent, 72u);
  EXPECT_EQ(stats.accepted.at("interface"), 60u);
  EXPECT_EQ(stats.accepted.at("optical"), 12u);
  // One simulated hour at 3600x takes about a second.
  EXPECT_GT(stats.elapsed_s, 0.8);
  EXPECT_LT(stats.elapsed_s, 5.0);
  EXPECT_EQ(gw.store(DbKind::interface)->record_count(), 60u);
  EXPECT_EQ(gw.store(DbKind::optical)->record_count(), 12u);
  gw.stop();

  opt.url = "http://127.0.0.1:1";
  try {
    replay_records(hour, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::gateway_unreachable);
  }
}
