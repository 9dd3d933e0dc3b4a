#pragma once

// Shared fixtures and independent oracles for the test binaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "netmon/telemetry.hpp"
#include "netmon/tsdb.hpp"

namespace netmon::testing {

class TempDir {
public:
  TempDir() {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("netmon-test-" + std::to_string(rd()) + "-" + std::to_string(++counter));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

inline TelemetrySample iface(std::int64_t ts, std::string id, std::uint64_t pkts_in = 0, std::uint64_t pkts_out = 0,
                             std::uint64_t octets_in = 0, std::uint64_t octets_out = 0, std::uint64_t errs_in = 0,
                             std::uint64_t errs_out = 0) {
  TelemetrySample s;
  s.timestamp = ts;
  s.interface_id = std::move(id);
  s.pkts_in = pkts_in;
  s.pkts_out = pkts_out;
  s.octets_in = octets_in;
  s.octets_out = octets_out;
  s.errs_in = errs_in;
  s.errs_out = errs_out;
  s.speed_bps = 1'000'000'000;
  return s;
}

inline OpticalSample optical(std::int64_t ts, std::string port, double tx, double rx) {
  return OpticalSample{ts, std::move(port), tx, rx};
}

inline FlowRecord flow(std::int64_t start, std::int64_t end, std::string src, std::uint64_t bytes,
                       std::uint64_t packets) {
  FlowRecord f;
  f.start_ts = start;
  f.end_ts = end;
  f.src_addr = std::move(src);
  f.dst_addr = "198.51.100.1";
  f.src_port = 40000;
  f.dst_port = 443;
  f.proto = 6;
  f.bytes = bytes;
  f.packets = packets;
  return f;
}

// Interface counters whose per-minute rates follow rate_at(t) exactly
// (integer counters, so rates are multiples of 1/60).
template <class RateFn>
std::vector<Record> iface_series(const std::string& id, std::int64_t t0, std::int64_t samples, RateFn rate_at,
                                 std::int64_t cadence = 60) {
  std::vector<Record> out;
  std::uint64_t pkts = 1000, octets = 100000, errs = 0;
  for (std::int64_t i = 0; i < samples; ++i) {
    const std::int64_t ts = t0 + i * cadence;
    if (i > 0) {
      const auto [pps, eps] = rate_at(ts);
      pkts += static_cast<std::uint64_t>(std::llround(pps * static_cast<double>(cadence)));
      octets += static_cast<std::uint64_t>(std::llround(pps * 500.0 * static_cast<double>(cadence)));
      errs += static_cast<std::uint64_t>(std::llround(eps * static_cast<double>(cadence)));
    }
    out.push_back(iface(ts, id, pkts, pkts / 2, octets, octets / 2, errs, 0));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Oracles. Deliberately naive: full sorts, linear scans.

inline double oracle_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

inline double oracle_mad(const std::vector<double>& v) {
  const double m = oracle_median(v);
  std::vector<double> dev;
  for (double x : v) dev.push_back(std::fabs(x - m));
  return oracle_median(dev);
}

inline bool close(double a, double b, double tol) {
  return std::fabs(a - b) <= tol * std::max(1.0, std::max(std::fabs(a), std::fabs(b)));
}

} // namespace netmon::testing
