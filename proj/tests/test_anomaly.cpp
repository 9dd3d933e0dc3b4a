#include <gtest/gtest.h>

#include <random>

#include "netmon/anomaly.hpp"
#include "netmon/error.hpp"
#include "support.hpp"

using namespace netmon;
using namespace netmon::testing;

namespace {

constexpr std::int64_t kT0 = 1711929600;

// One point per minute; window k has mean level(k) plus per-point jitter.
template <class LevelFn>
Series hourly_series(int windows, LevelFn level, std::mt19937_64& rng, double jitter = 1.0) {
  std::uniform_real_distribution<double> u(-jitter, jitter);
  Series s;
  for (int k = 0; k < windows; ++k)
    for (int m = 0; m < 60; ++m) s.push_back({kT0 + k * 3600 + m * 60, level(k) + u(rng), 1});
  return s;
}

double oracle_window_mean(const Series& s, std::int64_t a, std::int64_t b) {
  double sum = 0;
  int n = 0;
  for (const auto& p : s)
    if (p.ts >= a && p.ts < b) sum += p.value, ++n;
  return sum / n;
}

const SeriesKey kBpsKey{DbKind::interface, "e", "bps_in", DetectionRule::level_shift};

} // namespace

TEST(Stats, ConstantValues) {
  EXPECT_EQ(median_of({5, 5, 5}), 5);
  EXPECT_EQ(mad_of(std::vector<double>{5, 5, 5}, 5), 0);
}

TEST(Stats, HandComputable) {
  const std::vector<double> v = {1, 2, 3, 4, 100};
  EXPECT_EQ(median_of(v), 3);
  EXPECT_EQ(mad_of(v, 3), 1);
  EXPECT_EQ(median_of({4, 1, 3, 2}), 2.5);
  EXPECT_THROW(median_of({}), Error);
}

TEST(Stats, RandomValuesMatchSortOracle) {
  std::mt19937_64 rng(13);
  std::lognormal_distribution<double> d(3.0, 1.5);
  for (std::size_t n : {1000u, 999u}) {
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    const double m = median_of(v);
    EXPECT_NEAR(m, oracle_median(v), 1e-9);
    EXPECT_NEAR(mad_of(v, m), oracle_mad(v), 1e-9);
  }
}

TEST(ZScore, IdentityAndFormula) {
  EXPECT_EQ(modified_zscore(3, 3, 1, 1e-9), 0);
  EXPECT_NEAR(modified_zscore(13, 3, 1, 1e-9), 6.745, 1e-12);
  // MAD of zero falls back to the floor instead of dividing by zero.
  EXPECT_TRUE(std::isfinite(modified_zscore(4, 3, 0, 1e-9)));
}

TEST(WindowStats, MatchesOracleAndRejectsEmpty) {
  std::mt19937_64 rng(2);
  const auto s = hourly_series(2, [](int) { return 50.0; }, rng, 10.0);
  const auto st = window_stats(s, {kT0, kT0 + 3600}, "e", "bps_in");
  std::vector<double> v;
  for (const auto& p : s)
    if (p.ts < kT0 + 3600) v.push_back(p.value);
  EXPECT_EQ(st.count, 60u);
  EXPECT_NEAR(st.mean, oracle_window_mean(s, kT0, kT0 + 3600), 1e-9);
  EXPECT_NEAR(st.median, oracle_median(v), 1e-12);
  EXPECT_NEAR(st.mad, oracle_mad(v), 1e-12);
  EXPECT_EQ(st.max, *std::max_element(v.begin(), v.end()));
  EXPECT_EQ(st.min, *std::min_element(v.begin(), v.end()));
  EXPECT_THROW(window_stats(s, {0, 10}), Error);
}

TEST(Detect, FlatBaselineIdenticalWindowNoEvents) {
  Series s;
  for (int k = 0; k < 25; ++k)
    for (int m = 0; m < 60; ++m) s.push_back({kT0 + k * 3600 + m * 60, 100.0, 1});
  const Window eval{kT0 + 24 * 3600, kT0 + 25 * 3600};
  EXPECT_TRUE(detect(s, DetectorConfig{}, eval, kBpsKey).empty());
}

TEST(Detect, TenfoldWindowIsOneCriticalHighEvent) {
  std::mt19937_64 rng(17);
  const auto s = hourly_series(25, [](int k) { return k < 24 ? 100.0 + (k % 5) : 1000.0; }, rng);
  const Window eval{kT0 + 24 * 3600, kT0 + 25 * 3600};
  const auto events = detect(s, DetectorConfig{}, eval, kBpsKey);
  ASSERT_EQ(events.size(), 1u);

  std::vector<double> baseline;
  for (int k = 0; k < 24; ++k) baseline.push_back(oracle_window_mean(s, kT0 + k * 3600, kT0 + (k + 1) * 3600));
  const double med = oracle_median(baseline);
  const double observed = oracle_window_mean(s, eval.start, eval.end);
  const double expected = 0.6745 * (observed - med) / oracle_mad(baseline);
  EXPECT_NEAR(events[0].score, expected, 1e-9 * std::abs(expected));
  EXPECT_NEAR(events[0].observed, observed, 1e-9);
  EXPECT_EQ(events[0].severity, Severity::critical);
  EXPECT_EQ(events[0].direction, Direction::high);
  EXPECT_EQ(events[0].kind, EventKind::level_shift);
}

TEST(Detect, SeverityBands) {
  std::mt19937_64 rng(4);
  // Baseline windows alternate 99/101 so median 100, MAD 1: z = 0.6745 * d.
  auto run = [&](double level) {
    const auto s = hourly_series(25, [&](int k) { return k < 24 ? (k % 2 ? 101.0 : 99.0) : level; }, rng, 0.0);
    return detect(s, DetectorConfig{}, {kT0 + 24 * 3600, kT0 + 25 * 3600}, kBpsKey);
  };
  EXPECT_TRUE(run(105).empty()); // z 3.37
  auto warn = run(94);           // z -4.05
  ASSERT_EQ(warn.size(), 1u);
  EXPECT_EQ(warn[0].severity, Severity::warn);
  EXPECT_EQ(warn[0].direction, Direction::low);
  auto crit = run(111); // z 7.42
  ASSERT_EQ(crit.size(), 1u);
  EXPECT_EQ(crit[0].severity, Severity::critical);
}

TEST(Detect, MissingBaselineWindowIsInsufficient) {
  std::mt19937_64 rng(1);
  auto s = hourly_series(25, [](int) { return 10.0; }, rng);
  std::erase_if(s, [](const Point& p) { return p.ts >= kT0 + 3 * 3600 && p.ts < kT0 + 4 * 3600; });
  try {
    detect(s, DetectorConfig{}, {kT0 + 24 * 3600, kT0 + 25 * 3600}, kBpsKey);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::insufficient_baseline);
  }
}

TEST(Detect, ErrorRampIsOneSpikeAndNoRateEvents) {
  // Flat traffic; errors ramp to 2/s over half an hour, then hold.
  auto with_plateau = iface_series("e", kT0, 26 * 60 + 1, [](std::int64_t ts) {
    if (ts <= kT0 + 24 * 3600) return std::pair{100.0, 0.0};
    return std::pair{100.0, std::min(2.0, 2.0 * static_cast<double>(ts - kT0 - 24 * 3600) / 1800.0)};
  });
  Store store(DbKind::interface, "interface");
  store.append(with_plateau);
  const auto events = detect_entity(store, "e", DetectorConfig{}, {kT0 + 24 * 3600, kT0 + 25 * 3600});
  ASSERT_EQ(events.size(), 1u);
  EXPECT_EQ(events[0].metric, "eps_in");
  EXPECT_EQ(events[0].kind, EventKind::error_spike);
  EXPECT_EQ(events[0].severity, Severity::critical);
  EXPECT_GE(events[0].observed, 1.0);
  EXPECT_NEAR(events[0].score, events[0].observed, 1e-12);
}

TEST(Detect, ScaleShiftInvariance) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> a_dist(0.01, 100.0), b_dist(-1e4, 1e4);
  std::normal_distribution<double> shift(0.0, 8.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double jump = shift(rng);
    const auto s = hourly_series(25, [&](int k) { return k < 24 ? 100.0 + (k % 7) : 103.0 + jump; }, rng, 2.0);
    const double a = a_dist(rng), b = b_dist(rng);
    Series t = s;
    for (auto& p : t) p.value = a * p.value + b;
    std::vector<double> base_s, base_t;
    for (int k = 0; k < 24; ++k) {
      base_s.push_back(oracle_window_mean(s, kT0 + k * 3600, kT0 + (k + 1) * 3600));
      base_t.push_back(oracle_window_mean(t, kT0 + k * 3600, kT0 + (k + 1) * 3600));
    }
    const Window eval{kT0 + 24 * 3600, kT0 + 25 * 3600};
    const double zs = modified_zscore(oracle_window_mean(s, eval.start, eval.end), oracle_median(base_s),
                                      oracle_mad(base_s), 1e-9);
    const double zt = modified_zscore(oracle_window_mean(t, eval.start, eval.end), oracle_median(base_t),
                                      oracle_mad(base_t), 1e-9);
    EXPECT_NEAR(zs, zt, 1e-9 * std::max(1.0, std::abs(zs)));
    const auto es = detect(s, DetectorConfig{}, eval, kBpsKey);
    const auto et = detect(t, DetectorConfig{}, eval, kBpsKey);
    ASSERT_EQ(es.size(), et.size()) << "trial " << trial << " z " << zs;
    for (std::size_t i = 0; i < es.size(); ++i) {
      EXPECT_EQ(es[i].severity, et[i].severity);
      EXPECT_EQ(es[i].direction, et[i].direction);
      EXPECT_NEAR(es[i].score, et[i].score, 1e-9 * std::max(1.0, std::abs(es[i].score)));
    }
  }
}

TEST(Forecast, SeasonalNaiveOnExactPeriod) {
  Series s;
  for (int k = 0; k < 48; ++k)
    for (int m = 0; m < 60; ++m) s.push_back({kT0 + k * 3600 + m * 60, 10.0 * (k % 24) + 1.0, 1});
  const auto f = forecast_next(s, DetectorConfig{}, kT0 + 48 * 3600);
  EXPECT_TRUE(f.seasonal);
  EXPECT_EQ(f.predicted, oracle_window_mean(s, kT0 + 24 * 3600, kT0 + 25 * 3600));
}

TEST(Forecast, ConstantSeries) {
  Series s;
  for (int k = 0; k < 5 * 60; ++k) s.push_back({kT0 + k * 60, 42.0, 1});
  const auto f = forecast_next(s, DetectorConfig{}, kT0 + 5 * 3600);
  EXPECT_EQ(f.predicted, 42.0);
  EXPECT_EQ(f.uncertainty, 0.0);
}

TEST(Forecast, RandomWalkMatchesEwmaRecursion) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> step(0.0, 3.0);
  Series s;
  double level = 100.0;
  for (int k = 0; k < 12 * 60; ++k) {
    level += step(rng);
    s.push_back({kT0 + k * 60, level, 1});
  }
  const auto f = forecast_next(s, DetectorConfig{}, kT0 + 12 * 3600);
  EXPECT_FALSE(f.seasonal);
  double ewma = oracle_window_mean(s, kT0, kT0 + 3600);
  for (int k = 1; k < 12; ++k) ewma = 0.3 * oracle_window_mean(s, kT0 + k * 3600, kT0 + (k + 1) * 3600) + 0.7 * ewma;
  EXPECT_NEAR(f.predicted, ewma, 1e-9);
}

TEST(Forecast, NeedsTwoWindows) {
  Series s = {{kT0, 1.0, 1}};
  EXPECT_THROW(forecast_next(s, DetectorConfig{}, kT0 + 3600), Error);
  EXPECT_THROW(forecast_next({}, DetectorConfig{}, kT0), Error);
}

TEST(Detect, EntityWindowsMatchPerWindowCalls) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> noise(0, 1);
  const auto records = iface_series("e", kT0, 30 * 60 + 1, [&](std::int64_t ts) {
    const bool flood = ts > kT0 + 27 * 3600 && ts <= kT0 + 28 * 3600;
    return std::pair{(flood ? 1000.0 : 100.0) + noise(rng), 0.0};
  });
  Store store(DbKind::interface, "interface");
  store.append(records);
  const DetectorConfig cfg;
  const auto all = detect_entity_windows(store, "e", cfg, {kT0, kT0 + 30 * 3600});
  std::vector<AnomalyEvent> manual;
  for (std::int64_t s = kT0 + 24 * 3600; s + 3600 <= kT0 + 30 * 3600; s += 3600) {
    auto found = detect_entity(store, "e", cfg, {s, s + 3600});
    manual.insert(manual.end(), found.begin(), found.end());
  }
  sort_events(manual);
  EXPECT_EQ(all, manual);
  EXPECT_FALSE(all.empty());
}

TEST(Config, Validation) {
  DetectorConfig c;
  EXPECT_NO_THROW(c.validate());
  c.z_critical = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.window_s = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Windows, CompleteUntil) {
  EXPECT_EQ(complete_until(kT0 + 3600 - 60, 3600), kT0 + 3600);
  EXPECT_EQ(complete_until(kT0 + 3600 - 301, 3600), kT0);
}
