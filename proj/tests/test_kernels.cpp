#include <gtest/gtest.h>

#include <random>

#include "netmon/kernels.hpp"

using namespace netmon;
namespace k = netmon::kernels;

namespace {

std::vector<double> random_values(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d(100.0, 40.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Every vector variant this build and CPU can run.
std::vector<k::Isa> vector_isas() {
  std::vector<k::Isa> out;
  for (auto isa : {k::Isa::avx2, k::Isa::neon})
    if (k::isa_available(isa)) out.push_back(isa);
  return out;
}

struct IsaGuard {
  k::Isa saved = k::active_isa();
  ~IsaGuard() { k::set_active_isa(saved); }
};

} // namespace

TEST(Kernels, ScalarReference) {
  const std::vector<double> v = {3.0, -1.0, 4.0, 1.5};
  EXPECT_EQ(k::scalar::sum(v), 7.5);
  EXPECT_EQ(k::scalar::minmax(v).min, -1.0);
  EXPECT_EQ(k::scalar::minmax(v).max, 4.0);
  std::vector<double> out(4);
  k::scalar::abs_deviation(v, 1.0, out);
  EXPECT_EQ(out, (std::vector<double>{2.0, 2.0, 3.0, 0.5}));
  k::scalar::modified_zscores(v, 1.0, 0.6745, out);
  EXPECT_DOUBLE_EQ(out[2], 3.0);
}

TEST(Kernels, VectorVariantsMatchScalar) {
  IsaGuard guard;
  std::mt19937_64 rng(11);
  const auto isas = vector_isas();
  if (isas.empty()) GTEST_SKIP() << "no vector ISA on this host";
  for (std::size_t n : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 64u, 1000u, 1001u}) {
    const auto v = random_values(rng, n);
    const double center = v[0];
    std::vector<double> ref_dev(n), ref_z(n), dev(n), z(n);
    k::scalar::abs_deviation(v, center, ref_dev);
    k::scalar::modified_zscores(v, center, 3.5, ref_z);
    const double ref_sum = k::scalar::sum(v);
    const auto ref_mm = k::scalar::minmax(v);
    for (auto isa : isas) {
      k::set_active_isa(isa);
      ASSERT_EQ(k::active_isa(), isa);
      EXPECT_NEAR(k::sum(v), ref_sum, 1e-9 * std::abs(ref_sum) + 1e-12) << n;
      EXPECT_EQ(k::minmax(v).min, ref_mm.min);
      EXPECT_EQ(k::minmax(v).max, ref_mm.max);
      k::abs_deviation(v, center, dev);
      k::modified_zscores(v, center, 3.5, z);
      EXPECT_EQ(dev, ref_dev) << n;
      for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(z[i], ref_z[i], 1e-12 * std::max(1.0, std::abs(ref_z[i])));
    }
  }
}

TEST(Kernels, EmptySumIsZero) {
  IsaGuard guard;
  for (auto isa : {k::Isa::scalar, k::Isa::avx2, k::Isa::neon}) {
    k::set_active_isa(isa);
    EXPECT_EQ(k::sum({}), 0.0);
  }
}

TEST(Kernels, UnavailableIsaFallsBackToScalar) {
  IsaGuard guard;
  for (auto isa : {k::Isa::avx2, k::Isa::neon}) {
    if (k::isa_available(isa)) continue;
    k::set_active_isa(isa);
    EXPECT_EQ(k::active_isa(), k::Isa::scalar);
  }
}
