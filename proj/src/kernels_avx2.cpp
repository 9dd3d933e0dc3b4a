// Compiled with -mavx2 -mfma; only reached after the runtime CPU check.

#include <immintrin.h>

#include <algorithm>

#include "netmon/kernels.hpp"

namespace netmon::kernels::avx2 {

double sum(std::span<const double> values) noexcept {
  const double* p = values.data();
  const std::size_t n = values.size();
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(p + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(p + i + 4));
  }
  if (i + 4 <= n) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(p + i));
    i += 4;
  }
  const __m256d acc = _mm256_add_pd(acc0, acc1);
  const __m128d lo = _mm256_castpd256_pd128(acc);
  const __m128d hi = _mm256_extractf128_pd(acc, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  double total = _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
  return total + scalar::sum(values.subspan(i));
}

MinMax minmax(std::span<const double> values) noexcept {
  const double* p = values.data();
  const std::size_t n = values.size();
  if (n < 4) return scalar::minmax(values);
  __m256d vmin = _mm256_loadu_pd(p);
  __m256d vmax = vmin;
  std::size_t i = 4;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(p + i);
    vmin = _mm256_min_pd(vmin, v);
    vmax = _mm256_max_pd(vmax, v);
  }
  alignas(32) double lanes_min[4];
  alignas(32) double lanes_max[4];
  _mm256_store_pd(lanes_min, vmin);
  _mm256_store_pd(lanes_max, vmax);
  MinMax out{lanes_min[0], lanes_max[0]};
  for (int k = 1; k < 4; ++k) {
    out.min = std::min(out.min, lanes_min[k]);
    out.max = std::max(out.max, lanes_max[k]);
  }
  for (; i < n; ++i) {
    out.min = std::min(out.min, p[i]);
    out.max = std::max(out.max, p[i]);
  }
  return out;
}

void abs_deviation(std::span<const double> values, double center, std::span<double> out) noexcept {
  const double* p = values.data();
  double* o = out.data();
  const std::size_t n = values.size();
  const __m256d c = _mm256_set1_pd(center);
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(p + i), c);
    _mm256_storeu_pd(o + i, _mm256_andnot_pd(sign_mask, d));
  }
  scalar::abs_deviation(values.subspan(i), center, out.subspan(i));
}

void modified_zscores(std::span<const double> values, double median, double scale,
                      std::span<double> out) noexcept {
  const double* p = values.data();
  double* o = out.data();
  const std::size_t n = values.size();
  const __m256d k = _mm256_set1_pd(kZScoreConstant);
  const __m256d m = _mm256_set1_pd(median);
  const __m256d s = _mm256_set1_pd(scale);
  std::size_t i = 0;
  // Same operation order as the scalar path (multiply, then divide) so the
  // results are bit-identical.
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(p + i), m);
    _mm256_storeu_pd(o + i, _mm256_div_pd(_mm256_mul_pd(k, d), s));
  }
  scalar::modified_zscores(values.subspan(i), median, scale, out.subspan(i));
}

} // namespace netmon::kernels::avx2
