#include <arm_neon.h>

#include <algorithm>

#include "netmon/kernels.hpp"

namespace netmon::kernels::neon {

double sum(std::span<const double> values) noexcept {
  const double* p = values.data();
  const std::size_t n = values.size();
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vaddq_f64(acc0, vld1q_f64(p + i));
    acc1 = vaddq_f64(acc1, vld1q_f64(p + i + 2));
  }
  const double total = vaddvq_f64(vaddq_f64(acc0, acc1));
  return total + scalar::sum(values.subspan(i));
}

MinMax minmax(std::span<const double> values) noexcept {
  const double* p = values.data();
  const std::size_t n = values.size();
  if (n < 2) return scalar::minmax(values);
  float64x2_t vmin = vld1q_f64(p);
  float64x2_t vmax = vmin;
  std::size_t i = 2;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t v = vld1q_f64(p + i);
    vmin = vminq_f64(vmin, v);
    vmax = vmaxq_f64(vmax, v);
  }
  MinMax out{vminvq_f64(vmin), vmaxvq_f64(vmax)};
  for (; i < n; ++i) {
    out.min = std::min(out.min, p[i]);
    out.max = std::max(out.max, p[i]);
  }
  return out;
}

void abs_deviation(std::span<const double> values, double center, std::span<double> out) noexcept {
  const std::size_t n = values.size();
  const float64x2_t c = vdupq_n_f64(center);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(out.data() + i, vabdq_f64(vld1q_f64(values.data() + i), c));
  scalar::abs_deviation(values.subspan(i), center, out.subspan(i));
}

void modified_zscores(std::span<const double> values, double median, double scale,
                      std::span<double> out) noexcept {
  const std::size_t n = values.size();
  const float64x2_t k = vdupq_n_f64(kZScoreConstant);
  const float64x2_t m = vdupq_n_f64(median);
  const float64x2_t s = vdupq_n_f64(scale);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t d = vsubq_f64(vld1q_f64(values.data() + i), m);
    vst1q_f64(out.data() + i, vdivq_f64(vmulq_f64(k, d), s));
  }
  scalar::modified_zscores(values.subspan(i), median, scale, out.subspan(i));
}

} // namespace netmon::kernels::neon
