#include "netmon/kernels.hpp"

#include <algorithm>
#include <atomic>

namespace netmon::kernels {

std::string_view to_string(Isa isa) noexcept {
  switch (isa) {
  case Isa::scalar: return "scalar";
  case Isa::avx2: return "avx2";
  case Isa::neon: return "neon";
  }
  return "unknown";
}

namespace scalar {

double sum(std::span<const double> values) noexcept {
  double total = 0.0;
  for (double v : values) total += v;
  return total;
}

MinMax minmax(std::span<const double> values) noexcept {
  MinMax out{values[0], values[0]};
  for (double v : values.subspan(1)) {
    out.min = std::min(out.min, v);
    out.max = std::max(out.max, v);
  }
  return out;
}

void abs_deviation(std::span<const double> values, double center, std::span<double> out) noexcept {
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - center;
    out[i] = d < 0 ? -d : d;
  }
}

void modified_zscores(std::span<const double> values, double median, double scale,
                      std::span<double> out) noexcept {
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = kZScoreConstant * (values[i] - median) / scale;
}

} // namespace scalar

bool isa_available(Isa isa) noexcept {
  switch (isa) {
  case Isa::scalar: return true;
  case Isa::avx2:
#if defined(NETMON_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
  case Isa::neon:
#if defined(NETMON_HAVE_NEON)
    return true;
#else
    return false;
#endif
  }
  return false;
}

Isa detected_isa() noexcept {
  static const Isa best = [] {
    if (isa_available(Isa::avx2)) return Isa::avx2;
    if (isa_available(Isa::neon)) return Isa::neon;
    return Isa::scalar;
  }();
  return best;
}

namespace {

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{detected_isa()};
  return isa;
}

} // namespace

Isa active_isa() noexcept { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) noexcept {
  active().store(isa_available(isa) ? isa : Isa::scalar, std::memory_order_relaxed);
}

#if defined(NETMON_HAVE_AVX2)
#define NETMON_DISPATCH_AVX2(call) \
  case Isa::avx2: return avx2::call;
#else
#define NETMON_DISPATCH_AVX2(call)
#endif
#if defined(NETMON_HAVE_NEON)
#define NETMON_DISPATCH_NEON(call) \
  case Isa::neon: return neon::call;
#else
#define NETMON_DISPATCH_NEON(call)
#endif

#define NETMON_DISPATCH(call)      \
  switch (active_isa()) {          \
    NETMON_DISPATCH_AVX2(call)     \
    NETMON_DISPATCH_NEON(call)     \
  default: return scalar::call;    \
  }

double sum(std::span<const double> values) noexcept { NETMON_DISPATCH(sum(values)) }

MinMax minmax(std::span<const double> values) noexcept { NETMON_DISPATCH(minmax(values)) }

void abs_deviation(std::span<const double> values, double center, std::span<double> out) noexcept {
  NETMON_DISPATCH(abs_deviation(values, center, out))
}

void modified_zscores(std::span<const double> values, double median, double scale,
                      std::span<double> out) noexcept {
  NETMON_DISPATCH(modified_zscores(values, median, scale, out))
}

} // namespace netmon::kernels
