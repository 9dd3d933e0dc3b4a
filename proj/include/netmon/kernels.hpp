#pragma once

// Data-parallel inner loops of the detector. Every kernel has a scalar
// reference implementation; vector variants are picked once at runtime
// from what the CPU reports and must agree with the scalar path (exactly
// for min/max and element-wise maps, within rounding for reductions).

#include <span>
#include <string_view>

namespace netmon::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view to_string(Isa isa) noexcept;

struct MinMax {
  double min;
  double max;
};

// Best ISA this CPU and build support.
Isa detected_isa() noexcept;
// ISA currently used by the dispatching entry points.
Isa active_isa() noexcept;
// Forces a variant (tests, benchmarks). Falls back to scalar when unsupported.
void set_active_isa(Isa isa) noexcept;
bool isa_available(Isa isa) noexcept;

// Dispatching entry points.
double sum(std::span<const double> values) noexcept;
MinMax minmax(std::span<const double> values) noexcept; // values nonempty
void abs_deviation(std::span<const double> values, double center, std::span<double> out) noexcept;
// out[i] = 0.6745 * (values[i] - median) / scale
void modified_zscores(std::span<const double> values, double median, double scale,
                      std::span<double> out) noexcept;

inline constexpr double kZScoreConstant = 0.6745;

namespace scalar {
double sum(std::span<const double> values) noexcept;
MinMax minmax(std::span<const double> values) noexcept;
void abs_deviation(std::span<const double> values, double center, std::span<double> out) noexcept;
void modified_zscores(std::span<const double> values, double median, double scale,
                      std::span<double> out) noexcept;
} // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
double sum(std::span<const double> values) noexcept;
MinMax minmax(std::span<const double> values) noexcept;
void abs_deviation(std::span<const double> values, double center, std::span<double> out) noexcept;
void modified_zscores(std::span<const double> values, double median, double scale,
                      std::span<double> out) noexcept;
} // namespace avx2
#endif

#if defined(__aarch64__)
namespace neon {
double sum(std::span<const double> values) noexcept;
MinMax minmax(std::span<const double> values) noexcept;
void abs_deviation(std::span<const double> values, double center, std::span<double> out) noexcept;
void modified_zscores(std::span<const double> values, double median, double scale,
                      std::span<double> out) noexcept;
} // namespace neon
#endif

} // namespace netmon::kernels
