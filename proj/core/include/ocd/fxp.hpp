#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>

#include "ocd/detect.hpp"
#include "ocd/modem.hpp"

namespace ocd::fxp {

/// Two's-complement fixed-point format: values are raw * 2^-frac_bits.
struct FixedFormat {
  int total_bits = 16;
  int frac_bits = 11;
  bool is_signed = true;
  bool saturate = true;

  void validate() const;  // throws std::invalid_argument on a bad format
  std::int64_t raw_min() const;
  std::int64_t raw_max() const;
  double step() const { return std::ldexp(1.0, -frac_bits); }
  double max_value() const { return std::ldexp(static_cast<double>(raw_max()), -frac_bits); }
  double min_value() const { return std::ldexp(static_cast<double>(raw_min()), -frac_bits); }

  bool operator==(const FixedFormat&) const = default;
};

/// Round x to the nearest representable value (ties away from zero).
/// Out-of-range values saturate when fmt.saturate is set, otherwise throw
/// std::range_error.
std::int64_t quantize_raw(double x, const FixedFormat& fmt);
double from_raw(std::int64_t raw, const FixedFormat& fmt);
double quantize(double x, const FixedFormat& fmt);
std::complex<double> quantize(std::complex<double> x, const FixedFormat& fmt);

/// Smallest s with 2^s >= n.
int ceil_log2(int n);

/// Normalized-reciprocal table: 2048 entries of 17-fraction-bit unsigned
/// words (18 bits total). Entry k holds 1/x rounded to 18 bits at the
/// midpoint of the k-th mantissa bin, where inputs are normalized into
/// [0.5, 1) and k is formed from the 11 mantissa bits after the leading one.
/// All entries lie in (1, 2].
class ReciprocalLut {
 public:
  static constexpr int kEntryCount = 2048;
  static constexpr int kEntryBits = 18;
  static constexpr int kEntryFracBits = 17;

  ReciprocalLut();

  std::uint32_t entry_raw(int k) const { return entries_[static_cast<std::size_t>(k)]; }
  double entry_value(int k) const {
    return std::ldexp(static_cast<double>(entry_raw(k)), -kEntryFracBits);
  }
  /// Midpoint of bin k, the abscissa the entry approximates 1/x at.
  static double bin_midpoint(int k) {
    return static_cast<double>(2 * (2048 + k) + 1) / 8192.0;
  }

  /// Approximate 1/x for x > 0: normalize by a power of two into [0.5, 1),
  /// look up the mantissa bin, undo the normalization shift. The result is
  /// an exact power-of-two multiple of an entry. Throws std::domain_error
  /// for x <= 0.
  double reciprocal(double x) const;

  /// Serialization: 2048 little-endian 32-bit words, low 18 bits significant.
  void write(std::ostream& os) const;
  static ReciprocalLut read(std::istream& is);

  bool operator==(const ReciprocalLut&) const = default;

 private:
  struct raw_tag {};
  ReciprocalLut(raw_tag, const std::array<std::uint32_t, kEntryCount>& entries)
      : entries_(entries) {}
  std::array<std::uint32_t, kEntryCount> entries_;
};

void save_lut(const ReciprocalLut& lut, const std::filesystem::path& path);
ReciprocalLut load_lut(const std::filesystem::path& path);

/// Shared immutable instance.
const ReciprocalLut& default_lut();

/// sum_k conj(a_k) * b_k on the fmt grid, products accumulated in a signed
/// 36-bit format with 2*fmt.frac_bits fraction bits, final sum arithmetically
/// right-shifted by ceil_log2(B). Returns the exact shifted accumulator
/// value; callers quantize to their signal format. Throws std::range_error
/// if the accumulator exceeds 36 bits.
std::complex<double> inner_product_shifted(std::span<const std::complex<double>> a,
                                           std::span<const std::complex<double>> b,
                                           const FixedFormat& fmt);

/// Fixed-point OCD: the float algorithm with inner products through
/// inner_product_shifted, reciprocals through the LUT (the right/left shift
/// pair around the reciprocal cancels in the update product), and every
/// signal quantized to fmt. Bit-reproducible for identical inputs.
Eigen::VectorXcd ocd_fixed(const Eigen::MatrixXcd& H, const Eigen::VectorXcd& y,
                           double n0, detect::Mode mode, int iterations,
                           const modem::Constellation& c, const FixedFormat& fmt,
                           const ReciprocalLut& lut = default_lut());

/// Processing latency of the pipeline-interleaved design: 24(K+1)U + O
/// clock cycles, O being the pipeline flush overhead.
std::int64_t latency_cycles(int iterations, int users, int overhead);
double latency_seconds(std::int64_t cycles, double clock_hz);

}  // namespace ocd::fxp
