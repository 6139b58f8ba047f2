#include "ocd/fxp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace ocd::fxp {

namespace {

using cplx = std::complex<double>;

constexpr std::int64_t kAccBits = 36;

std::int64_t pow2_minus_1(int bits) {  // 2^bits - 1 without overflow for bits <= 63
  return bits >= 63 ? std::numeric_limits<std::int64_t>::max()
                    : (std::int64_t{1} << bits) - 1;
}

struct AccRange {
  std::int64_t lo;
  std::int64_t hi;
};

AccRange acc_range() {
  return {-(std::int64_t{1} << (kAccBits - 1)), (std::int64_t{1} << (kAccBits - 1)) - 1};
}

std::int64_t checked_acc_add(std::int64_t acc, std::int64_t term) {
  const auto [lo, hi] = acc_range();
  acc += term;
  if (acc < lo || acc > hi) {
    throw std::range_error("inner_product_shifted: 36-bit accumulator overflow");
  }
  return acc;
}

}  // namespace

void FixedFormat::validate() const {
  const int max_total = is_signed ? 64 : 63;
  if (frac_bits < 0 || frac_bits >= total_bits || total_bits > max_total) {
    throw std::invalid_argument("FixedFormat: need 0 <= frac_bits < total_bits <= 64");
  }
}

std::int64_t FixedFormat::raw_min() const {
  if (!is_signed) return 0;
  return total_bits >= 64 ? std::numeric_limits<std::int64_t>::min()
                          : -(std::int64_t{1} << (total_bits - 1));
}

std::int64_t FixedFormat::raw_max() const {
  return is_signed ? pow2_minus_1(total_bits - 1) : pow2_minus_1(total_bits);
}

std::int64_t quantize_raw(double x, const FixedFormat& fmt) {
  fmt.validate();
  if (std::isnan(x)) throw std::invalid_argument("quantize: NaN input");
  const double scaled = std::ldexp(x, fmt.frac_bits);
  const std::int64_t lo = fmt.raw_min();
  const std::int64_t hi = fmt.raw_max();
  // Round-to-nearest, ties away from zero; a tie at the range edge overflows.
  if (scaled >= static_cast<double>(hi) + 0.5) {
    if (fmt.saturate) return hi;
    throw std::range_error("quantize: value above format range");
  }
  if (scaled <= static_cast<double>(lo) - 0.5) {
    if (fmt.saturate) return lo;
    throw std::range_error("quantize: value below format range");
  }
  return std::llround(scaled);
}

double from_raw(std::int64_t raw, const FixedFormat& fmt) {
  return std::ldexp(static_cast<double>(raw), -fmt.frac_bits);
}

double quantize(double x, const FixedFormat& fmt) {
  return from_raw(quantize_raw(x, fmt), fmt);
}

cplx quantize(cplx x, const FixedFormat& fmt) {
  return {quantize(x.real(), fmt), quantize(x.imag(), fmt)};
}

int ceil_log2(int n) {
  if (n < 1) throw std::invalid_argument("ceil_log2: need n >= 1");
  int s = 0;
  while ((1 << s) < n) ++s;
  return s;
}

ReciprocalLut::ReciprocalLut() {
  for (int k = 0; k < kEntryCount; ++k) {
    const double recip = 1.0 / bin_midpoint(k);
    entries_[static_cast<std::size_t>(k)] =
        static_cast<std::uint32_t>(std::llround(std::ldexp(recip, kEntryFracBits)));
  }
}

double ReciprocalLut::reciprocal(double x) const {
  if (!(x > 0.0)) throw std::domain_error("reciprocal: input must be positive");
  int exp = 0;
  const double mant = std::frexp(x, &exp);  // x = mant * 2^exp, mant in [0.5, 1)
  const int k = static_cast<int>(mant * 4096.0) - 2048;
  return std::ldexp(entry_value(k), -exp);
}

void ReciprocalLut::write(std::ostream& os) const {
  for (const std::uint32_t e : entries_) {
    const unsigned char bytes[4] = {
        static_cast<unsigned char>(e & 0xff),
        static_cast<unsigned char>((e >> 8) & 0xff),
        static_cast<unsigned char>((e >> 16) & 0xff),
        static_cast<unsigned char>((e >> 24) & 0xff),
    };
    os.write(reinterpret_cast<const char*>(bytes), 4);
  }
  if (!os) throw std::runtime_error("ReciprocalLut::write: stream failure");
}

ReciprocalLut ReciprocalLut::read(std::istream& is) {
  std::array<std::uint32_t, kEntryCount> entries{};
  for (auto& e : entries) {
    unsigned char bytes[4];
    is.read(reinterpret_cast<char*>(bytes), 4);
    if (!is) throw std::runtime_error("ReciprocalLut::read: truncated input");
    e = static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
        (static_cast<std::uint32_t>(bytes[2]) << 16) |
        (static_cast<std::uint32_t>(bytes[3]) << 24);
    if (e >= (1u << kEntryBits)) {
      throw std::runtime_error("ReciprocalLut::read: entry exceeds 18 bits");
    }
  }
  is.peek();
  if (!is.eof()) throw std::runtime_error("ReciprocalLut::read: trailing bytes");
  return ReciprocalLut(raw_tag{}, entries);
}

void save_lut(const ReciprocalLut& lut, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_lut: cannot open " + path.string());
  lut.write(os);
}

ReciprocalLut load_lut(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_lut: cannot open " + path.string());
  return ReciprocalLut::read(is);
}

const ReciprocalLut& default_lut() {
  static const ReciprocalLut lut;
  return lut;
}

std::complex<double> inner_product_shifted(std::span<const cplx> a, std::span<const cplx> b,
                                           const FixedFormat& fmt) {
  if (a.size() != b.size() || a.empty()) {
    throw std::invalid_argument("inner_product_shifted: shape mismatch");
  }
  fmt.validate();
  const FixedFormat raw_fmt{.total_bits = fmt.total_bits,
                            .frac_bits = 0,
                            .is_signed = fmt.is_signed,
                            .saturate = fmt.saturate};

  std::int64_t acc_re = 0;
  std::int64_t acc_im = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    // Operands are read on the fmt grid as raw integers.
    const std::int64_t ar = quantize_raw(std::ldexp(a[k].real(), fmt.frac_bits), raw_fmt);
    const std::int64_t ai = quantize_raw(std::ldexp(a[k].imag(), fmt.frac_bits), raw_fmt);
    const std::int64_t br = quantize_raw(std::ldexp(b[k].real(), fmt.frac_bits), raw_fmt);
    const std::int64_t bi = quantize_raw(std::ldexp(b[k].imag(), fmt.frac_bits), raw_fmt);
    // conj(a) * b
    acc_re = checked_acc_add(acc_re, ar * br);
    acc_re = checked_acc_add(acc_re, ai * bi);
    acc_im = checked_acc_add(acc_im, ar * bi);
    acc_im = checked_acc_add(acc_im, -ai * br);
  }
  const int shift = ceil_log2(static_cast<int>(a.size()));
  acc_re >>= shift;
  acc_im >>= shift;
  const int acc_frac = 2 * fmt.frac_bits;
  return {std::ldexp(static_cast<double>(acc_re), -acc_frac),
          std::ldexp(static_cast<double>(acc_im), -acc_frac)};
}

Eigen::VectorXcd ocd_fixed(const Eigen::MatrixXcd& H, const Eigen::VectorXcd& y, double n0,
                           detect::Mode mode, int iterations, const modem::Constellation& c,
                           const FixedFormat& fmt, const ReciprocalLut& lut) {
  if (H.rows() != y.size()) throw std::invalid_argument("ocd_fixed: shape mismatch");
  if (iterations < 1) throw std::invalid_argument("ocd_fixed: K must be >= 1");
  fmt.validate();
  const auto b_count = H.rows();
  const auto u_count = H.cols();
  const int shift = ceil_log2(static_cast<int>(b_count));

  Eigen::MatrixXcd hq(b_count, u_count);
  for (Eigen::Index j = 0; j < u_count; ++j) {
    for (Eigen::Index i = 0; i < b_count; ++i) hq(i, j) = quantize(H(i, j), fmt);
  }
  Eigen::VectorXcd r(b_count);
  for (Eigen::Index i = 0; i < b_count; ++i) r(i) = quantize(y(i), fmt);

  // Preprocessing. The shifted column norm feeds the reciprocal unit, so the
  // stored reciprocal carries a compensating 2^shift; it cancels against the
  // shifted inner product in the update.
  const double alpha = mode == detect::Mode::kMmse ? n0 : 0.0;
  const double alpha_shifted = quantize(std::ldexp(alpha, -shift), fmt);
  Eigen::VectorXd d_inv_shifted(u_count);
  Eigen::VectorXd p(u_count);
  std::vector<cplx> col(static_cast<std::size_t>(b_count));
  for (Eigen::Index u = 0; u < u_count; ++u) {
    for (Eigen::Index i = 0; i < b_count; ++i) col[static_cast<std::size_t>(i)] = hq(i, u);
    const double norm_shifted =
        quantize(inner_product_shifted(col, col, fmt).real(), fmt);
    const double denom = quantize(norm_shifted + alpha_shifted, fmt);
    if (!(denom > 0.0)) {
      throw std::domain_error("ocd_fixed: column norm vanishes at this precision");
    }
    d_inv_shifted(u) = lut.reciprocal(denom);
    p(u) = quantize(d_inv_shifted(u) * norm_shifted, fmt);
  }

  const double radius = quantize(c.box_radius, fmt);
  Eigen::VectorXcd z = Eigen::VectorXcd::Zero(u_count);
  std::vector<cplx> rbuf(static_cast<std::size_t>(b_count));
  for (int k = 0; k < iterations; ++k) {
    for (Eigen::Index u = 0; u < u_count; ++u) {
      for (Eigen::Index i = 0; i < b_count; ++i) {
        col[static_cast<std::size_t>(i)] = hq(i, u);
        rbuf[static_cast<std::size_t>(i)] = r(i);
      }
      const cplx ip = quantize(inner_product_shifted(col, rbuf, fmt), fmt);
      const cplx scaled = quantize(d_inv_shifted(u) * ip, fmt);
      const cplx kept = quantize(p(u) * z(u), fmt);
      const cplx w = quantize(scaled + kept, fmt);
      cplx z_new = w;
      if (mode == detect::Mode::kBox) {
        const double re = std::clamp(w.real(), -radius, radius);
        z_new = c.scheme == modem::Scheme::kBpsk
                    ? cplx(re, 0.0)
                    : cplx(re, std::clamp(w.imag(), -radius, radius));
      }
      const cplx delta = quantize(z_new - z(u), fmt);
      z(u) = z_new;
      for (Eigen::Index i = 0; i < b_count; ++i) {
        const cplx prod = quantize(hq(i, u) * delta, fmt);
        r(i) = quantize(r(i) - prod, fmt);
      }
    }
  }
  return z;
}

std::int64_t latency_cycles(int iterations, int users, int overhead) {
  if (iterations < 1 || users < 1 || overhead < 0) {
    throw std::invalid_argument("latency_cycles: bad arguments");
  }
  return std::int64_t{24} * (iterations + 1) * users + overhead;
}

double latency_seconds(std::int64_t cycles, double clock_hz) {
  if (cycles < 0 || !(clock_hz > 0.0)) {
    throw std::invalid_argument("latency_seconds: bad arguments");
  }
  return static_cast<double>(cycles) / clock_hz;
}

}  // namespace ocd::fxp
