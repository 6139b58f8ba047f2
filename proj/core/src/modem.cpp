#include "ocd/modem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ocd::modem {

namespace {

constexpr std::uint32_t gray_encode(std::uint32_t i) { return i ^ (i >> 1); }

// Level value for index i out of n: ..., -3, -1, +1, +3, ... times scale.
double level_value(int i, int n, double scale) {
  return static_cast<double>(2 * i - (n - 1)) * scale;
}

// Nearest level index to x, resolving exact midpoint ties toward the level
// with the smaller Gray label (the smaller point index overall). The initial
// guess may be off by one from rounding; the neighbor scan settles it.
int slice_axis(double x, int n, double scale) {
  const double step = 2.0 * scale;
  int guess = static_cast<int>(std::floor((x - level_value(0, n, scale)) / step + 0.5));
  guess = std::clamp(guess, 0, n - 1);
  int best = guess;
  double best_d = std::abs(x - level_value(guess, n, scale));
  for (int j : {guess - 1, guess + 1}) {
    if (j < 0 || j >= n) continue;
    const double d = std::abs(x - level_value(j, n, scale));
    if (d < best_d || (d == best_d && gray_encode(static_cast<std::uint32_t>(j)) <
                                          gray_encode(static_cast<std::uint32_t>(best)))) {
      best = j;
      best_d = d;
    }
  }
  return best;
}

int bits_per_axis(const Constellation& c) {
  return c.scheme == Scheme::kBpsk ? 1 : c.bits_per_symbol / 2;
}

// 1D max-log kernel: min squared distance from x to the levels whose Gray
// label has the given bit value at position `bit` (0 = most significant).
double axis_min_dist_sq(double x, int n, double scale, int bit, int nbits,
                        std::uint32_t value) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const std::uint32_t g = gray_encode(static_cast<std::uint32_t>(i));
    if (((g >> (nbits - 1 - bit)) & 1u) != value) continue;
    const double d = x - level_value(i, n, scale);
    best = std::min(best, d * d);
  }
  return best;
}

}  // namespace

const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::kBpsk: return "bpsk";
    case Scheme::kQpsk: return "qpsk";
    case Scheme::kQam16: return "qam16";
    case Scheme::kQam64: return "qam64";
  }
  return "?";
}

Scheme scheme_from_name(const std::string& name) {
  if (name == "bpsk") return Scheme::kBpsk;
  if (name == "qpsk") return Scheme::kQpsk;
  if (name == "qam16") return Scheme::kQam16;
  if (name == "qam64") return Scheme::kQam64;
  throw std::invalid_argument("unknown modulation scheme: " + name);
}

Constellation build_constellation(Scheme scheme) {
  Constellation c;
  c.scheme = scheme;
  switch (scheme) {
    case Scheme::kBpsk: c.bits_per_symbol = 1; break;
    case Scheme::kQpsk: c.bits_per_symbol = 2; break;
    case Scheme::kQam16: c.bits_per_symbol = 4; break;
    case Scheme::kQam64: c.bits_per_symbol = 6; break;
  }
  const int q = c.bits_per_symbol;
  const std::size_t count = std::size_t{1} << q;

  if (scheme == Scheme::kBpsk) {
    c.levels_per_axis = 2;
    c.scale = 1.0;  // levels -1, +1: already unit power
    c.points = {cplx(-1.0, 0.0), cplx(+1.0, 0.0)};
    c.labels = {0u, 1u};
  } else {
    const int qh = q / 2;
    const int n = 1 << qh;
    c.levels_per_axis = n;
    // Per-axis levels +-1, +-3, ...; mean power per axis is (n^2-1)/3,
    // so the two axes together normalize by sqrt(2(n^2-1)/3).
    c.scale = 1.0 / std::sqrt(2.0 * (n * n - 1) / 3.0);
    c.points.resize(count);
    c.labels.resize(count);
    for (int ir = 0; ir < n; ++ir) {
      for (int ii = 0; ii < n; ++ii) {
        const std::uint32_t label =
            (gray_encode(static_cast<std::uint32_t>(ir)) << qh) |
            gray_encode(static_cast<std::uint32_t>(ii));
        c.points[label] = cplx(level_value(ir, n, c.scale), level_value(ii, n, c.scale));
        c.labels[label] = label;
      }
    }
  }

  c.box_radius = 0.0;
  for (const auto& p : c.points) c.box_radius = std::max(c.box_radius, p.real());
  return c;
}

std::vector<cplx> map_bits(std::span<const std::uint8_t> bits, const Constellation& c) {
  const int q = c.bits_per_symbol;
  if (bits.size() % static_cast<std::size_t>(q) != 0) {
    throw std::invalid_argument("map_bits: bit count not a multiple of bits per symbol");
  }
  std::vector<cplx> out(bits.size() / static_cast<std::size_t>(q));
  for (std::size_t s = 0; s < out.size(); ++s) {
    std::uint32_t label = 0;
    for (int b = 0; b < q; ++b) {
      const std::uint8_t bit = bits[s * q + b];
      if (bit > 1) throw std::invalid_argument("map_bits: bits must be 0 or 1");
      label = (label << 1) | bit;
    }
    out[s] = c.points[label];
  }
  return out;
}

int slice_index(cplx z, const Constellation& c) {
  if (c.scheme == Scheme::kBpsk) {
    const int i = slice_axis(z.real(), 2, 1.0);
    return static_cast<int>(gray_encode(static_cast<std::uint32_t>(i)));
  }
  const int qh = bits_per_axis(c);
  const int n = c.levels_per_axis;
  const int ir = slice_axis(z.real(), n, c.scale);
  const int ii = slice_axis(z.imag(), n, c.scale);
  return static_cast<int>((gray_encode(static_cast<std::uint32_t>(ir)) << qh) |
                          gray_encode(static_cast<std::uint32_t>(ii)));
}

cplx slice_hard(cplx z, const Constellation& c) { return c.points[slice_index(z, c)]; }

cplx project_box(cplx w, const Constellation& c) {
  const double a = c.box_radius;
  const double re = std::clamp(w.real(), -a, a);
  if (c.scheme == Scheme::kBpsk) return cplx(re, 0.0);
  return cplx(re, std::clamp(w.imag(), -a, a));
}

std::vector<double> llr_maxlog(cplx z, double mu, double rho, const Constellation& c) {
  if (mu == 0.0) throw std::domain_error("llr_maxlog: zero channel gain");
  const cplx u = z / mu;
  const int q = c.bits_per_symbol;
  std::vector<double> llrs(static_cast<std::size_t>(q));

  if (c.scheme == Scheme::kBpsk) {
    // Single real-axis bit; the imaginary part contributes equally to both
    // minima and cancels.
    const double d0 = axis_min_dist_sq(u.real(), 2, 1.0, 0, 1, 0);
    const double d1 = axis_min_dist_sq(u.real(), 2, 1.0, 0, 1, 1);
    llrs[0] = rho * (d0 - d1);
    return llrs;
  }

  // Per-axis Gray labels make each bit's two minima separable: the other
  // axis' contribution is common to both sets and cancels in the difference.
  const int qh = q / 2;
  const int n = c.levels_per_axis;
  for (int b = 0; b < qh; ++b) {
    const double d0 = axis_min_dist_sq(u.real(), n, c.scale, b, qh, 0);
    const double d1 = axis_min_dist_sq(u.real(), n, c.scale, b, qh, 1);
    llrs[static_cast<std::size_t>(b)] = rho * (d0 - d1);
  }
  for (int b = 0; b < qh; ++b) {
    const double d0 = axis_min_dist_sq(u.imag(), n, c.scale, b, qh, 0);
    const double d1 = axis_min_dist_sq(u.imag(), n, c.scale, b, qh, 1);
    llrs[static_cast<std::size_t>(qh + b)] = rho * (d0 - d1);
  }
  return llrs;
}

void llr_hard_bits(std::span<const double> llrs, std::span<std::uint8_t> bits_out) {
  if (llrs.size() != bits_out.size()) {
    throw std::invalid_argument("llr_hard_bits: size mismatch");
  }
  for (std::size_t i = 0; i < llrs.size(); ++i) bits_out[i] = llrs[i] > 0.0 ? 1 : 0;
}

}  // namespace ocd::modem
