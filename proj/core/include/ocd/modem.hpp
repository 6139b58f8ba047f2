#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ocd::modem {

using cplx = std::complex<double>;

enum class Scheme { kBpsk, kQpsk, kQam16, kQam64 };

const char* scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);  // bpsk|qpsk|qam16|qam64

/// A square constellation with unit average power and per-axis reflected
/// Gray labels. points[m] is the symbol whose Q-bit label equals m, with the
/// first (most significant) Q/2 bits labeling the real axis and the last Q/2
/// bits the imaginary axis. BPSK is the real-only special case with the
/// label-0 symbol at -1.
struct Constellation {
  Scheme scheme;
  int bits_per_symbol = 0;                 // Q
  double box_radius = 0.0;                 // max real part over points
  std::vector<cplx> points;                // indexed by label value
  std::vector<std::uint32_t> labels;       // labels[m] == m by construction
  int levels_per_axis = 0;                 // 2^(Q/2), or 2 for BPSK
  double scale = 1.0;                      // level spacing is 2*scale
};

Constellation build_constellation(Scheme scheme);

/// Maps bits (values 0/1, length a multiple of Q) onto symbols, Q bits per
/// symbol, first bit of each group most significant.
std::vector<cplx> map_bits(std::span<const std::uint8_t> bits, const Constellation& c);

/// Nearest constellation point in Euclidean distance; exact ties go to the
/// point with the smallest index in `points`.
cplx slice_hard(cplx z, const Constellation& c);
int slice_index(cplx z, const Constellation& c);

/// Orthogonal projection onto the tightest box around the constellation:
/// per-axis clip to [-box_radius, +box_radius]; BPSK also zeroes the
/// imaginary part.
cplx project_box(cplx w, const Constellation& c);

/// Max-log LLRs for one equalized symbol: L_b = rho * (min distance^2 over
/// label-bit-0 points minus min over label-bit-1 points) evaluated at z/mu.
/// Positive values favor bit 1. Throws std::domain_error when mu == 0.
std::vector<double> llr_maxlog(cplx z, double mu, double rho, const Constellation& c);

/// Hard bit decisions from LLR signs (L > 0 -> 1), one symbol's worth.
void llr_hard_bits(std::span<const double> llrs, std::span<std::uint8_t> bits_out);

}  // namespace ocd::modem
