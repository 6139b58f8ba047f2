#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace ocd::channel {

/// One narrowband subcarrier instance: y = H s + n with noise variance n0
/// per complex entry.
struct ChannelInstance {
  Eigen::MatrixXcd H;   // B x U
  Eigen::VectorXcd s;   // U transmitted symbols
  Eigen::VectorXcd n;   // B noise samples
  Eigen::VectorXcd y;   // B received samples
  double n0 = 0.0;
};

/// Ties a transmission together: draws the noise for the given seed and
/// stores y = H s + n exactly as transmitted.
ChannelInstance make_instance(Eigen::MatrixXcd H, Eigen::VectorXcd s, double n0,
                              std::uint64_t noise_seed);

/// B x U matrix with i.i.d. circularly-symmetric complex Gaussian entries,
/// zero mean and unit variance per complex entry. Deterministic in the seed.
/// Throws std::invalid_argument unless B >= U >= 1.
Eigen::MatrixXcd gen_channel(int b, int u, std::uint64_t seed);

/// B complex noise samples with total variance n0 per entry (n0/2 per real
/// dimension); n0 == 0 yields the zero vector. Throws on n0 < 0.
Eigen::VectorXcd gen_noise(int b, double n0, std::uint64_t seed);

/// Noise variance for a given SNR per bit: N0 = U / (Q * B * 10^(ebn0/10)),
/// i.e. Eb/N0 = E||s||^2 / (Q E||n||^2) with E||s||^2 = U and E||n||^2 = B N0.
double n0_from_ebn0(double ebn0_db, int bits_per_symbol, int u, int b);

/// y = H s + n.
Eigen::VectorXcd transmit(const Eigen::MatrixXcd& H, const Eigen::VectorXcd& s,
                          const Eigen::VectorXcd& n);

}  // namespace ocd::channel
