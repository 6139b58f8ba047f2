#include "ocd/channel.hpp"

#include <cmath>
#include <stdexcept>

#include "ocd/rng.hpp"

namespace ocd::channel {

Eigen::MatrixXcd gen_channel(int b, int u, std::uint64_t seed) {
  if (u < 1 || b < u) {
    throw std::invalid_argument("gen_channel: need B >= U >= 1");
  }
  Rng rng(seed);
  Eigen::MatrixXcd h(b, u);
  const double s = 1.0 / std::sqrt(2.0);  // unit variance per complex entry
  for (int col = 0; col < u; ++col) {
    for (int row = 0; row < b; ++row) {
      h(row, col) = std::complex<double>(s * rng.normal(), s * rng.normal());
    }
  }
  return h;
}

Eigen::VectorXcd gen_noise(int b, double n0, std::uint64_t seed) {
  if (b < 0 || !(n0 >= 0.0)) {
    throw std::invalid_argument("gen_noise: need B >= 0 and N0 >= 0");
  }
  Eigen::VectorXcd n = Eigen::VectorXcd::Zero(b);
  if (n0 == 0.0) return n;
  Rng rng(seed);
  const double s = std::sqrt(n0 / 2.0);
  for (int row = 0; row < b; ++row) {
    n(row) = std::complex<double>(s * rng.normal(), s * rng.normal());
  }
  return n;
}

double n0_from_ebn0(double ebn0_db, int bits_per_symbol, int u, int b) {
  if (bits_per_symbol < 1 || u < 1 || b < 1) {
    throw std::invalid_argument("n0_from_ebn0: Q, U, B must be >= 1");
  }
  const double ebn0 = std::pow(10.0, ebn0_db / 10.0);
  return static_cast<double>(u) / (static_cast<double>(bits_per_symbol) * b * ebn0);
}

Eigen::VectorXcd transmit(const Eigen::MatrixXcd& H, const Eigen::VectorXcd& s,
                          const Eigen::VectorXcd& n) {
  if (H.cols() != s.size() || H.rows() != n.size()) {
    throw std::invalid_argument("transmit: shape mismatch");
  }
  return H * s + n;
}

ChannelInstance make_instance(Eigen::MatrixXcd H, Eigen::VectorXcd s, double n0,
                              std::uint64_t noise_seed) {
  ChannelInstance inst;
  inst.n = gen_noise(static_cast<int>(H.rows()), n0, noise_seed);
  inst.y = transmit(H, s, inst.n);
  inst.H = std::move(H);
  inst.s = std::move(s);
  inst.n0 = n0;
  return inst;
}

}  // namespace ocd::channel
