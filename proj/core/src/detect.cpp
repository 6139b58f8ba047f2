#include "ocd/detect.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "ocd/tolerances.hpp"

namespace ocd::detect {

namespace {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using modem::cplx;

void check_shapes(const MatrixXcd& H, const VectorXcd& y) {
  if (H.rows() != y.size()) throw std::invalid_argument("H rows must match y size");
  if (H.cols() < 1 || H.rows() < 1) throw std::invalid_argument("empty system");
}

cplx project(cplx w, Mode mode, const modem::Constellation& c) {
  return mode == Mode::kBox ? modem::project_box(w, c) : w;
}

// Soft outputs shared by the exact and approximate paths.
void fill_soft_outputs(EqualizerOutput& out, const modem::Constellation& c) {
  const auto u_count = out.z.size();
  const int q = c.bits_per_symbol;
  out.llrs.resize(static_cast<std::size_t>(u_count) * q);
  for (Eigen::Index i = 0; i < u_count; ++i) {
    const auto l = modem::llr_maxlog(out.z(i), out.mu(i), out.rho(i), c);
    std::copy(l.begin(), l.end(), out.llrs.begin() + static_cast<std::size_t>(i) * q);
  }
}

}  // namespace

const char* mode_name(Mode m) { return m == Mode::kMmse ? "mmse" : "box"; }

std::pair<MatrixXcd, VectorXcd> gram_and_mf(const MatrixXcd& H, const VectorXcd& y) {
  check_shapes(H, y);
  MatrixXcd g = H.adjoint() * H;
  // Force exact Hermitian symmetry; the product is Hermitian up to rounding.
  g = ((g + g.adjoint()) / 2.0).eval();
  return {std::move(g), H.adjoint() * y};
}

EqualizerOutput mmse_exact(const MatrixXcd& H, const VectorXcd& y, double n0,
                           const modem::Constellation& c) {
  check_shapes(H, y);
  if (!(n0 > 0.0)) throw std::invalid_argument("mmse_exact: N0 must be > 0");
  const auto u_count = H.cols();

  auto [g, s_mf] = gram_and_mf(H, y);
  MatrixXcd a = g + n0 * MatrixXcd::Identity(u_count, u_count);
  Eigen::LLT<MatrixXcd> llt(a);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("mmse_exact: regularized Gram matrix is not positive definite");
  }

  EqualizerOutput out;
  out.z = llt.solve(s_mf);
  out.iterations_used = 0;

  // Exact gains need A^{-1} explicitly; U is small (tens) by assumption.
  const MatrixXcd a_inv = llt.solve(MatrixXcd::Identity(u_count, u_count));
  out.mu.resize(u_count);
  out.rho.resize(u_count);
  for (Eigen::Index i = 0; i < u_count; ++i) {
    const cplx m = (a_inv.row(i) * g.col(i)).value();
    out.mu(i) = m.real();
    out.rho(i) = out.mu(i) / (1.0 - out.mu(i));
  }
  fill_soft_outputs(out, c);
  return out;
}

Eigen::VectorXcd cd_reference(const MatrixXcd& H, const VectorXcd& y, double n0,
                              Mode mode, int iterations, const modem::Constellation& c) {
  check_shapes(H, y);
  if (iterations < 1) throw std::invalid_argument("cd_reference: K must be >= 1");
  const auto u_count = H.cols();
  const double alpha = mode == Mode::kMmse ? n0 : 0.0;

  VectorXcd z = VectorXcd::Zero(u_count);
  for (int k = 0; k < iterations; ++k) {
    for (Eigen::Index u = 0; u < u_count; ++u) {
      const double norm_sq = H.col(u).squaredNorm();
      if (norm_sq + alpha == 0.0) {
        throw std::domain_error("cd_reference: zero column norm");
      }
      // Recompute y - sum_{j != u} h_j z_j from scratch.
      VectorXcd partial = y;
      for (Eigen::Index j = 0; j < u_count; ++j) {
        if (j != u) partial -= H.col(j) * z(j);
      }
      const cplx w = H.col(u).dot(partial) / (norm_sq + alpha);
      z(u) = project(w, mode, c);
    }
  }
  return z;
}

OcdPreprocessed ocd_preprocess(const MatrixXcd& H, Mode mode, double n0) {
  if (H.rows() < 1 || H.cols() < 1) throw std::invalid_argument("empty channel matrix");
  const auto u_count = H.cols();
  const double alpha = mode == Mode::kMmse ? n0 : 0.0;

  OcdPreprocessed prep;
  prep.col_norms_sq.resize(u_count);
  prep.d_inv.resize(u_count);
  prep.p.resize(u_count);
  for (Eigen::Index u = 0; u < u_count; ++u) {
    const double norm_sq = H.col(u).squaredNorm();
    if (norm_sq + alpha == 0.0) {
      throw std::domain_error("ocd_preprocess: zero column norm");
    }
    prep.col_norms_sq(u) = norm_sq;
    prep.d_inv(u) = 1.0 / (norm_sq + alpha);
    prep.p(u) = mode == Mode::kBox ? 1.0 : prep.d_inv(u) * norm_sq;
  }
  return prep;
}

OcdResult ocd_equalize(const MatrixXcd& H, const VectorXcd& y, const OcdPreprocessed& prep,
                       Mode mode, int iterations, const modem::Constellation& c,
                       const StepObserver& observer) {
  check_shapes(H, y);
  if (iterations < 1) throw std::invalid_argument("ocd_equalize: K must be >= 1");
  const auto u_count = H.cols();
  if (prep.d_inv.size() != u_count) {
    throw std::invalid_argument("ocd_equalize: preprocessing size mismatch");
  }
  const auto b_count = H.rows();

  OcdResult res;
  res.z = VectorXcd::Zero(u_count);
  VectorXcd r = y;
  for (int k = 0; k < iterations; ++k) {
    for (Eigen::Index u = 0; u < u_count; ++u) {
      const cplx w = prep.d_inv(u) * H.col(u).dot(r) + prep.p(u) * res.z(u);
      const cplx z_new = project(w, mode, c);
      const cplx delta = z_new - res.z(u);
      res.z(u) = z_new;
      r -= H.col(u) * delta;
      // inner product 4B, r update 4B, the two scalings 2 + 2
      res.mult_count += 8ull * static_cast<std::uint64_t>(b_count) + 4ull;
      if (observer) observer(k + 1, static_cast<int>(u), res.z, r);
    }
  }
  return res;
}

EqualizerOutput soft_outputs_from_estimate(Eigen::VectorXcd z, const VectorXd& col_norms_sq,
                                           double n0, const modem::Constellation& c) {
  if (z.size() != col_norms_sq.size()) {
    throw std::invalid_argument("soft_outputs_from_estimate: size mismatch");
  }
  EqualizerOutput out;
  out.z = std::move(z);
  const auto u_count = out.z.size();
  out.mu.resize(u_count);
  out.rho.resize(u_count);
  // mu_i = d_i^{-1} g_i with the N0-regularized inverse norms. BOX mode uses
  // the same regularized form: its own alpha = 0 would make mu = 1 and the
  // SINR unbounded for every user.
  for (Eigen::Index i = 0; i < u_count; ++i) {
    const double g = col_norms_sq(i);
    out.mu(i) = g / (g + n0);
    if (out.mu(i) >= 1.0 - tol::kGainClampThreshold) {
      out.rho(i) = tol::kSinrClampValue;
      out.gain_clamped = true;
    } else {
      out.rho(i) = out.mu(i) / (1.0 - out.mu(i));
    }
  }
  fill_soft_outputs(out, c);
  return out;
}

EqualizerOutput ocd_detect(const MatrixXcd& H, const VectorXcd& y, double n0, Mode mode,
                           int iterations, const modem::Constellation& c) {
  const auto prep = ocd_preprocess(H, mode, n0);
  auto eq = ocd_equalize(H, y, prep, mode, iterations, c);
  auto out = soft_outputs_from_estimate(std::move(eq.z), prep.col_norms_sq, n0, c);
  out.mult_count = eq.mult_count;
  out.iterations_used = iterations;
  return out;
}

double objective_value(const MatrixXcd& H, const VectorXcd& y, const VectorXcd& z,
                       Mode mode, double n0, const modem::Constellation& c) {
  check_shapes(H, y);
  if (H.cols() != z.size()) throw std::invalid_argument("objective_value: z size mismatch");
  const double fit = (y - H * z).squaredNorm();
  if (mode == Mode::kMmse) return fit + n0 * z.squaredNorm();
  const double a = c.box_radius;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const bool inside = std::abs(z(i).real()) <= a && std::abs(z(i).imag()) <= a;
    if (!inside) return std::numeric_limits<double>::infinity();
  }
  return fit;
}

std::uint64_t multiplication_count_cd(int b, int u, int iterations) {
  if (b < 1 || u < 1 || iterations < 1) throw std::invalid_argument("counts need positive arguments");
  const auto bb = static_cast<std::uint64_t>(b);
  const auto uu = static_cast<std::uint64_t>(u);
  return static_cast<std::uint64_t>(iterations) * (4ull * bb * uu * uu + 2ull * uu);
}

std::uint64_t multiplication_count_ocd(int b, int u, int iterations) {
  if (b < 1 || u < 1 || iterations < 1) throw std::invalid_argument("counts need positive arguments");
  const auto bb = static_cast<std::uint64_t>(b);
  const auto uu = static_cast<std::uint64_t>(u);
  return static_cast<std::uint64_t>(iterations) * (8ull * bb * uu + 4ull * uu);
}

}  // namespace ocd::detect
