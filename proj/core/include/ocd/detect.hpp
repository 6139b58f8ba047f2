#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "ocd/modem.hpp"

namespace ocd::detect {

/// Equalizer flavor. MMSE regularizes the least-squares objective with
/// N0 ||z||^2 and leaves updates unconstrained; BOX drops the regularizer
/// and projects every update onto the box around the constellation.
enum class Mode { kMmse, kBox };

const char* mode_name(Mode m);

/// Per-user preprocessing reused across iterations: d_inv[u] is the
/// regularized inverse squared column norm 1/(||h_u||^2 + alpha) and
/// p[u] = d_inv[u] * ||h_u||^2 (identically 1 in BOX mode, where alpha = 0).
struct OcdPreprocessed {
  Eigen::VectorXd d_inv;
  Eigen::VectorXd p;
  Eigen::VectorXd col_norms_sq;
};

struct EqualizerOutput {
  Eigen::VectorXcd z;           // symbol estimates
  Eigen::VectorXd mu;           // per-user channel gains
  Eigen::VectorXd rho;          // per-user post-equalization SINRs
  std::vector<double> llrs;     // U x Q, row-major per user
  int iterations_used = 0;
  std::uint64_t mult_count = 0; // real multiplications in the iteration loop
  bool gain_clamped = false;    // some rho was clamped (mu reached 1)
};

/// Gram matrix G = H^H H (Hermitian) and matched filter s_mf = H^H y.
std::pair<Eigen::MatrixXcd, Eigen::VectorXcd> gram_and_mf(const Eigen::MatrixXcd& H,
                                                          const Eigen::VectorXcd& y);

/// Closed-form MMSE equalizer: solves (G + N0 I) z = H^H y by Cholesky
/// factorization and computes exact gains mu_i = row_i(A^{-1}) . col_i(G)
/// with rho_i = mu_i / (1 - mu_i). Requires N0 > 0.
EqualizerOutput mmse_exact(const Eigen::MatrixXcd& H, const Eigen::VectorXcd& y,
                           double n0, const modem::Constellation& c);

/// Naive coordinate descent: K round-robin sweeps over the users, each
/// update recomputing y - sum_{j != u} h_j z_j from scratch. Serves as the
/// correctness oracle for the optimized path.
Eigen::VectorXcd cd_reference(const Eigen::MatrixXcd& H, const Eigen::VectorXcd& y,
                              double n0, Mode mode, int iterations,
                              const modem::Constellation& c);

/// Preprocessing: column norms, d_inv, p. alpha = N0 (MMSE) or 0 (BOX).
/// Throws std::domain_error on a zero column in BOX mode.
OcdPreprocessed ocd_preprocess(const Eigen::MatrixXcd& H, Mode mode, double n0);

struct OcdResult {
  Eigen::VectorXcd z;
  std::uint64_t mult_count = 0;
};

/// Called after each coordinate update with (iteration k, user u, z, r).
using StepObserver =
    std::function<void(int, int, const Eigen::VectorXcd&, const Eigen::VectorXcd&)>;

/// Optimized coordinate descent: r starts at y, z at 0, and each update is
///   z_u <- proj_C(d_inv_u * h_u^H r + p_u * z_u);  r <- r - h_u * (z_u - old)
/// for K sweeps. proj_C is the identity in MMSE mode and the box projection
/// in BOX mode. mult_count tallies real multiplications in the update loop
/// (4 per complex*complex, 2 per complex*real), K*(8BU + 4U) in total.
OcdResult ocd_equalize(const Eigen::MatrixXcd& H, const Eigen::VectorXcd& y,
                       const OcdPreprocessed& prep, Mode mode, int iterations,
                       const modem::Constellation& c, const StepObserver& observer = {});

/// Approximate soft-output path for detectors that never form A^{-1}:
/// gains mu_i = g_i / (g_i + N0) with g_i = ||h_i||^2 (the N0-regularized
/// inverse norms, used in BOX mode as well so the SINR stays finite),
/// rho_i = mu_i / (1 - mu_i) clamped when mu reaches 1, LLRs via max-log.
EqualizerOutput soft_outputs_from_estimate(Eigen::VectorXcd z,
                                           const Eigen::VectorXd& col_norms_sq,
                                           double n0, const modem::Constellation& c);

/// Full OCD detector: preprocess + equalize + approximate soft outputs.
EqualizerOutput ocd_detect(const Eigen::MatrixXcd& H, const Eigen::VectorXcd& y,
                           double n0, Mode mode, int iterations,
                           const modem::Constellation& c);

/// f(z) = ||y - Hz||^2 + g(z) with g = N0 ||z||^2 (MMSE) or the indicator of
/// the box (BOX; +inf when any coordinate of z is outside).
double objective_value(const Eigen::MatrixXcd& H, const Eigen::VectorXcd& y,
                       const Eigen::VectorXcd& z, Mode mode, double n0,
                       const modem::Constellation& c);

/// Closed-form per-sweep multiplication counts (4 real mults per complex
/// mult, 2 per complex-by-real scaling), times K sweeps.
std::uint64_t multiplication_count_cd(int b, int u, int iterations);
std::uint64_t multiplication_count_ocd(int b, int u, int iterations);

}  // namespace ocd::detect
