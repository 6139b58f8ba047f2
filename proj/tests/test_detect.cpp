#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <complex>
#include <vector>

#include "ocd/channel.hpp"
#include "ocd/detect.hpp"
#include "ocd/modem.hpp"
#include "ocd/rng.hpp"
#include "ocd/tolerances.hpp"

using namespace ocd;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using modem::cplx;

namespace {

struct Instance {
  MatrixXcd h;
  VectorXcd s;
  VectorXcd y;
  double n0;
};

Instance random_instance(int b, int u, double ebn0_db, modem::Scheme scheme,
                         std::uint64_t seed) {
  const auto c = modem::build_constellation(scheme);
  Instance inst;
  inst.n0 = channel::n0_from_ebn0(ebn0_db, c.bits_per_symbol, u, b);
  Rng bit_rng(derive_seed(seed, 0));
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(u) * c.bits_per_symbol);
  for (auto& bv : bits) bv = bit_rng.bit() ? 1 : 0;
  const auto symbols = modem::map_bits(bits, c);
  inst.s.resize(u);
  for (int i = 0; i < u; ++i) inst.s(i) = symbols[static_cast<std::size_t>(i)];
  inst.h = channel::gen_channel(b, u, derive_seed(seed, 1));
  inst.y = inst.h * inst.s + channel::gen_noise(b, inst.n0, derive_seed(seed, 2));
  return inst;
}

double max_elementwise_rel(const VectorXcd& a, const VectorXcd& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a(i) - b(i)) / std::max(std::abs(b(i)), 1e-12));
  }
  return worst;
}

// Test-side oracle: projected gradient on ||y - Hz||^2 over the box, run to
// convergence with the standard 1/L step.
VectorXcd projected_gradient_box(const MatrixXcd& h, const VectorXcd& y,
                                 const modem::Constellation& c, int max_iters) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h.adjoint() * h);
  const double step = 1.0 / (2.0 * es.eigenvalues().maxCoeff());
  VectorXcd z = VectorXcd::Zero(h.cols());
  for (int it = 0; it < max_iters; ++it) {
    const VectorXcd grad = 2.0 * (h.adjoint() * (h * z - y));
    VectorXcd next(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      next(i) = modem::project_box(z(i) - step * grad(i), c);
    }
    const double change = (next - z).norm();
    z = next;
    if (change < 1e-14) break;
  }
  return z;
}

// Worst first-order violation over the real coordinates of the box problem.
double kkt_residual_box(const MatrixXcd& h, const VectorXcd& y, const VectorXcd& z,
                        const modem::Constellation& c) {
  const VectorXcd grad = 2.0 * (h.adjoint() * (h * z - y));
  const double a = c.box_radius;
  double worst = 0.0;
  // KKT per real coordinate: interior needs a vanishing gradient; a clipped
  // coordinate needs the descent pull blocked by the bound (g <= 0 at +a,
  // g >= 0 at -a).
  auto axis = [&](double x, double g) {
    if (x >= a) return std::max(0.0, g);
    if (x <= -a) return std::max(0.0, -g);
    return std::abs(g);
  };
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    worst = std::max(worst, axis(z(i).real(), grad(i).real()));
    worst = std::max(worst, axis(z(i).imag(), grad(i).imag()));
  }
  return worst;
}

}  // namespace

TEST_CASE("gram_and_mf") {
  SUBCASE("standard-basis columns give the identity Gram matrix") {
    MatrixXcd h = MatrixXcd::Zero(3, 3);
    h(0, 0) = h(1, 1) = h(2, 2) = 1.0;
    VectorXcd y(3);
    y << cplx(1, 2), cplx(-3, 0.5), cplx(0, -1);
    const auto [g, s_mf] = detect::gram_and_mf(h, y);
    CHECK((g - MatrixXcd::Identity(3, 3)).norm() < 1e-14);
    CHECK((s_mf - y).norm() < 1e-14);
  }

  SUBCASE("single column reduces to norm and correlation") {
    const auto h = channel::gen_channel(6, 1, 5);
    const auto y = channel::gen_noise(6, 1.0, 6);
    const auto [g, s_mf] = detect::gram_and_mf(h, y);
    CHECK(std::abs(g(0, 0) - cplx(h.col(0).squaredNorm(), 0.0)) < 1e-12);
    CHECK(std::abs(s_mf(0) - h.col(0).dot(y)) < 1e-12);
  }

  SUBCASE("random 4x2 matches the brute-force double loop") {
    const auto h = channel::gen_channel(4, 2, 77);
    const auto y = channel::gen_noise(4, 2.0, 78);
    const auto [g, s_mf] = detect::gram_and_mf(h, y);
    for (int i = 0; i < 2; ++i) {
      cplx mf(0, 0);
      for (int k = 0; k < 4; ++k) mf += std::conj(h(k, i)) * y(k);
      CHECK(std::abs(s_mf(i) - mf) < 1e-12);
      for (int j = 0; j < 2; ++j) {
        cplx gij(0, 0);
        for (int k = 0; k < 4; ++k) gij += std::conj(h(k, i)) * h(k, j);
        CHECK(std::abs(g(i, j) - gij) < 1e-12);
      }
    }
    CHECK((g - g.adjoint()).norm() < 1e-12);
  }

  SUBCASE("shape mismatch is rejected") {
    CHECK_THROWS_AS(detect::gram_and_mf(MatrixXcd::Zero(4, 2), VectorXcd::Zero(3)),
                    std::invalid_argument);
  }
}

TEST_CASE("mmse_exact") {
  const auto c = modem::build_constellation(modem::Scheme::kQpsk);

  SUBCASE("scalar closed form") {
    const auto h = channel::gen_channel(8, 1, 31);
    const auto y = channel::gen_noise(8, 1.0, 32);
    const double n0 = 0.25;
    const auto out = detect::mmse_exact(h, y, n0, c);
    const double norm_sq = h.col(0).squaredNorm();
    CHECK(std::abs(out.z(0) - h.col(0).dot(y) / (norm_sq + n0)) < 1e-12);
    CHECK(out.mu(0) == doctest::Approx(norm_sq / (norm_sq + n0)).epsilon(1e-12));
  }

  SUBCASE("orthonormal columns with N0 = 1") {
    MatrixXcd h = MatrixXcd::Zero(4, 2);
    h(0, 0) = 1.0;
    h(2, 1) = 1.0;
    VectorXcd y(4);
    y << cplx(2, 1), cplx(0, 0), cplx(-1, 3), cplx(5, 5);
    const auto out = detect::mmse_exact(h, y, 1.0, c);
    CHECK(std::abs(out.z(0) - y(0) / 2.0) < 1e-14);
    CHECK(std::abs(out.z(1) - y(2) / 2.0) < 1e-14);
    for (int i = 0; i < 2; ++i) {
      CHECK(out.mu(i) == doctest::Approx(0.5).epsilon(1e-12));
      CHECK(out.rho(i) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  SUBCASE("random instance: solve residual and gains against the explicit inverse") {
    const auto inst = random_instance(16, 4, 8.0, modem::Scheme::kQpsk, 1001);
    const auto out = detect::mmse_exact(inst.h, inst.y, inst.n0, c);
    const auto [g, s_mf] = detect::gram_and_mf(inst.h, inst.y);
    const MatrixXcd a = g + inst.n0 * MatrixXcd::Identity(4, 4);
    CHECK((a * out.z - s_mf).norm() < 1e-10);

    const MatrixXcd a_inv = a.inverse();  // LU route, independent of the solver path
    for (int i = 0; i < 4; ++i) {
      const cplx mu = (a_inv.row(i) * g.col(i)).value();
      CHECK(out.mu(i) == doctest::Approx(mu.real()).epsilon(1e-10));
      // Algebraic identity of the gain: mu_i = 1 - N0 * (A^{-1})_{ii}.
      CHECK(out.mu(i) ==
            doctest::Approx(1.0 - inst.n0 * a_inv(i, i).real()).epsilon(1e-10));
      CHECK(out.rho(i) == doctest::Approx(out.mu(i) / (1.0 - out.mu(i))).epsilon(1e-10));
      // Packed LLRs are exactly the per-user max-log values.
      const auto want = modem::llr_maxlog(out.z(i), out.mu(i), out.rho(i), c);
      for (int b = 0; b < 2; ++b) {
        CHECK(out.llrs[static_cast<std::size_t>(i * 2 + b)] ==
              want[static_cast<std::size_t>(b)]);
      }
    }
  }

  SUBCASE("non-positive noise variance is rejected") {
    const auto h = channel::gen_channel(4, 2, 1);
    CHECK_THROWS_AS(detect::mmse_exact(h, VectorXcd::Zero(4), 0.0, c),
                    std::invalid_argument);
    CHECK_THROWS_AS(detect::mmse_exact(h, VectorXcd::Zero(4), -1.0, c),
                    std::invalid_argument);
  }
}

TEST_CASE("cd_reference single-user updates are exact") {
  const auto c = modem::build_constellation(modem::Scheme::kQam16);
  const auto h = channel::gen_channel(8, 1, 600);
  const auto y = channel::gen_noise(8, 1.5, 601);
  const double n0 = 0.3;
  const double norm_sq = h.col(0).squaredNorm();

  const auto z_mmse = detect::cd_reference(h, y, n0, detect::Mode::kMmse, 1, c);
  CHECK(std::abs(z_mmse(0) - h.col(0).dot(y) / (norm_sq + n0)) < 1e-14);

  const auto z_box = detect::cd_reference(h, y, n0, detect::Mode::kBox, 1, c);
  CHECK(z_box(0) == modem::project_box(h.col(0).dot(y) / norm_sq, c));
}

TEST_CASE("cd_reference recovers the symbols without noise") {
  const auto c = modem::build_constellation(modem::Scheme::kQam16);
  auto inst = random_instance(32, 4, 10.0, modem::Scheme::kQam16, 55);
  inst.y = inst.h * inst.s;  // noise-free
  const auto z = detect::cd_reference(inst.h, inst.y, 1e-12, detect::Mode::kMmse, 50, c);
  CHECK((z - inst.s).norm() < 1e-6);
}

TEST_CASE("ocd_preprocess") {
  SUBCASE("BOX mode has unit gains exactly") {
    const auto h = channel::gen_channel(16, 4, 9);
    const auto prep = detect::ocd_preprocess(h, detect::Mode::kBox, 0.5);
    for (int i = 0; i < 4; ++i) CHECK(prep.p(i) == 1.0);
  }

  SUBCASE("norm 3 with unit N0 gives d_inv 0.25 and p 0.75") {
    MatrixXcd h(3, 1);
    h << 1.0, 1.0, 1.0;
    const auto prep = detect::ocd_preprocess(h, detect::Mode::kMmse, 1.0);
    CHECK(prep.d_inv(0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(prep.p(0) == doctest::Approx(0.75).epsilon(1e-15));
  }

  SUBCASE("identity holds against brute-force norms") {
    const auto h = channel::gen_channel(24, 6, 12);
    for (auto mode : {detect::Mode::kMmse, detect::Mode::kBox}) {
      const double n0 = 0.7;
      const auto prep = detect::ocd_preprocess(h, mode, n0);
      const double alpha = mode == detect::Mode::kMmse ? n0 : 0.0;
      for (int u = 0; u < 6; ++u) {
        double norm_sq = 0.0;
        for (int k = 0; k < 24; ++k) norm_sq += std::norm(h(k, u));
        CHECK(std::abs(prep.d_inv(u) * (norm_sq + alpha) - 1.0) < 1e-12);
        CHECK(prep.col_norms_sq(u) == doctest::Approx(norm_sq).epsilon(1e-12));
      }
    }
  }

  SUBCASE("zero column is rejected in BOX mode only") {
    MatrixXcd h = MatrixXcd::Zero(4, 2);
    h(0, 0) = 1.0;  // second column all zero
    CHECK_THROWS_AS(detect::ocd_preprocess(h, detect::Mode::kBox, 0.0),
                    std::domain_error);
    CHECK_NOTHROW(detect::ocd_preprocess(h, detect::Mode::kMmse, 0.5));
  }
}

TEST_CASE("ocd_equalize leaves zero input at zero") {
  const auto c = modem::build_constellation(modem::Scheme::kQpsk);
  const auto h = channel::gen_channel(8, 2, 70);
  const auto prep = detect::ocd_preprocess(h, detect::Mode::kMmse, 0.1);
  bool residual_zero = true;
  auto observer = [&](int, int, const VectorXcd&, const VectorXcd& r) {
    residual_zero = residual_zero && r.norm() == 0.0;
  };
  const auto res =
      detect::ocd_equalize(h, VectorXcd::Zero(8), prep, detect::Mode::kMmse, 4, c, observer);
  CHECK(res.z.norm() == 0.0);
  CHECK(residual_zero);
}

TEST_CASE("ocd matches the naive cd oracle over a randomized grid") {
  constexpr modem::Scheme kSchemes[] = {modem::Scheme::kBpsk, modem::Scheme::kQpsk,
                                        modem::Scheme::kQam16, modem::Scheme::kQam64};
  std::uint64_t seed = 9000;
  int pick = 0;
  for (int b : {8, 16, 32}) {
    for (int u : {2, 4}) {
      for (int k : {1, 2, 3, 5}) {
        for (auto mode : {detect::Mode::kMmse, detect::Mode::kBox}) {
          const auto scheme = kSchemes[pick++ % 4];
          const auto c = modem::build_constellation(scheme);
          const auto inst = random_instance(b, u, 9.0, scheme, ++seed);
          const auto z_cd = detect::cd_reference(inst.h, inst.y, inst.n0, mode, k, c);
          const auto prep = detect::ocd_preprocess(inst.h, mode, inst.n0);
          const auto res = detect::ocd_equalize(inst.h, inst.y, prep, mode, k, c);
          CAPTURE(b);
          CAPTURE(u);
          CAPTURE(k);
          CHECK(max_elementwise_rel(res.z, z_cd) < tol::kOcdCdEquivalenceRel);
          CHECK(res.mult_count == detect::multiplication_count_ocd(b, u, k));
        }
      }
    }
  }
}

TEST_CASE("maintained residual equals y - Hz after every update") {
  const auto c = modem::build_constellation(modem::Scheme::kQam64);
  for (auto mode : {detect::Mode::kMmse, detect::Mode::kBox}) {
    const auto inst = random_instance(32, 8, 12.0, modem::Scheme::kQam64,
                                      mode == detect::Mode::kMmse ? 41 : 42);
    const auto prep = detect::ocd_preprocess(inst.h, mode, inst.n0);
    double worst = 0.0;
    auto observer = [&](int, int, const VectorXcd& z, const VectorXcd& r) {
      const VectorXcd scratch = inst.y - inst.h * z;
      worst = std::max(worst, (r - scratch).norm() / inst.y.norm());
    };
    detect::ocd_equalize(inst.h, inst.y, prep, mode, 5, c, observer);
    CHECK(worst < tol::kResidualIdentityRel);
  }
}

TEST_CASE("objective is non-increasing across coordinate updates") {
  const auto c = modem::build_constellation(modem::Scheme::kQam64);
  for (auto mode : {detect::Mode::kMmse, detect::Mode::kBox}) {
    for (int t = 0; t < 5; ++t) {
      const auto inst =
          random_instance(24, 6, 10.0, modem::Scheme::kQam64, 300 + static_cast<unsigned>(t));
      const auto prep = detect::ocd_preprocess(inst.h, mode, inst.n0);
      double prev = detect::objective_value(inst.h, inst.y, VectorXcd::Zero(6), mode,
                                            inst.n0, c);
      bool monotone = true;
      auto observer = [&](int, int, const VectorXcd& z, const VectorXcd&) {
        const double obj = detect::objective_value(inst.h, inst.y, z, mode, inst.n0, c);
        if (obj > prev + tol::kDescentSlackRel * std::max(1.0, std::abs(prev))) {
          monotone = false;
        }
        prev = obj;
      };
      detect::ocd_equalize(inst.h, inst.y, prep, mode, 10, c, observer);
      CHECK(monotone);
    }
  }
}

TEST_CASE("ocd-mmse converges monotonically to the closed form") {
  const auto c = modem::build_constellation(modem::Scheme::kQam64);
  const auto inst = random_instance(128, 8, 10.0, modem::Scheme::kQam64, 2718);
  const auto exact = detect::mmse_exact(inst.h, inst.y, inst.n0, c);
  const auto prep = detect::ocd_preprocess(inst.h, detect::Mode::kMmse, inst.n0);

  std::vector<double> errors;
  auto observer = [&](int, int u, const VectorXcd& z, const VectorXcd&) {
    if (u == 7) errors.push_back((z - exact.z).norm() / exact.z.norm());
  };
  detect::ocd_equalize(inst.h, inst.y, prep, detect::Mode::kMmse, 50, c, observer);
  REQUIRE(errors.size() == 50);
  CHECK(errors.back() < tol::kConvergenceRel);
  for (std::size_t k = 1; k < errors.size(); ++k) {
    CHECK(errors[k] <= errors[k - 1] + 1e-14);
  }
}

TEST_CASE("ocd-box satisfies the box optimality conditions") {
  const auto c = modem::build_constellation(modem::Scheme::kQam64);
  const auto inst = random_instance(32, 8, 16.0, modem::Scheme::kQam64, 314);
  const auto det = detect::ocd_detect(inst.h, inst.y, inst.n0, detect::Mode::kBox, 200, c);
  CHECK(kkt_residual_box(inst.h, inst.y, det.z, c) < tol::kKktResidual);

  const auto z_pg = projected_gradient_box(inst.h, inst.y, c, 20000);
  const double f_cd =
      detect::objective_value(inst.h, inst.y, det.z, detect::Mode::kBox, inst.n0, c);
  const double f_pg =
      detect::objective_value(inst.h, inst.y, z_pg, detect::Mode::kBox, inst.n0, c);
  CHECK(std::abs(f_cd - f_pg) < 1e-8);
}

TEST_CASE("noise-free exactness in both modes") {
  const auto c = modem::build_constellation(modem::Scheme::kQam16);
  auto inst = random_instance(32, 8, 10.0, modem::Scheme::kQam16, 121);
  inst.y = inst.h * inst.s;

  const auto box = detect::ocd_detect(inst.h, inst.y, 0.0, detect::Mode::kBox, 200, c);
  CHECK((box.z - inst.s).lpNorm<Eigen::Infinity>() < 1e-6);

  const auto mmse = detect::ocd_detect(inst.h, inst.y, 1e-12, detect::Mode::kMmse, 200, c);
  CHECK((mmse.z - inst.s).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("ocd_detect approximate gains") {
  const auto c = modem::build_constellation(modem::Scheme::kQpsk);

  SUBCASE("single user matches the exact gain") {
    const auto inst = random_instance(16, 1, 6.0, modem::Scheme::kQpsk, 888);
    const auto approx = detect::ocd_detect(inst.h, inst.y, inst.n0, detect::Mode::kMmse, 30, c);
    const auto exact = detect::mmse_exact(inst.h, inst.y, inst.n0, c);
    CHECK(approx.mu(0) == doctest::Approx(exact.mu(0)).epsilon(1e-10));
    CHECK_FALSE(approx.gain_clamped);
  }

  SUBCASE("BOX with zero N0 trips the SINR clamp") {
    const auto inst = random_instance(8, 2, 10.0, modem::Scheme::kQpsk, 414);
    const auto out = detect::ocd_detect(inst.h, inst.y, 0.0, detect::Mode::kBox, 5, c);
    CHECK(out.gain_clamped);
    for (int i = 0; i < 2; ++i) {
      CHECK(out.mu(i) == 1.0);
      CHECK(out.rho(i) == tol::kSinrClampValue);
    }
  }

  SUBCASE("large-ratio gains concentrate near the exact ones") {
    double total_dev = 0.0;
    int count = 0;
    for (int t = 0; t < 100; ++t) {
      const auto inst =
          random_instance(128, 8, 10.0, modem::Scheme::kQpsk, 5000 + static_cast<unsigned>(t));
      const auto approx =
          detect::ocd_detect(inst.h, inst.y, inst.n0, detect::Mode::kMmse, 1, c);
      const auto exact = detect::mmse_exact(inst.h, inst.y, inst.n0, c);
      for (int i = 0; i < 8; ++i) {
        total_dev += std::abs(approx.mu(i) - exact.mu(i));
        ++count;
      }
    }
    CHECK(total_dev / count < 0.02);
  }

  SUBCASE("SINR relation holds exactly as computed") {
    const auto inst = random_instance(32, 4, 8.0, modem::Scheme::kQpsk, 99);
    const auto out = detect::ocd_detect(inst.h, inst.y, inst.n0, detect::Mode::kMmse, 3, c);
    for (int i = 0; i < 4; ++i) {
      CHECK(out.rho(i) == doctest::Approx(out.mu(i) / (1.0 - out.mu(i))).epsilon(1e-12));
    }
  }
}

TEST_CASE("objective_value") {
  const auto c = modem::build_constellation(modem::Scheme::kQpsk);
  const auto h = channel::gen_channel(6, 2, 17);
  const auto y = channel::gen_noise(6, 1.0, 18);

  CHECK(detect::objective_value(h, y, VectorXcd::Zero(2), detect::Mode::kMmse, 0.4, c) ==
        doctest::Approx(y.squaredNorm()).epsilon(1e-14));

  // Scalar arithmetic: h = 1, y = 2, N0 = 1, z = 1 -> |2-1|^2 + 1 = 2.
  MatrixXcd h1(1, 1);
  h1 << 1.0;
  VectorXcd y1(1), z1(1);
  y1 << 2.0;
  z1 << 1.0;
  CHECK(detect::objective_value(h1, y1, z1, detect::Mode::kMmse, 1.0, c) ==
        doctest::Approx(2.0).epsilon(1e-15));

  VectorXcd outside(2);
  outside << cplx(5.0, 0.0), cplx(0.0, 0.0);
  CHECK(std::isinf(
      detect::objective_value(h, y, outside, detect::Mode::kBox, 0.0, c)));
}

TEST_CASE("multiplication count formulas") {
  CHECK(detect::multiplication_count_cd(128, 8, 1) == 32784ull);
  CHECK(detect::multiplication_count_ocd(128, 8, 1) == 8224ull);
  CHECK(detect::multiplication_count_cd(128, 8, 3) == 3ull * 32784ull);
  CHECK(detect::multiplication_count_ocd(128, 8, 3) == 3ull * 8224ull);

  // CD / OCD approaches U/2 for large B.
  const double ratio =
      static_cast<double>(detect::multiplication_count_cd(1'000'000, 8, 1)) /
      static_cast<double>(detect::multiplication_count_ocd(1'000'000, 8, 1));
  CHECK(std::abs(ratio - 4.0) < 0.01);

  CHECK_THROWS_AS(detect::multiplication_count_cd(0, 8, 1), std::invalid_argument);
}
