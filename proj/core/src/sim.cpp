#include "ocd/sim.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "ocd/channel.hpp"
#include "ocd/rng.hpp"
#include "ocd/tolerances.hpp"

namespace ocd::sim {

namespace {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

fxp::FixedFormat effective_format(const SimConfig& cfg) {
  return cfg.fxp_format.value_or(fxp::FixedFormat{});
}

detect::Mode mode_of(Detector d) {
  switch (d) {
    case Detector::kCdBox:
    case Detector::kOcdBox:
    case Detector::kOcdBoxFxp:
      return detect::Mode::kBox;
    default:
      return detect::Mode::kMmse;
  }
}

detect::EqualizerOutput run_detector(const SimConfig& cfg, const MatrixXcd& h,
                                     const VectorXcd& y, double n0,
                                     const modem::Constellation& c) {
  const detect::Mode mode = mode_of(cfg.detector);
  switch (cfg.detector) {
    case Detector::kExactMmse:
      return detect::mmse_exact(h, y, n0, c);
    case Detector::kCdMmse:
    case Detector::kCdBox: {
      VectorXcd z = detect::cd_reference(h, y, n0, mode, cfg.iterations, c);
      VectorXd norms(h.cols());
      for (Eigen::Index i = 0; i < h.cols(); ++i) norms(i) = h.col(i).squaredNorm();
      auto out = detect::soft_outputs_from_estimate(std::move(z), norms, n0, c);
      out.iterations_used = cfg.iterations;
      out.mult_count = detect::multiplication_count_cd(cfg.b, cfg.u, cfg.iterations);
      return out;
    }
    case Detector::kOcdMmse:
    case Detector::kOcdBox:
      return detect::ocd_detect(h, y, n0, mode, cfg.iterations, c);
    case Detector::kOcdMmseFxp:
    case Detector::kOcdBoxFxp: {
      VectorXcd z = fxp::ocd_fixed(h, y, n0, mode, cfg.iterations, c, effective_format(cfg));
      VectorXd norms(h.cols());
      for (Eigen::Index i = 0; i < h.cols(); ++i) norms(i) = h.col(i).squaredNorm();
      auto out = detect::soft_outputs_from_estimate(std::move(z), norms, n0, c);
      out.iterations_used = cfg.iterations;
      // Same update structure as the float path, hence the same count.
      out.mult_count = detect::multiplication_count_ocd(cfg.b, cfg.u, cfg.iterations);
      return out;
    }
  }
  throw std::logic_error("run_detector: unhandled detector");
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

const char* detector_name(Detector d) {
  switch (d) {
    case Detector::kExactMmse: return "exact_mmse";
    case Detector::kCdMmse: return "cd_mmse";
    case Detector::kCdBox: return "cd_box";
    case Detector::kOcdMmse: return "ocd_mmse";
    case Detector::kOcdBox: return "ocd_box";
    case Detector::kOcdMmseFxp: return "ocd_mmse_fxp";
    case Detector::kOcdBoxFxp: return "ocd_box_fxp";
  }
  return "?";
}

Detector detector_from_name(const std::string& name) {
  for (Detector d : {Detector::kExactMmse, Detector::kCdMmse, Detector::kCdBox,
                     Detector::kOcdMmse, Detector::kOcdBox, Detector::kOcdMmseFxp,
                     Detector::kOcdBoxFxp}) {
    if (name == detector_name(d)) return d;
  }
  throw std::invalid_argument("unknown detector: " + name);
}

void SimConfig::validate() const {
  if (u < 1 || b < u) throw std::invalid_argument("config: need B >= U >= 1");
  if (iterations < 1) throw std::invalid_argument("config: need K >= 1");
  if (trials_per_point < 1) throw std::invalid_argument("config: need trials >= 1");
  if (workers < 1) throw std::invalid_argument("config: need workers >= 1");
  if (ebn0_grid_db.empty()) throw std::invalid_argument("config: Eb/N0 grid is empty");
  for (std::size_t i = 1; i < ebn0_grid_db.size(); ++i) {
    if (!(ebn0_grid_db[i] > ebn0_grid_db[i - 1])) {
      throw std::invalid_argument("config: Eb/N0 grid must be strictly increasing");
    }
  }
  if (fxp_format) fxp_format->validate();
}

TrialCounts run_trial(const SimConfig& cfg, std::size_t point_index,
                      std::int64_t trial_index) {
  cfg.validate();
  if (point_index >= cfg.ebn0_grid_db.size()) {
    throw std::invalid_argument("run_trial: point index out of range");
  }
  const auto c = modem::build_constellation(cfg.scheme);
  const int q = c.bits_per_symbol;
  const double ebn0_db = cfg.ebn0_grid_db[point_index];
  const double n0 = channel::n0_from_ebn0(ebn0_db, q, cfg.u, cfg.b);

  const std::uint64_t trial_seed =
      derive_seed(cfg.master_seed, point_index, static_cast<std::uint64_t>(trial_index));
  Rng bit_rng(derive_seed(trial_seed, 0));
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(cfg.u) * q);
  for (auto& bv : bits) bv = bit_rng.bit() ? 1 : 0;

  const auto s = modem::map_bits(bits, c);
  VectorXcd sv(cfg.u);
  for (int i = 0; i < cfg.u; ++i) sv(i) = s[static_cast<std::size_t>(i)];
  const auto inst =
      channel::make_instance(channel::gen_channel(cfg.b, cfg.u, derive_seed(trial_seed, 1)),
                             std::move(sv), n0, derive_seed(trial_seed, 2));

  const auto out = run_detector(cfg, inst.H, inst.y, n0, c);

  TrialCounts counts;
  counts.bits = bits.size();
  counts.symbols = static_cast<std::uint64_t>(cfg.u);
  counts.mult_count = out.mult_count;

  std::vector<std::uint8_t> decided(bits.size());
  modem::llr_hard_bits(out.llrs, decided);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (decided[i] != bits[i]) ++counts.bit_errors;
  }
  for (int i = 0; i < cfg.u; ++i) {
    const auto hard = modem::slice_hard(out.z(i) / out.mu(i), c);
    if (hard != inst.s(i)) ++counts.symbol_errors;
  }

  if (cfg.detector == Detector::kExactMmse) {
    counts.dist_to_mmse = 0.0;
  } else {
    const auto exact = detect::mmse_exact(inst.H, inst.y, n0, c);
    counts.dist_to_mmse = (out.z - exact.z).norm() / exact.z.norm();
  }
  return counts;
}

SimReport run_sweep(const SimConfig& cfg) {
  cfg.validate();
  SimReport report;
  report.config = cfg;
  report.points.reserve(cfg.ebn0_grid_db.size());

  for (std::size_t pt = 0; pt < cfg.ebn0_grid_db.size(); ++pt) {
    const auto start = std::chrono::steady_clock::now();
    const auto trials = cfg.trials_per_point;
    std::vector<TrialCounts> results(static_cast<std::size_t>(trials));

    std::atomic<std::int64_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    std::int64_t error_trial = -1;

    auto worker = [&] {
      for (;;) {
        const std::int64_t t = next.fetch_add(1);
        if (t >= trials) return;
        try {
          results[static_cast<std::size_t>(t)] = run_trial(cfg, pt, t);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (error_trial < 0 || t < error_trial) {
            error_trial = t;
            error = std::current_exception();
          }
          return;
        }
      }
    };

    const int thread_count =
        static_cast<int>(std::min<std::int64_t>(cfg.workers, trials));
    if (thread_count <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(thread_count));
      for (int i = 0; i < thread_count; ++i) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    }

    if (error) {
      std::ostringstream ctx;
      ctx << "sweep aborted: detector=" << detector_name(cfg.detector)
          << " ebn0=" << cfg.ebn0_grid_db[pt] << " dB trial=" << error_trial;
      try {
        std::rethrow_exception(error);
      } catch (const std::exception& e) {
        throw std::runtime_error(ctx.str() + ": " + e.what());
      }
    }

    // Ordered reduction: identical result for any worker count.
    PointResult point;
    point.detector = cfg.detector;
    point.ebn0_db = cfg.ebn0_grid_db[pt];
    point.iterations = cfg.iterations;
    double dist_sum = 0.0;
    double mult_sum = 0.0;
    for (const auto& tc : results) {
      point.bits += tc.bits;
      point.bit_errors += tc.bit_errors;
      point.symbols += tc.symbols;
      point.symbol_errors += tc.symbol_errors;
      dist_sum += tc.dist_to_mmse;
      mult_sum += static_cast<double>(tc.mult_count);
    }
    point.ber = static_cast<double>(point.bit_errors) / static_cast<double>(point.bits);
    point.ser =
        static_cast<double>(point.symbol_errors) / static_cast<double>(point.symbols);
    point.mean_dist_to_mmse = dist_sum / static_cast<double>(trials);
    point.mean_mult_count = mult_sum / static_cast<double>(trials);
    point.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.points.push_back(point);
  }
  return report;
}

void emit_csv(const SimReport& report, std::ostream& os) {
  os << "detector,ebn0_db,K,bits,bit_errors,ber,symbols,symbol_errors,ser,"
        "mean_dist_to_mmse,mean_mult_count,wall_seconds\n";
  for (const auto& p : report.points) {
    os << detector_name(p.detector) << ',' << format_double(p.ebn0_db) << ','
       << p.iterations << ',' << p.bits << ',' << p.bit_errors << ','
       << format_double(p.ber) << ',' << p.symbols << ',' << p.symbol_errors << ','
       << format_double(p.ser) << ',' << format_double(p.mean_dist_to_mmse) << ','
       << format_double(p.mean_mult_count) << ',' << format_double(p.wall_seconds)
       << '\n';
  }
  if (!os) throw std::runtime_error("emit_csv: stream failure");
}

void emit_csv(const SimReport& report, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);  // binary keeps LF endings
  if (!os) throw std::runtime_error("emit_csv: cannot open " + path.string());
  emit_csv(report, os);
}

namespace {

struct CheckRunner {
  std::ostream& os;
  bool all_ok = true;

  void check(const char* name, bool ok, const std::string& detail = {}) {
    os << (ok ? "ok  " : "FAIL") << "  " << name;
    if (!detail.empty()) os << "  (" << detail << ")";
    os << '\n';
    all_ok = all_ok && ok;
  }
};

std::pair<MatrixXcd, VectorXcd> random_instance(int b, int u, double n0,
                                                modem::Scheme scheme,
                                                std::uint64_t seed) {
  const auto c = modem::build_constellation(scheme);
  Rng bit_rng(derive_seed(seed, 0));
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(u) * c.bits_per_symbol);
  for (auto& bv : bits) bv = bit_rng.bit() ? 1 : 0;
  const auto s = modem::map_bits(bits, c);
  VectorXcd sv(u);
  for (int i = 0; i < u; ++i) sv(i) = s[static_cast<std::size_t>(i)];
  const MatrixXcd h = channel::gen_channel(b, u, derive_seed(seed, 1));
  const VectorXcd n = channel::gen_noise(b, n0, derive_seed(seed, 2));
  return {h, h * sv + n};
}

}  // namespace

bool self_check(std::ostream& os) {
  CheckRunner run{os};

  // Constellation invariants for every scheme.
  for (auto scheme : {modem::Scheme::kBpsk, modem::Scheme::kQpsk, modem::Scheme::kQam16,
                      modem::Scheme::kQam64}) {
    const auto c = modem::build_constellation(scheme);
    double power = 0.0;
    for (const auto& p : c.points) power += std::norm(p);
    power /= static_cast<double>(c.points.size());
    const bool sized = c.points.size() == (std::size_t{1} << c.bits_per_symbol);
    run.check((std::string("constellation ") + modem::scheme_name(scheme)).c_str(),
              sized && std::abs(power - 1.0) < 1e-12,
              "mean power " + format_double(power));
  }

  // Bit round trip through map -> detect-free slicing.
  {
    const auto c = modem::build_constellation(modem::Scheme::kQam64);
    Rng rng(7);
    bool ok = true;
    std::vector<std::uint8_t> bits(6 * 50);
    for (auto& bv : bits) bv = rng.bit() ? 1 : 0;
    const auto symbols = modem::map_bits(bits, c);
    for (std::size_t i = 0; i < symbols.size() && ok; ++i) {
      const int idx = modem::slice_index(symbols[i], c);
      for (int b = 0; b < 6; ++b) {
        const std::uint8_t want = bits[i * 6 + static_cast<std::size_t>(b)];
        const std::uint8_t got = static_cast<std::uint8_t>((idx >> (5 - b)) & 1);
        if (want != got) ok = false;
      }
    }
    run.check("qam64 map/slice round trip", ok);
  }

  // Projection properties.
  {
    const auto c = modem::build_constellation(modem::Scheme::kQam16);
    Rng rng(11);
    bool ok = true;
    for (int t = 0; t < 200 && ok; ++t) {
      const modem::cplx w(6.0 * (rng.uniform() - 0.5), 6.0 * (rng.uniform() - 0.5));
      const auto p1 = modem::project_box(w, c);
      ok = ok && modem::project_box(p1, c) == p1;
      ok = ok && std::abs(p1.real()) <= c.box_radius && std::abs(p1.imag()) <= c.box_radius;
    }
    run.check("box projection idempotent and inside", ok);
  }

  // OCD == CD, residual identity, monotone descent.
  {
    const auto c = modem::build_constellation(modem::Scheme::kQam16);
    bool equiv_ok = true;
    bool residual_ok = true;
    bool descent_ok = true;
    for (auto mode : {detect::Mode::kMmse, detect::Mode::kBox}) {
      for (int t = 0; t < 4; ++t) {
        const double n0 = 0.05;
        const auto [h, y] =
            random_instance(16, 4, n0, modem::Scheme::kQam16, 100 + static_cast<unsigned>(t));
        const auto z_cd = detect::cd_reference(h, y, n0, mode, 3, c);
        const auto prep = detect::ocd_preprocess(h, mode, n0);
        double prev_obj = detect::objective_value(h, y, VectorXcd::Zero(4), mode, n0, c);
        auto observer = [&](int, int, const VectorXcd& z, const VectorXcd& r) {
          const VectorXcd scratch = y - h * z;
          if ((r - scratch).norm() > tol::kResidualIdentityRel * y.norm()) {
            residual_ok = false;
          }
          const double obj = detect::objective_value(h, y, z, mode, n0, c);
          if (obj > prev_obj + tol::kDescentSlackRel * std::max(1.0, std::abs(prev_obj))) {
            descent_ok = false;
          }
          prev_obj = obj;
        };
        const auto res = detect::ocd_equalize(h, y, prep, mode, 3, c, observer);
        for (int i = 0; i < 4; ++i) {
          const double rel =
              std::abs(res.z(i) - z_cd(i)) / std::max(std::abs(z_cd(i)), 1e-12);
          if (rel > tol::kOcdCdEquivalenceRel) equiv_ok = false;
        }
      }
    }
    run.check("ocd matches naive cd", equiv_ok);
    run.check("maintained residual matches y - Hz", residual_ok);
    run.check("objective non-increasing per update", descent_ok);
  }

  // Convergence to the closed form.
  {
    const auto c = modem::build_constellation(modem::Scheme::kQam64);
    const double n0 = channel::n0_from_ebn0(10.0, 6, 4, 64);
    const auto [h, y] = random_instance(64, 4, n0, modem::Scheme::kQam64, 42);
    const auto exact = detect::mmse_exact(h, y, n0, c);
    const auto got = detect::ocd_detect(h, y, n0, detect::Mode::kMmse, 30, c);
    const double rel = (got.z - exact.z).norm() / exact.z.norm();
    run.check("ocd-mmse converges to closed form", rel < tol::kConvergenceRel,
              "rel err " + format_double(rel));
  }

  // Multiplication counts.
  {
    const bool formulas = detect::multiplication_count_cd(128, 8, 1) == 32784ull &&
                          detect::multiplication_count_ocd(128, 8, 1) == 8224ull;
    const auto c = modem::build_constellation(modem::Scheme::kQpsk);
    const auto [h, y] = random_instance(32, 4, 0.1, modem::Scheme::kQpsk, 3);
    const auto prep = detect::ocd_preprocess(h, detect::Mode::kMmse, 0.1);
    const auto res = detect::ocd_equalize(h, y, prep, detect::Mode::kMmse, 5, c);
    run.check("multiplication counts",
              formulas && res.mult_count == detect::multiplication_count_ocd(32, 4, 5));
  }

  // Reciprocal LUT exhaustive bound.
  {
    const auto& lut = fxp::default_lut();
    double max_rel = 0.0;
    for (int k = 0; k < fxp::ReciprocalLut::kEntryCount; ++k) {
      const double e = lut.entry_value(k);
      const double x_lo = static_cast<double>(2048 + k) / 4096.0;
      const double x_hi = static_cast<double>(2048 + k + 1) / 4096.0;
      max_rel = std::max({max_rel, std::abs(e * x_lo - 1.0), std::abs(e * x_hi - 1.0)});
    }
    run.check("reciprocal lut error bound", max_rel <= 2.4534e-4,
              "max rel err " + format_double(max_rel));
  }

  // Latency model.
  {
    const bool ok = fxp::latency_cycles(3, 8, 27) == 795 &&
                    std::abs(fxp::latency_seconds(795, 258e6) - 3.08e-6) < 0.01e-6;
    run.check("latency model", ok);
  }

  return run.all_ok;
}

}  // namespace ocd::sim
