#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ocd/detect.hpp"
#include "ocd/fxp.hpp"
#include "ocd/modem.hpp"

namespace ocd::sim {

enum class Detector {
  kExactMmse,
  kCdMmse,
  kCdBox,
  kOcdMmse,
  kOcdBox,
  kOcdMmseFxp,
  kOcdBoxFxp,
};

const char* detector_name(Detector d);
Detector detector_from_name(const std::string& name);

struct SimConfig {
  int b = 128;
  int u = 8;
  modem::Scheme scheme = modem::Scheme::kQam64;
  Detector detector = Detector::kOcdBox;
  int iterations = 3;  // K
  std::vector<double> ebn0_grid_db;
  std::int64_t trials_per_point = 1000;
  std::uint64_t master_seed = 0;
  std::optional<fxp::FixedFormat> fxp_format;  // defaults to 16:11 for *_fxp
  int workers = 1;

  void validate() const;  // throws std::invalid_argument
};

struct TrialCounts {
  std::uint64_t bits = 0;
  std::uint64_t bit_errors = 0;
  std::uint64_t symbols = 0;
  std::uint64_t symbol_errors = 0;
  double dist_to_mmse = 0.0;       // ||z - z_mmse|| / ||z_mmse||
  std::uint64_t mult_count = 0;
};

struct PointResult {
  Detector detector;
  double ebn0_db = 0.0;
  int iterations = 0;
  std::uint64_t bits = 0;
  std::uint64_t bit_errors = 0;
  std::uint64_t symbols = 0;
  std::uint64_t symbol_errors = 0;
  double ber = 0.0;
  double ser = 0.0;
  double mean_dist_to_mmse = 0.0;
  double mean_mult_count = 0.0;
  double wall_seconds = 0.0;  // measured; the only non-reproducible field
};

struct SimReport {
  SimConfig config;
  std::vector<PointResult> points;
};

/// One Monte-Carlo trial at grid point `point_index`: draw bits, map, draw
/// H and n, detect, count bit errors from LLR signs and symbol errors from
/// slicing the gain-compensated estimates. The trial seed is
/// derive_seed(master_seed, point_index, trial_index), so trials are
/// reproducible and independent of scheduling.
TrialCounts run_trial(const SimConfig& cfg, std::size_t point_index,
                      std::int64_t trial_index);

/// Runs the whole grid. Trials are dispatched to `workers` threads and
/// reduced in trial order, so the report does not depend on the worker
/// count. Any trial failure aborts with (detector, ebn0, trial) context.
SimReport run_sweep(const SimConfig& cfg);

/// CSV with header detector,ebn0_db,K,bits,bit_errors,ber,symbols,
/// symbol_errors,ser,mean_dist_to_mmse,mean_mult_count,wall_seconds.
/// Floats carry 9 significant digits; lines end with LF.
void emit_csv(const SimReport& report, const std::filesystem::path& path);
void emit_csv(const SimReport& report, std::ostream& os);

/// Fast self-check subset of the property suite (backs the `verify`
/// subcommand). Prints one line per check; returns true when all pass.
bool self_check(std::ostream& os);

}  // namespace ocd::sim
