// Command-line front end: Monte-Carlo sweeps (`simulate`), a fast property
// self-check (`verify`), and the per-iteration multiplication-count table
// (`count`). Exit codes: 0 success, 1 configuration error, 2 runtime error.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ocd/detect.hpp"
#include "ocd/sim.hpp"

namespace {

// "start:step:stop" (inclusive stop, positive step) or a single value.
std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) {
    std::size_t used = 0;
    parts.push_back(std::stod(item, &used));
    if (used != item.size()) throw std::invalid_argument("bad --ebn0 value: " + item);
  }
  if (parts.size() == 1) return parts;
  if (parts.size() != 3) {
    throw std::invalid_argument("--ebn0 expects <value> or <start:step:stop>");
  }
  const double start = parts[0], step = parts[1], stop = parts[2];
  if (!(step > 0.0) || stop < start) {
    throw std::invalid_argument("--ebn0 needs step > 0 and stop >= start");
  }
  std::vector<double> grid;
  for (int i = 0;; ++i) {
    const double v = start + step * i;
    if (v > stop + 1e-9) break;
    grid.push_back(v);
  }
  return grid;
}

ocd::fxp::FixedFormat parse_fxp(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw std::invalid_argument("--fxp expects <total_bits>:<frac_bits>");
  }
  ocd::fxp::FixedFormat fmt;
  fmt.total_bits = std::stoi(text.substr(0, colon));
  fmt.frac_bits = std::stoi(text.substr(colon + 1));
  fmt.validate();
  return fmt;
}

int run_simulate(const ocd::sim::SimConfig& cfg, const std::string& out_path) {
  const auto report = ocd::sim::run_sweep(cfg);
  ocd::sim::emit_csv(report, out_path);
  std::cerr << "wrote " << report.points.size() << " point(s) to " << out_path << "\n";
  return 0;
}

int run_count(int b, int u, int k) {
  std::printf("B=%d U=%d\n", b, u);
  std::printf("%4s %16s %16s %8s\n", "K", "cd_mults", "ocd_mults", "ratio");
  for (int kk = 1; kk <= k; ++kk) {
    const auto cd = ocd::detect::multiplication_count_cd(b, u, kk);
    const auto od = ocd::detect::multiplication_count_ocd(b, u, kk);
    std::printf("%4d %16llu %16llu %8.2f\n", kk, static_cast<unsigned long long>(cd),
                static_cast<unsigned long long>(od),
                static_cast<double>(cd) / static_cast<double>(od));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coordinate-descent MU-MIMO detection simulator"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "read options from a key=value file (simulate keys under [simulate])");

  // --- simulate ---
  auto* sim_cmd = app.add_subcommand("simulate", "run a Monte-Carlo Eb/N0 sweep");
  sim_cmd->fallthrough();  // lets --config appear after the subcommand name
  ocd::sim::SimConfig cfg;
  std::string mod_name = "qam64";
  std::string det_name = "ocd_box";
  std::string ebn0_text;
  std::string fxp_text;
  std::string out_path;
  sim_cmd->add_option("--b", cfg.b, "base-station antennas");
  sim_cmd->add_option("--u", cfg.u, "user antennas");
  sim_cmd->add_option("--mod", mod_name, "bpsk|qpsk|qam16|qam64");
  sim_cmd->add_option("--detector", det_name,
                      "exact_mmse|cd_mmse|cd_box|ocd_mmse|ocd_box|ocd_mmse_fxp|ocd_box_fxp");
  sim_cmd->add_option("--k", cfg.iterations, "iteration count K");
  sim_cmd->add_option("--ebn0", ebn0_text, "Eb/N0 grid in dB: value or start:step:stop");
  sim_cmd->add_option("--trials", cfg.trials_per_point, "trials per grid point");
  sim_cmd->add_option("--seed", cfg.master_seed, "master seed (64-bit)");
  sim_cmd->add_option("--fxp", fxp_text, "fixed-point format total:frac (default 16:11)");
  sim_cmd->add_option("--workers", cfg.workers, "worker threads");
  sim_cmd->add_option("--out", out_path, "output CSV path");

  // --- verify ---
  auto* verify_cmd = app.add_subcommand("verify", "run the fast property self-check");

  // --- count ---
  auto* count_cmd =
      app.add_subcommand("count", "print per-iteration multiplication counts");
  int count_b = 128, count_u = 8, count_k = 4;
  count_cmd->add_option("--b", count_b, "base-station antennas");
  count_cmd->add_option("--u", count_u, "user antennas");
  count_cmd->add_option("--k", count_k, "max iteration count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (sim_cmd->parsed()) {
      if (ebn0_text.empty()) throw std::invalid_argument("--ebn0 is required");
      if (out_path.empty()) throw std::invalid_argument("--out is required");
      cfg.scheme = ocd::modem::scheme_from_name(mod_name);
      cfg.detector = ocd::sim::detector_from_name(det_name);
      cfg.ebn0_grid_db = parse_grid(ebn0_text);
      if (!fxp_text.empty()) cfg.fxp_format = parse_fxp(fxp_text);
      cfg.validate();
      return run_simulate(cfg, out_path);
    }
    if (verify_cmd->parsed()) {
      return ocd::sim::self_check(std::cout) ? 0 : 2;
    }
    if (count_cmd->parsed()) {
      if (count_b < 1 || count_u < 1 || count_k < 1) {
        throw std::invalid_argument("count: B, U, K must be positive");
      }
      return run_count(count_b, count_u, count_k);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
