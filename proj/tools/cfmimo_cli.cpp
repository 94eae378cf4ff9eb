// Monte Carlo driver for the cell-free beamforming solvers.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cfmimo/experiment.hpp"

namespace {

int run(int argc, char** argv) {
  CLI::App app{"Weighted sum-rate beamforming for user-centric cell-free MIMO"};

  std::string config_path;
  std::vector<std::string> algo_tags;
  std::vector<double> snrs;
  std::vector<int> sweep_m, sweep_k;
  int trials = 1;
  std::uint64_t seed = 1;
  int max_iters = 500;
  double tol = 1e-6;
  int streams = 0;
  int warmup = 100;
  std::string dump_path, load_path, out_path = "results.csv";
  bool trace = false, timing = false, fit = false;

  app.add_option("--config", config_path, "key=value network description")->check(CLI::ExistingFile);
  app.add_option("--algo", algo_tags, "ezf | wmmse | rwmmse | rwmmse-lsa | rwmmse-lus (repeatable)")
      ->delimiter(',');
  app.add_option("--snr", snrs, "SNR values in dB")->delimiter(',');
  app.add_option("--sweep-m", sweep_m, "transmit antenna counts to sweep")->delimiter(',');
  app.add_option("--sweep-k", sweep_k, "UE counts to sweep")->delimiter(',');
  app.add_option("--trials", trials, "channel realizations per axis point")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "base seed; trial t uses seed XOR t");
  app.add_option("--max-iters", max_iters, "BCD sweep limit")->check(CLI::PositiveNumber);
  app.add_option("--tol", tol, "relative WSR change that ends a solve")->check(CLI::PositiveNumber);
  app.add_option("--streams", streams,
                 "streams per serving link for fixed-stream solvers (0: split N evenly)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--lsa-warmup", warmup, "sweeps before the first stream step")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--dump-channels", dump_path, "write the first realization to this file");
  app.add_option("--load-channels", load_path, "solve a stored realization")->check(CLI::ExistingFile);
  app.add_option("--out", out_path, "result CSV path");
  app.add_flag("--trace", trace, "also write per-iteration rows to <out>.trace.csv");
  app.add_flag("--timing", timing, "record wall time (rows are then not byte-reproducible)");
  app.add_flag("--fit-scaling", fit, "fit per-sweep time against M into <out>.scaling.csv");

  CLI11_PARSE(app, argc, argv);

  cfmimo::ExperimentSpec spec;
  spec.base = cfmimo::default_config();
  if (!config_path.empty()) {
    std::ifstream f(config_path);
    spec.base = cfmimo::parse_config(f, spec.base);
  }
  spec.base.rng_seed = seed;
  spec.snr_db = snrs;
  spec.tx_antennas = sweep_m;
  spec.num_ues = sweep_k;
  spec.trials = trials;
  spec.algorithms.clear();
  for (const auto& tag : algo_tags) spec.algorithms.push_back(cfmimo::parse_algorithm(tag));
  if (spec.algorithms.empty()) spec.algorithms.push_back(cfmimo::Algorithm::kLocalEzf);
  spec.solver.max_iters = max_iters;
  spec.solver.rel_tol = tol;
  if (streams > 0) spec.streams_per_link = streams;
  spec.lsa_warmup_sweeps = std::min(warmup, max_iters - 1);
  spec.timing = timing || fit;
  spec.write_trace = trace;
  if (!dump_path.empty()) spec.dump_channels = dump_path;
  if (!load_path.empty()) spec.load_channels = load_path;
  spec.out = out_path;

  const auto result = cfmimo::run_experiment(spec);
  cfmimo::write_results(spec, result);

  if (fit) {
    std::ofstream f(out_path + ".scaling.csv", std::ios::trunc);
    f << "algo,exponent\n";
    for (const auto& [algo, exponent] : cfmimo::scaling_exponents(result.rows)) {
      f << cfmimo::to_string(algo) << ',' << exponent << '\n';
      std::cout << cfmimo::to_string(algo) << " time ~ M^" << exponent << '\n';
    }
  }
  std::size_t failures = 0;
  for (const auto& r : result.rows) failures += r.status == "numeric_error";
  std::cout << result.rows.size() << " rows written to " << out_path;
  if (failures) std::cout << " (" << failures << " numeric failures)";
  std::cout << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "cfmimo: " << e.what() << '\n';
    return 1;
  }
}
