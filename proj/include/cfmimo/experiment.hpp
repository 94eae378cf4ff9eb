#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cfmimo/network.hpp"
#include "cfmimo/streams.hpp"
#include "cfmimo/trace.hpp"
#include "cfmimo/wmmse.hpp"

namespace cfmimo {

struct ExperimentSpec {
  NetworkConfig base;
  std::vector<double> snr_db;        // empty: base.snr_db only
  std::vector<int> tx_antennas;      // M sweep; empty: base value
  std::vector<int> num_ues;          // K sweep; empty: base value
  int trials = 1;
  std::vector<Algorithm> algorithms{Algorithm::kLocalEzf};
  SolverOptions solver;
  /// Fixed-stream solvers use this many streams on every serving pair; when
  /// unset, N_k is split evenly over the serving APs.
  std::optional<int> streams_per_link;
  /// Stream-allocating solvers start from every serving pair offering N_k
  /// streams and run this many sweeps before the first stream step.
  int lsa_warmup_sweeps = 100;
  /// Measure wall time.  When false every timing column is written as 0 so
  /// that reruns reproduce the data files byte for byte.
  bool timing = false;
  bool write_trace = false;
  std::optional<std::filesystem::path> load_channels;
  std::optional<std::filesystem::path> dump_channels;
  std::filesystem::path out = "results.csv";

  void validate() const;
};

/// One CSV row.
struct ResultRow {
  int trial = 0;
  Algorithm algorithm = Algorithm::kLocalEzf;
  double snr_db = 0.0;
  int m = 0, k = 0, n = 0, l = 0;
  int iters = 0;
  double wsr_bits = 0.0;
  double sum_power_watts = 0.0;
  double max_ap_power_ratio = 0.0;
  double interaction_scalars = 0.0;  // mean over APs
  double wall_ms = 0.0;
  int streams_total = 0;
  std::string status;                // ok | max_iters | numeric_error
  SolveTrace trace;                  // kept for trace files and scaling fits
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
};

/// Runs every (axis point, trial, algorithm) and returns the rows in that
/// order.  Trial t uses seed base.rng_seed XOR t.  Numeric failures are
/// recorded in the status column and the run continues.
ExperimentResult run_experiment(const ExperimentSpec& spec);

/// Writes <out>, <out>.summary.csv and, when requested, <out>.trace.csv.
void write_results(const ExperimentSpec& spec, const ExperimentResult& result);

void write_rows_csv(std::ostream& os, const std::vector<ResultRow>& rows);
void write_summary_csv(std::ostream& os, const std::vector<ResultRow>& rows);
void write_trace_csv(std::ostream& os, const std::vector<ResultRow>& rows);

/// Least-squares slope of log(time) against log(M).  Throws
/// std::invalid_argument with fewer than three distinct M values or
/// non-positive entries.
double scaling_fit(const std::vector<std::pair<double, double>>& m_and_time);

/// Median per-sweep time of one run, excluding the first (warm-up) sweep.
double median_sweep_seconds(const SolveTrace& trace);

/// Per-algorithm exponents from rows of an M sweep: per-trial medians, then
/// the median over trials at each M.
std::vector<std::pair<Algorithm, double>> scaling_exponents(const std::vector<ResultRow>& rows);

/// key = value lines ('#' starts a comment).  Keys: num_aps, num_ues,
/// tx_antennas, rx_antennas (one value or a comma list), cluster_size,
/// power_budget, rate_weights, snr_db, rng_seed, d_lo_km, d_hi_km,
/// noise_normalization (serving_concat | per_ap).  Unknown keys throw.
NetworkConfig parse_config(std::istream& is, NetworkConfig base);

/// Benchmark defaults: I = 4, K = 8, M = 64, N = 4, L = 2, P_max = 1 W, unit
/// weights, SNR 0 dB.
NetworkConfig default_config();

}  // namespace cfmimo
