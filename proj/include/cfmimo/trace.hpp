#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "cfmimo/types.hpp"

namespace cfmimo {

enum class Algorithm { kLocalEzf, kWmmse, kRwmmse, kRwmmseLsa, kRwmmseLus };

/// CLI spelling: ezf, wmmse, rwmmse, rwmmse-lsa, rwmmse-lus.
std::string_view to_string(Algorithm algo);
/// Accepts the CLI spelling plus "local-ezf"; throws std::invalid_argument.
Algorithm parse_algorithm(std::string_view tag);

/// Per-run record of a solver.  Index 0 of the per-iteration vectors is the
/// initial point; entry t > 0 is the state after sweep t.
struct SolveTrace {
  Algorithm algorithm = Algorithm::kWmmse;
  std::string init_tag;
  std::vector<double> wsr_bits;
  std::vector<std::vector<double>> ap_power;      // watts, per AP
  std::vector<std::vector<double>> multipliers;   // mu_i or lambda_i per sweep (t >= 1)
  std::vector<int> total_streams;                 // sum of D_{i,k}
  std::vector<double> interaction;                // complex scalars per AP, once per solve
  std::vector<double> sweep_seconds;              // wall time of sweep t (t >= 1)
  int large_factorizations = 0;                   // factorizations of M_i-sized matrices
  int small_factorizations = 0;
  bool converged = false;
  /// First index of wsr_bits from which the ascent contract applies.  Nonzero
  /// only when the start exceeds the receive-stream limit and the first
  /// stream step has to restore it.
  int ascent_from = 0;

  int iterations() const { return static_cast<int>(sweep_seconds.size()); }
  double final_wsr_bits() const { return wsr_bits.empty() ? 0.0 : wsr_bits.back(); }
};

/// NumericError carrying the trace up to the failing sweep.
class SolverError : public NumericError {
 public:
  SolverError(const std::string& what, SolveTrace trace)
      : NumericError(what), trace_(std::move(trace)) {}
  const SolveTrace& trace() const { return trace_; }

 private:
  SolveTrace trace_;
};

}  // namespace cfmimo
