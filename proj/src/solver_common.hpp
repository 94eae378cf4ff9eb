#pragma once

#include <chrono>
#include <cmath>
#include <numbers>
#include <string>

#include "cfmimo/trace.hpp"
#include "cfmimo/wmmse.hpp"

namespace cfmimo::detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

inline int total_streams(const StreamCounts& d) {
  int s = 0;
  for (std::size_t i = 0; i < d.rows(); ++i) {
    for (std::size_t k = 0; k < d.cols(); ++k) s += d(i, k);
  }
  return s;
}

/// Appends one state to the trace and enforces finiteness and the budgets.
inline void record_state(SolveTrace& trace, double wsr_nats, std::vector<double> powers,
                         const SystemParams& params, int streams) {
  trace.wsr_bits.push_back(wsr_nats / std::numbers::ln2);
  trace.ap_power.push_back(std::move(powers));
  trace.total_streams.push_back(streams);
  if (!std::isfinite(wsr_nats)) throw SolverError("non-finite weighted sum rate", trace);
  const auto& p = trace.ap_power.back();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > params.power_budget[i] * (1.0 + 1e-8)) {
      throw SolverError("AP " + std::to_string(i) + " exceeds its power budget", trace);
    }
  }
}

inline bool converged(const SolveTrace& trace, double rel_tol) {
  const auto& f = trace.wsr_bits;
  if (f.size() < 2) return false;
  const double prev = f[f.size() - 2];
  const double cur = f.back();
  return std::abs(cur - prev) <= rel_tol * std::max(std::abs(prev), 1e-300);
}

}  // namespace cfmimo::detail
