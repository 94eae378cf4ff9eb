#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cfmimo/wmmse.hpp"

namespace cfmimo {

/// P_{i,k} = Hbar_i^H X_{i,k} for every pair.
Beamformer expand(const ChannelSet& channels, const LowDimBeamformer& x);

/// Receive filters evaluated from Gram products only; equal to update_u of the
/// expansion.
std::vector<CMat> update_u_lowdim(const ChannelSet& channels, const LowDimBeamformer& x);
std::vector<CMat> update_w_lowdim(const ChannelSet& channels, const LowDimBeamformer& x,
                                  const std::vector<CMat>& u);

struct LowDimUpdate {
  LowDimBeamformer x;
  std::vector<double> multipliers;  // lambda_i
  int large_factorizations = 0;     // always 0: only sum-N sized systems are factored
  int small_factorizations = 0;
};

/// Per-AP Gram-space transmit update with the power multiplier found by
/// bisection on Tr(X^H G_i X).
LowDimUpdate update_x(const ChannelSet& channels, const MmseAux& aux,
                      const StreamCounts& streams, const SystemParams& params,
                      const SolverOptions& opts = {});

/// RWMMSE block coordinate descent started from `init`; stream counts are the
/// column counts of `init`.
std::pair<LowDimBeamformer, SolveTrace> solve_rwmmse(const ChannelSet& channels,
                                                     const SystemParams& params,
                                                     const LowDimBeamformer& init,
                                                     const SolverOptions& opts = {});

struct CrosscheckReport {
  std::vector<CMat> x;          // per-AP stacks, sum N x S_i
  double max_abs_error = 0.0;   // max |Hbar_i^H X_i - P_i| over all entries
  bool ok = false;
  std::string message;
};

/// Rebuilds the centralized transmit update from the block-diagonal stacks of
/// U, W and the weights, X_i = U (Omega U^H G_i U + mu_i W^{-1})^{-1} Omega Xi_i^H,
/// and compares its expansion with update_p_fixed at the same multipliers.
CrosscheckReport wmmse_lowdim_crosscheck(const ChannelSet& channels, const MmseAux& aux,
                                         const StreamCounts& streams,
                                         const SystemParams& params,
                                         const std::vector<double>& mu, double tol = 1e-8);

}  // namespace cfmimo
