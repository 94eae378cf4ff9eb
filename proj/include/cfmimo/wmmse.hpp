#pragma once

#include <utility>
#include <vector>

#include "cfmimo/metrics.hpp"
#include "cfmimo/network.hpp"
#include "cfmimo/spectral.hpp"
#include "cfmimo/trace.hpp"
#include "cfmimo/types.hpp"

namespace cfmimo {

struct SolverOptions {
  int max_iters = 500;
  double rel_tol = 1e-6;
  /// Relative slack of the active power constraint accepted by the bisection.
  double bisect_tol = 1e-12;
  /// Eigenvalues of a beamformer system at or below ridge_eps * lambda_max are
  /// treated as exact zeros (minimum-norm solution at a zero multiplier).
  double ridge_eps = 1e-12;

  void validate() const;
};

/// Receive filters U_k (N_k x D^k) and MSE weights W_k (D^k x D^k).
struct MmseAux {
  std::vector<CMat> u;
  std::vector<CMat> w;
};

/// U_k = (N_k + H_k P_k P_k^H H_k^H)^{-1} H_k P_k.
std::vector<CMat> update_u(const ChannelSet& channels, const Beamformer& bf);

/// W_k = (I - U_k^H H_k P_k)^{-1}, symmetrized.  Throws NumericError when the
/// MSE matrix is singular.
std::vector<CMat> update_w(const ChannelSet& channels, const Beamformer& bf,
                           const std::vector<CMat>& u);

struct BeamformerUpdate {
  Beamformer bf;
  std::vector<double> multipliers;  // mu_i
  int large_factorizations = 0;
};

/// Per-AP closed-form transmit update with the power multiplier found by
/// bisection.  `streams` fixes D_{i,k} and must match the column split of U.
BeamformerUpdate update_p(const ChannelSet& channels, const MmseAux& aux,
                          const StreamCounts& streams, const SystemParams& params,
                          const SolverOptions& opts = {});

/// Same update with a caller-supplied multiplier per AP (no bisection).
Beamformer update_p_fixed(const ChannelSet& channels, const MmseAux& aux,
                          const StreamCounts& streams, const SystemParams& params,
                          const std::vector<double>& mu, const SolverOptions& opts = {});

/// Centralized WMMSE: U, W, P sweeps until the relative WSR change drops below
/// rel_tol or max_iters sweeps have run.  Stream counts are taken from `init`,
/// which must satisfy every AP budget.  Throws SolverError on a non-finite
/// objective or a budget violation.
std::pair<Beamformer, SolveTrace> solve_wmmse(const ChannelSet& channels,
                                              const SystemParams& params,
                                              const Beamformer& init,
                                              const SolverOptions& opts = {});

namespace detail {

std::vector<CMat> update_u(const ChannelSet& channels, const EffectiveLinks& eff);
std::vector<CMat> update_w(const ChannelSet& channels, const EffectiveLinks& eff,
                           const std::vector<CMat>& u);

/// blkdiag(alpha_l U_l W_l U_l^H) over all UEs, sum N x sum N.
CMat weighted_precision(const ChannelSet& channels, const MmseAux& aux,
                        const std::vector<double>& weights);

/// sum N x S_i stack whose UE-k rows hold alpha_k (U_k W_k) restricted to AP
/// i's stream block.  Columns run over UEs in ascending order.
CMat weighted_targets(const ChannelSet& channels, const MmseAux& aux,
                      const StreamCounts& streams, const std::vector<double>& weights, int i);

/// Splits the columns of a per-AP stack into per-UE blocks.
void scatter_columns(const CMat& stack, const StreamCounts& streams, int i, int rows,
                     PairGrid<CMat>& out);

/// Checks that weights and budgets match the channel set.
void check_params(const ChannelSet& channels, const SystemParams& params);

/// Checks that stream counts are zero off the serving pairs and fit N_k.
void check_streams(const ChannelSet& channels, const StreamCounts& streams);

}  // namespace detail
}  // namespace cfmimo
