#pragma once

#include <span>
#include <vector>

#include "cfmimo/rng.hpp"
#include "cfmimo/rwmmse.hpp"

namespace cfmimo {

/// Binary stream indicators: bit m of pair (i, k) says whether AP i carries
/// UE k's candidate stream m (m < N_k).  Bits of non-serving pairs stay clear.
class StreamAllocation {
 public:
  StreamAllocation() = default;
  /// All bits clear.
  StreamAllocation(int num_aps, std::vector<int> rx_antennas);

  int num_aps() const { return static_cast<int>(bits_.rows()); }
  int num_ues() const { return static_cast<int>(bits_.cols()); }
  int rx_antennas(int k) const { return static_cast<int>(bits_(0, k).size()); }

  bool bit(int i, int k, int m) const { return bits_(i, k)[m]; }
  void set(int i, int k, int m, bool on = true) { bits_(i, k)[m] = on; }

  /// Indices of set bits of pair (i, k), ascending.
  std::vector<int> active(int i, int k) const;
  /// D_{i,k}.
  int count(int i, int k) const;
  /// D^k = sum_i D_{i,k}.
  int ue_total(int k) const;
  StreamCounts counts() const;
  int total() const;

  bool operator==(const StreamAllocation&) const = default;

 private:
  PairGrid<std::vector<bool>> bits_;
};

/// Deterministic start: UE k's N_k streams split as evenly as possible over
/// its serving APs, the remainder going to the nearest ones (ties to the
/// lower AP index).  AP i carries candidate streams 0..D_{i,k}-1.
StreamAllocation init_allocation(const ChannelSet& channels, const RMat& distances_km);

/// Seeded random start: N_k of the |I_k| N_k candidate slots of each UE,
/// chosen uniformly.
StreamAllocation random_allocation(const ChannelSet& channels, Rng& rng);

/// Every serving pair carries exactly `per_link` streams (bits 0..per_link-1).
StreamAllocation uniform_allocation(const ChannelSet& channels, int per_link);

/// Every serving pair offers all N_k candidate streams.  Exceeds the
/// receive-stream limit whenever |I_k| > 1; the first stream step of the
/// allocating solver restores it.
StreamAllocation full_allocation(const ChannelSet& channels);

/// Throws std::invalid_argument when bits are set off the serving pairs or
/// when `enforce_limit` and some D^k exceeds N_k.
void check_allocation(const ChannelSet& channels, const StreamAllocation& alloc,
                      bool enforce_limit = true);

/// Fixed-width form: N_k columns per serving pair with zero columns at clear
/// bits.  `compact` holds only the active columns in bit order.
LowDimBeamformer to_virtual(const ChannelSet& channels, const LowDimBeamformer& compact,
                            const StreamAllocation& alloc);
LowDimBeamformer to_compact(const LowDimBeamformer& virt, const StreamAllocation& alloc);

/// Masked transmit update in fixed-width form: the closed-form Gram-space
/// update restricted to the set bits, with exact zero columns elsewhere.
/// `aux` must match the active streams of `alloc`.
LowDimBeamformer update_x_streams(const ChannelSet& channels, const MmseAux& aux,
                                  const StreamAllocation& alloc, const SystemParams& params,
                                  const SolverOptions& opts = {});

/// Per-UE linear coefficients of the MSE objective in the stream indicators,
///   psi_{i,k,m} = sum_l alpha_l p^H H_{i,l}^H A_l H_{i,l} p
///                 - 2 alpha_k Re[W_k U_k^H H_{i,k} p]_{row of stream m},
/// with p the m-th column of AP i's beam for UE k.  Entry index is
/// (position of i in I_k) * N_k + m; clear bits give exactly 0.
/// `x` is in compact form matching `alloc`.
std::vector<RVec> compute_psi(const ChannelSet& channels, const LowDimBeamformer& x,
                              const MmseAux& aux, const StreamAllocation& alloc,
                              const std::vector<double>& weights);

/// Keeps, per UE, the up-to-N_k smallest strictly negative entries (values in
/// [-1e-12, 0) count as zero; ties go to the lower index).  Returns one flag
/// vector per UE in the indexing of compute_psi.
std::vector<std::vector<bool>> update_l(const std::vector<RVec>& psi,
                                        std::span<const int> max_streams);

/// Maps per-UE flags in compute_psi indexing back to an allocation.
StreamAllocation allocation_from_flags(const ChannelSet& channels,
                                       const std::vector<std::vector<bool>>& flags);

struct LsaOptions {
  /// When false the stream step is skipped and the solver reduces to RWMMSE
  /// on the initial allocation.
  bool allocate_streams = true;
  /// Sweeps run on the initial allocation before the first stream step.
  int warmup_sweeps = 0;
};

struct LsaResult {
  LowDimBeamformer x;  // compact form
  StreamAllocation alloc;
  SolveTrace trace;
};

/// Joint beamforming and stream allocation.  `init_x` may be given in compact
/// or fixed-width form.  Each sweep updates U, W, X and then the indicators;
/// stream sets only shrink, and the budgets are checked after every sweep
/// without any re-projection.
LsaResult solve_rwmmse_lsa(const ChannelSet& channels, const SystemParams& params,
                           const StreamAllocation& init_alloc,
                           const LowDimBeamformer& init_x, const SolverOptions& opts = {},
                           const LsaOptions& lsa = {});

struct LusResult {
  ChannelSet channels;  // every AP a candidate for every UE
  LowDimBeamformer x;
  StreamAllocation alloc;
  std::vector<std::vector<int>> serving_sets;  // APs left with at least one stream
  SolveTrace trace;
};

/// Linear user scheduling: the stream-allocating solver run with every AP in
/// every cluster, started from local EZF on the full candidate allocation.  Noise powers
/// are kept from `channels`.
LusResult solve_rwmmse_lus(const ChannelSet& channels, const SystemParams& params,
                           const SolverOptions& opts = {}, const LsaOptions& lsa = {});

}  // namespace cfmimo
