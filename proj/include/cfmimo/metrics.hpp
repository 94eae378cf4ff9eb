#pragma once

#include <span>
#include <vector>

#include "cfmimo/network.hpp"
#include "cfmimo/trace.hpp"
#include "cfmimo/types.hpp"

namespace cfmimo {

/// N_k = sum_{l != k} sum_{j in I_l} H_{j,k} P_{j,l} P_{j,l}^H H_{j,k}^H + sigma_k^2 I.
CMat interference_plus_noise(int k, const ChannelSet& channels, const Beamformer& bf);

/// R_k in bits/s/Hz.
double ue_rate(int k, const ChannelSet& channels, const Beamformer& bf);

/// sum_k alpha_k R_k in bits/s/Hz.
double weighted_sum_rate(const ChannelSet& channels, const Beamformer& bf,
                         std::span<const double> weights);

/// Same quantity evaluated entirely from Gram matrices (H_{i,k} P_{i,l} = G_i[k,:] X_{i,l}).
double weighted_sum_rate(const ChannelSet& channels, const LowDimBeamformer& x,
                         std::span<const double> weights);

/// sum_{k in U_i} ||P_{i,k}||_F^2.
double ap_power(int i, const Beamformer& bf);

/// Tr(X^H G_i X) summed over UEs; equals ap_power of the expansion.
double ap_power(int i, const ChannelSet& channels, const LowDimBeamformer& x);

std::vector<double> ap_powers(const Beamformer& bf);
std::vector<double> ap_powers(const ChannelSet& channels, const LowDimBeamformer& x);

/// Complex scalars exchanged between each AP and its CU per solve.
///   local EZF : 0
///   WMMSE     : (sum_k N_k + sum_{k in U_i} D_{i,k}) M_i
///   RWMMSE    : (sum_k N_k / 2 + sum_{k in U_i} D_{i,k}) sum_k N_k
/// The stream-allocating variants exchange the same quantities as RWMMSE.
/// Values are integers or half-integers and exact in double precision.
std::vector<double> interaction_count(Algorithm algo, std::span<const int> tx_antennas,
                                      std::span<const int> rx_antennas,
                                      const StreamCounts& streams);

namespace detail {

/// eff(j, l) = H_{j,*} P_{j,l}: the (sum N) x D_{j,l} image of AP j's beam for
/// UE l at every receiver.  Rows of UE k give H_{j,k} P_{j,l}.
using EffectiveLinks = PairGrid<CMat>;

EffectiveLinks effective_links(const ChannelSet& channels, const Beamformer& bf);
EffectiveLinks effective_links(const ChannelSet& channels, const LowDimBeamformer& x);

CMat interference_plus_noise(int k, const ChannelSet& channels, const EffectiveLinks& eff);

/// H_k P_k (N_k x D^k), columns stacked over I_k in ascending AP order.
CMat desired_link(int k, const ChannelSet& channels, const EffectiveLinks& eff);

/// Rate of UE k in nats.
double rate_nats(int k, const ChannelSet& channels, const EffectiveLinks& eff);

/// sum_k alpha_k R_k in nats.
double wsr_nats(const ChannelSet& channels, const EffectiveLinks& eff,
                std::span<const double> weights);

/// Column offset of AP i's block inside UE k's stacked stream index.
int stream_offset(const StreamCounts& streams, int i, int k);

/// log det of a Hermitian positive definite matrix; throws NumericError otherwise.
double logdet_hpd(const CMat& a);

inline CMat hermitian_part(const CMat& a) { return 0.5 * (a + a.adjoint()); }

}  // namespace detail

}  // namespace cfmimo
