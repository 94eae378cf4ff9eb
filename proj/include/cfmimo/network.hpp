#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cfmimo/rng.hpp"
#include "cfmimo/types.hpp"

namespace cfmimo {

/// How the common noise power normalizes ||H_k||_F^2 before the geometric mean.
enum class NoiseNormalization {
  kServingConcat,  // divide by N_k * M^k (M^k summed over the serving cluster)
  kPerAp,          // divide by N_k * M_i, M_i averaged over the serving cluster
};

struct NetworkConfig {
  int num_aps = 4;
  int num_ues = 8;
  std::vector<int> tx_antennas;       // M_i, one per AP
  std::vector<int> rx_antennas;       // N_k, one per UE
  int cluster_size = 2;               // L
  std::vector<double> power_budget;   // P_max,i [W]
  std::vector<double> rate_weights;   // alpha_k
  double snr_db = 0.0;
  std::uint64_t rng_seed = 1;
  double d_lo_km = 0.1;
  double d_hi_km = 0.3;
  NoiseNormalization noise_normalization = NoiseNormalization::kServingConcat;

  /// Homogeneous network: every AP has `m` antennas and budget `p_max`, every
  /// UE has `n` antennas and unit weight.
  static NetworkConfig uniform(int aps, int ues, int m, int n, int cluster,
                               double p_max = 1.0, double snr_db = 0.0,
                               std::uint64_t seed = 1);

  /// Throws std::invalid_argument on any violated invariant.
  void validate() const;

  SystemParams system_params() const { return {rate_weights, power_budget}; }
};

struct Topology {
  RMat distances_km;                          // I x K
  std::vector<std::vector<int>> serving_sets;  // I_k, ascending AP index
  std::vector<std::vector<int>> served_sets;   // U_i, ascending UE index
};

/// Serving sets are the `cluster_size` nearest APs per UE (ties go to the
/// lower AP index), stored in ascending AP order.
Topology topology_from_distances(const RMat& distances_km, int cluster_size);

/// Rebuilds the served sets from explicit serving sets.
Topology topology_with_serving_sets(const RMat& distances_km,
                                    std::vector<std::vector<int>> serving_sets);

/// All channel matrices of one network realization plus cached stacks.
///
/// Channels exist for every (AP, UE) pair, serving or not.  The cached
/// quantities are H_k (serving concatenation), Hbar_i (all-UE stack of AP i)
/// and the Gram matrix G_i = Hbar_i Hbar_i^H together with its eigenbasis.
class ChannelSet {
 public:
  ChannelSet() = default;
  ChannelSet(PairGrid<CMat> channels, std::vector<std::vector<int>> serving_sets);

  int num_aps() const { return static_cast<int>(channels_.rows()); }
  int num_ues() const { return static_cast<int>(channels_.cols()); }
  int tx_antennas(int i) const { return static_cast<int>(channels_(i, 0).cols()); }
  int rx_antennas(int k) const { return static_cast<int>(channels_(0, k).rows()); }
  std::vector<int> tx_antenna_counts() const;
  std::vector<int> rx_antenna_counts() const;
  /// sum_k N_k, the row dimension of every Hbar_i.
  int total_rx() const { return total_rx_; }
  /// First row of UE k inside Hbar_i.
  int ue_offset(int k) const { return ue_offset_[k]; }

  const CMat& channel(int i, int k) const { return channels_(i, k); }
  const PairGrid<CMat>& channels() const { return channels_; }
  const CMat& serving_concat(int k) const { return serving_concat_[k]; }
  const CMat& stacked(int i) const { return stacked_[i]; }
  const CMat& gram(int i) const { return gram_[i]; }

  /// Retained eigenpairs of G_i: G_i = basis * diag(eigvals) * basis^H, with
  /// eigenvalues below 1e-12 of the largest dropped.
  const CMat& gram_basis(int i) const { return gram_basis_[i]; }
  const RVec& gram_eigvals(int i) const { return gram_eigvals_[i]; }

  const std::vector<int>& serving_aps(int k) const { return serving_sets_[k]; }
  const std::vector<int>& served_ues(int i) const { return served_sets_[i]; }
  const std::vector<std::vector<int>>& serving_sets() const { return serving_sets_; }
  bool serves(int i, int k) const;

  bool has_noise() const { return !noise_.empty(); }
  /// sigma_k^2; throws StateError before set_noise_powers.
  double noise_power(int k) const;
  const std::vector<double>& noise_powers() const;
  void set_noise_powers(std::vector<double> sigma2);

  /// Same channels and noise, different clusters.
  ChannelSet with_serving_sets(std::vector<std::vector<int>> serving_sets) const;

 private:
  PairGrid<CMat> channels_;
  std::vector<std::vector<int>> serving_sets_;
  std::vector<std::vector<int>> served_sets_;
  std::vector<int> ue_offset_;
  int total_rx_ = 0;
  std::vector<CMat> serving_concat_;
  std::vector<CMat> stacked_;
  std::vector<CMat> gram_;
  std::vector<CMat> gram_basis_;
  std::vector<RVec> gram_eigvals_;
  std::vector<double> noise_;
};

/// 128.1 + 37.6 log10(d), d in kilometres.
double pathloss_db(double d_km);

/// Amplitude gain 10^(-PL(d)/20).
double amplitude_gain(double d_km);

/// Distances i.i.d. uniform on [d_lo, d_hi] drawn AP-major.
Topology place_network(const NetworkConfig& config, Rng& rng);

/// Rayleigh channels scaled by the pathloss amplitude.  Entries are drawn in
/// (i ascending, k ascending, row-major) order.  Noise powers are left unset.
ChannelSet draw_channels(const Topology& topology, const NetworkConfig& config,
                         Rng& rng);

/// Common noise power from the geometric mean of per-entry serving gains.
std::vector<double> noise_power(const ChannelSet& channels, double snr_db,
                                NoiseNormalization mode = NoiseNormalization::kServingConcat);

/// Topology, channels and noise for one seed, in that order of RNG use.
struct Scenario {
  Topology topology;
  ChannelSet channels;
};
Scenario generate_scenario(const NetworkConfig& config);

/// Distances implied by mean per-entry channel gain, for channel sets that
/// were loaded without geometry.
RMat effective_distances(const ChannelSet& channels);

}  // namespace cfmimo
