#include "cfmimo/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace cfmimo {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("NetworkConfig: " + what);
}

std::vector<std::vector<int>> invert_sets(const std::vector<std::vector<int>>& serving,
                                          int num_aps) {
  std::vector<std::vector<int>> served(num_aps);
  for (int k = 0; k < static_cast<int>(serving.size()); ++k) {
    for (int i : serving[k]) served[i].push_back(k);
  }
  return served;
}

}  // namespace

NetworkConfig NetworkConfig::uniform(int aps, int ues, int m, int n, int cluster,
                                     double p_max, double snr_db,
                                     std::uint64_t seed) {
  NetworkConfig c;
  c.num_aps = aps;
  c.num_ues = ues;
  c.tx_antennas.assign(aps, m);
  c.rx_antennas.assign(ues, n);
  c.cluster_size = cluster;
  c.power_budget.assign(aps, p_max);
  c.rate_weights.assign(ues, 1.0);
  c.snr_db = snr_db;
  c.rng_seed = seed;
  return c;
}

void NetworkConfig::validate() const {
  require(num_aps > 0, "num_aps must be positive");
  require(num_ues > 0, "num_ues must be positive");
  require(static_cast<int>(tx_antennas.size()) == num_aps, "tx_antennas size");
  require(static_cast<int>(rx_antennas.size()) == num_ues, "rx_antennas size");
  require(static_cast<int>(power_budget.size()) == num_aps, "power_budget size");
  require(static_cast<int>(rate_weights.size()) == num_ues, "rate_weights size");
  require(cluster_size >= 1 && cluster_size <= num_aps, "cluster_size must be in [1, num_aps]");
  for (int m : tx_antennas) require(m >= 1, "tx antenna counts must be >= 1");
  for (int n : rx_antennas) require(n >= 1, "rx antenna counts must be >= 1");
  for (double p : power_budget) require(p > 0.0, "power budgets must be positive");
  for (double a : rate_weights) require(a > 0.0, "rate weights must be positive");
  require(d_lo_km > 0.0 && d_lo_km <= d_hi_km, "distance range must satisfy 0 < lo <= hi");
}

Topology topology_from_distances(const RMat& distances_km, int cluster_size) {
  const int num_aps = static_cast<int>(distances_km.rows());
  const int num_ues = static_cast<int>(distances_km.cols());
  if (cluster_size < 1 || cluster_size > num_aps) {
    throw std::invalid_argument("cluster_size must be in [1, num_aps]");
  }
  std::vector<std::vector<int>> serving(num_ues);
  for (int k = 0; k < num_ues; ++k) {
    std::vector<int> order(num_aps);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return distances_km(a, k) < distances_km(b, k);
    });
    order.resize(cluster_size);
    std::sort(order.begin(), order.end());
    serving[k] = std::move(order);
  }
  return topology_with_serving_sets(distances_km, std::move(serving));
}

Topology topology_with_serving_sets(const RMat& distances_km,
                                    std::vector<std::vector<int>> serving_sets) {
  Topology t;
  t.distances_km = distances_km;
  for (auto& s : serving_sets) std::sort(s.begin(), s.end());
  t.served_sets = invert_sets(serving_sets, static_cast<int>(distances_km.rows()));
  t.serving_sets = std::move(serving_sets);
  return t;
}

ChannelSet::ChannelSet(PairGrid<CMat> channels, std::vector<std::vector<int>> serving_sets)
    : channels_(std::move(channels)), serving_sets_(std::move(serving_sets)) {
  const int num_aps = static_cast<int>(channels_.rows());
  const int num_ues = static_cast<int>(channels_.cols());
  if (num_aps == 0 || num_ues == 0) throw std::invalid_argument("empty channel set");
  if (static_cast<int>(serving_sets_.size()) != num_ues) {
    throw std::invalid_argument("one serving set per UE required");
  }
  for (int i = 0; i < num_aps; ++i) {
    for (int k = 0; k < num_ues; ++k) {
      if (channels_(i, k).rows() != channels_(0, k).rows() ||
          channels_(i, k).cols() != channels_(i, 0).cols()) {
        throw std::invalid_argument("inconsistent channel dimensions");
      }
    }
  }
  for (auto& s : serving_sets_) {
    std::sort(s.begin(), s.end());
    for (int i : s) {
      if (i < 0 || i >= num_aps) throw std::invalid_argument("serving AP index out of range");
    }
    if (std::adjacent_find(s.begin(), s.end()) != s.end()) {
      throw std::invalid_argument("duplicate AP in serving set");
    }
  }
  served_sets_ = invert_sets(serving_sets_, num_aps);

  ue_offset_.resize(num_ues);
  total_rx_ = 0;
  for (int k = 0; k < num_ues; ++k) {
    ue_offset_[k] = total_rx_;
    total_rx_ += rx_antennas(k);
  }

  serving_concat_.resize(num_ues);
  for (int k = 0; k < num_ues; ++k) {
    int cols = 0;
    for (int i : serving_sets_[k]) cols += tx_antennas(i);
    CMat hk(rx_antennas(k), cols);
    int c = 0;
    for (int i : serving_sets_[k]) {
      hk.middleCols(c, tx_antennas(i)) = channels_(i, k);
      c += tx_antennas(i);
    }
    serving_concat_[k] = std::move(hk);
  }

  stacked_.resize(num_aps);
  gram_.resize(num_aps);
  gram_basis_.resize(num_aps);
  gram_eigvals_.resize(num_aps);
  for (int i = 0; i < num_aps; ++i) {
    CMat hbar(total_rx_, tx_antennas(i));
    for (int k = 0; k < num_ues; ++k) {
      hbar.middleRows(ue_offset_[k], rx_antennas(k)) = channels_(i, k);
    }
    CMat g = hbar * hbar.adjoint();
    g = (0.5 * (g + g.adjoint())).eval();

    Eigen::SelfAdjointEigenSolver<CMat> eig(g);
    const RVec& lam = eig.eigenvalues();
    const double cutoff = 1e-12 * std::max(lam.maxCoeff(), 0.0);
    int first = 0;
    while (first < lam.size() && !(lam(first) > cutoff)) ++first;
    const int rank = static_cast<int>(lam.size()) - first;
    gram_basis_[i] = eig.eigenvectors().rightCols(rank);
    gram_eigvals_[i] = lam.tail(rank);

    stacked_[i] = std::move(hbar);
    gram_[i] = std::move(g);
  }
}

std::vector<int> ChannelSet::tx_antenna_counts() const {
  std::vector<int> m(num_aps());
  for (int i = 0; i < num_aps(); ++i) m[i] = tx_antennas(i);
  return m;
}

std::vector<int> ChannelSet::rx_antenna_counts() const {
  std::vector<int> n(num_ues());
  for (int k = 0; k < num_ues(); ++k) n[k] = rx_antennas(k);
  return n;
}

bool ChannelSet::serves(int i, int k) const {
  const auto& s = serving_sets_[k];
  return std::binary_search(s.begin(), s.end(), i);
}

double ChannelSet::noise_power(int k) const {
  if (noise_.empty()) throw StateError("noise powers have not been set");
  return noise_[k];
}

const std::vector<double>& ChannelSet::noise_powers() const {
  if (noise_.empty()) throw StateError("noise powers have not been set");
  return noise_;
}

void ChannelSet::set_noise_powers(std::vector<double> sigma2) {
  if (static_cast<int>(sigma2.size()) != num_ues()) {
    throw std::invalid_argument("one noise power per UE required");
  }
  for (double s : sigma2) {
    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("noise power must be positive");
  }
  noise_ = std::move(sigma2);
}

ChannelSet ChannelSet::with_serving_sets(std::vector<std::vector<int>> serving_sets) const {
  ChannelSet out(channels_, std::move(serving_sets));
  out.noise_ = noise_;
  return out;
}

double pathloss_db(double d_km) {
  if (!(d_km > 0.0)) throw std::domain_error("pathloss_db: distance must be positive");
  return 128.1 + 37.6 * std::log10(d_km);
}

double amplitude_gain(double d_km) { return std::pow(10.0, -pathloss_db(d_km) / 20.0); }

Topology place_network(const NetworkConfig& config, Rng& rng) {
  config.validate();
  RMat d(config.num_aps, config.num_ues);
  for (int i = 0; i < config.num_aps; ++i) {
    for (int k = 0; k < config.num_ues; ++k) {
      d(i, k) = rng.uniform(config.d_lo_km, config.d_hi_km);
    }
  }
  return topology_from_distances(d, config.cluster_size);
}

ChannelSet draw_channels(const Topology& topology, const NetworkConfig& config, Rng& rng) {
  config.validate();
  PairGrid<CMat> h(config.num_aps, config.num_ues);
  for (int i = 0; i < config.num_aps; ++i) {
    for (int k = 0; k < config.num_ues; ++k) {
      const double g = amplitude_gain(topology.distances_km(i, k));
      CMat hik(config.rx_antennas[k], config.tx_antennas[i]);
      for (int r = 0; r < hik.rows(); ++r) {
        for (int c = 0; c < hik.cols(); ++c) hik(r, c) = g * rng.complex_normal();
      }
      h(i, k) = std::move(hik);
    }
  }
  return ChannelSet(std::move(h), topology.serving_sets);
}

std::vector<double> noise_power(const ChannelSet& channels, double snr_db,
                                NoiseNormalization mode) {
  const int num_ues = channels.num_ues();
  double log_sum = 0.0;
  for (int k = 0; k < num_ues; ++k) {
    const auto& serving = channels.serving_aps(k);
    const double energy = channels.serving_concat(k).squaredNorm();
    if (!(energy > 0.0)) throw std::domain_error("noise_power: zero-norm serving channel");
    double m_total = 0.0;
    for (int i : serving) m_total += channels.tx_antennas(i);
    double denom = channels.rx_antennas(k) * m_total;
    if (mode == NoiseNormalization::kPerAp) {
      denom = channels.rx_antennas(k) * (m_total / static_cast<double>(serving.size()));
    }
    log_sum += std::log10(energy / denom);
  }
  const double sigma2 = std::pow(10.0, log_sum / num_ues) * std::pow(10.0, -snr_db / 10.0);
  return std::vector<double>(num_ues, sigma2);
}

Scenario generate_scenario(const NetworkConfig& config) {
  Rng rng(config.rng_seed);
  Topology topo = place_network(config, rng);
  ChannelSet ch = draw_channels(topo, config, rng);
  ch.set_noise_powers(noise_power(ch, config.snr_db, config.noise_normalization));
  return {std::move(topo), std::move(ch)};
}

RMat effective_distances(const ChannelSet& channels) {
  RMat d(channels.num_aps(), channels.num_ues());
  for (int i = 0; i < channels.num_aps(); ++i) {
    for (int k = 0; k < channels.num_ues(); ++k) {
      const CMat& h = channels.channel(i, k);
      const double mean_gain = h.squaredNorm() / static_cast<double>(h.size());
      if (!(mean_gain > 0.0)) {
        d(i, k) = std::numeric_limits<double>::infinity();
        continue;
      }
      const double pl = -10.0 * std::log10(mean_gain);
      d(i, k) = std::pow(10.0, (pl - 128.1) / 37.6);
    }
  }
  return d;
}

}  // namespace cfmimo
