#include "cfmimo/metrics.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cfmimo {

namespace {

constexpr std::array<std::pair<Algorithm, std::string_view>, 5> kAlgorithmNames{{
    {Algorithm::kLocalEzf, "ezf"},
    {Algorithm::kWmmse, "wmmse"},
    {Algorithm::kRwmmse, "rwmmse"},
    {Algorithm::kRwmmseLsa, "rwmmse-lsa"},
    {Algorithm::kRwmmseLus, "rwmmse-lus"},
}};

template <class Grid>
StreamCounts counts_of(const Grid& blocks) {
  StreamCounts d(blocks.rows(), blocks.cols(), 0);
  for (std::size_t i = 0; i < blocks.rows(); ++i) {
    for (std::size_t k = 0; k < blocks.cols(); ++k) {
      d(i, k) = static_cast<int>(blocks(i, k).cols());
    }
  }
  return d;
}

}  // namespace

StreamCounts Beamformer::stream_counts() const { return counts_of(blocks); }
StreamCounts LowDimBeamformer::stream_counts() const { return counts_of(blocks); }

std::string_view to_string(Algorithm algo) {
  for (const auto& [a, name] : kAlgorithmNames) {
    if (a == algo) return name;
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view tag) {
  if (tag == "local-ezf") return Algorithm::kLocalEzf;
  for (const auto& [a, name] : kAlgorithmNames) {
    if (name == tag) return a;
  }
  throw std::invalid_argument("unknown algorithm tag: " + std::string(tag));
}

namespace detail {

double logdet_hpd(const CMat& a) {
  if (a.rows() == 0) return 0.0;
  Eigen::LLT<CMat> llt(a);
  if (llt.info() != Eigen::Success) {
    throw NumericError("logdet_hpd: matrix is not positive definite");
  }
  return 2.0 * llt.matrixLLT().diagonal().real().array().log().sum();
}

int stream_offset(const StreamCounts& streams, int i, int k) {
  int off = 0;
  for (int j = 0; j < i; ++j) off += streams(j, k);
  return off;
}

EffectiveLinks effective_links(const ChannelSet& channels, const Beamformer& bf) {
  EffectiveLinks eff(channels.num_aps(), channels.num_ues());
  for (int j = 0; j < channels.num_aps(); ++j) {
    for (int l = 0; l < channels.num_ues(); ++l) {
      const CMat& p = bf.blocks(j, l);
      if (p.cols() == 0) {
        eff(j, l).resize(channels.total_rx(), 0);
        continue;
      }
      if (p.rows() != channels.tx_antennas(j)) {
        throw std::invalid_argument("beamformer row count must equal M_i");
      }
      if (!channels.serves(j, l)) {
        throw std::invalid_argument("beamformer defined on a non-serving pair");
      }
      eff(j, l) = channels.stacked(j) * p;
    }
  }
  return eff;
}

EffectiveLinks effective_links(const ChannelSet& channels, const LowDimBeamformer& x) {
  EffectiveLinks eff(channels.num_aps(), channels.num_ues());
  for (int j = 0; j < channels.num_aps(); ++j) {
    for (int l = 0; l < channels.num_ues(); ++l) {
      const CMat& xb = x.blocks(j, l);
      if (xb.cols() == 0) {
        eff(j, l).resize(channels.total_rx(), 0);
        continue;
      }
      if (xb.rows() != channels.total_rx()) {
        throw std::invalid_argument("low-dimension beamformer row count must equal sum N_k");
      }
      if (!channels.serves(j, l)) {
        throw std::invalid_argument("beamformer defined on a non-serving pair");
      }
      eff(j, l) = channels.gram(j) * xb;
    }
  }
  return eff;
}

CMat interference_plus_noise(int k, const ChannelSet& channels, const EffectiveLinks& eff) {
  const int nk = channels.rx_antennas(k);
  const int off = channels.ue_offset(k);
  CMat cov = CMat::Identity(nk, nk) * channels.noise_power(k);
  for (int j = 0; j < channels.num_aps(); ++j) {
    for (int l = 0; l < channels.num_ues(); ++l) {
      if (l == k || eff(j, l).cols() == 0) continue;
      const auto r = eff(j, l).middleRows(off, nk);
      cov.noalias() += r * r.adjoint();
    }
  }
  return hermitian_part(cov);
}

CMat desired_link(int k, const ChannelSet& channels, const EffectiveLinks& eff) {
  const int nk = channels.rx_antennas(k);
  const int off = channels.ue_offset(k);
  int cols = 0;
  for (int j = 0; j < channels.num_aps(); ++j) cols += static_cast<int>(eff(j, k).cols());
  CMat hp(nk, cols);
  int c = 0;
  for (int j = 0; j < channels.num_aps(); ++j) {
    const int d = static_cast<int>(eff(j, k).cols());
    if (d == 0) continue;
    hp.middleCols(c, d) = eff(j, k).middleRows(off, nk);
    c += d;
  }
  return hp;
}

double rate_nats(int k, const ChannelSet& channels, const EffectiveLinks& eff) {
  const CMat n = interference_plus_noise(k, channels, eff);
  const CMat hp = desired_link(k, channels, eff);
  if (hp.cols() == 0) return 0.0;
  const CMat total = hermitian_part(n + hp * hp.adjoint());
  const double r = logdet_hpd(total) - logdet_hpd(n);
  return std::max(r, 0.0);
}

double wsr_nats(const ChannelSet& channels, const EffectiveLinks& eff,
                std::span<const double> weights) {
  if (static_cast<int>(weights.size()) != channels.num_ues()) {
    throw std::invalid_argument("one weight per UE required");
  }
  double total = 0.0;
  for (int k = 0; k < channels.num_ues(); ++k) {
    total += weights[k] * rate_nats(k, channels, eff);
  }
  return total;
}

}  // namespace detail

CMat interference_plus_noise(int k, const ChannelSet& channels, const Beamformer& bf) {
  return detail::interference_plus_noise(k, channels, detail::effective_links(channels, bf));
}

double ue_rate(int k, const ChannelSet& channels, const Beamformer& bf) {
  return detail::rate_nats(k, channels, detail::effective_links(channels, bf)) /
         std::numbers::ln2;
}

double weighted_sum_rate(const ChannelSet& channels, const Beamformer& bf,
                         std::span<const double> weights) {
  return detail::wsr_nats(channels, detail::effective_links(channels, bf), weights) /
         std::numbers::ln2;
}

double weighted_sum_rate(const ChannelSet& channels, const LowDimBeamformer& x,
                         std::span<const double> weights) {
  return detail::wsr_nats(channels, detail::effective_links(channels, x), weights) /
         std::numbers::ln2;
}

double ap_power(int i, const Beamformer& bf) {
  double p = 0.0;
  for (std::size_t k = 0; k < bf.num_ues(); ++k) p += bf.blocks(i, k).squaredNorm();
  return p;
}

double ap_power(int i, const ChannelSet& channels, const LowDimBeamformer& x) {
  double p = 0.0;
  for (std::size_t k = 0; k < x.num_ues(); ++k) {
    const CMat& xb = x.blocks(i, k);
    if (xb.cols() == 0) continue;
    p += (xb.adjoint() * channels.gram(i) * xb).trace().real();
  }
  return p;
}

std::vector<double> ap_powers(const Beamformer& bf) {
  std::vector<double> p(bf.num_aps());
  for (std::size_t i = 0; i < bf.num_aps(); ++i) p[i] = ap_power(static_cast<int>(i), bf);
  return p;
}

std::vector<double> ap_powers(const ChannelSet& channels, const LowDimBeamformer& x) {
  std::vector<double> p(x.num_aps());
  for (std::size_t i = 0; i < x.num_aps(); ++i) {
    p[i] = ap_power(static_cast<int>(i), channels, x);
  }
  return p;
}

std::vector<double> interaction_count(Algorithm algo, std::span<const int> tx_antennas,
                                      std::span<const int> rx_antennas,
                                      const StreamCounts& streams) {
  const std::size_t num_aps = tx_antennas.size();
  if (streams.rows() != num_aps || streams.cols() != rx_antennas.size()) {
    throw std::invalid_argument("interaction_count: stream grid does not match dimensions");
  }
  long long total_rx = 0;
  for (int n : rx_antennas) total_rx += n;

  std::vector<double> out(num_aps, 0.0);
  for (std::size_t i = 0; i < num_aps; ++i) {
    long long own_streams = 0;
    for (std::size_t k = 0; k < rx_antennas.size(); ++k) own_streams += streams(i, k);
    switch (algo) {
      case Algorithm::kLocalEzf:
        out[i] = 0.0;
        break;
      case Algorithm::kWmmse:
        out[i] = static_cast<double>((total_rx + own_streams) * tx_antennas[i]);
        break;
      case Algorithm::kRwmmse:
      case Algorithm::kRwmmseLsa:
      case Algorithm::kRwmmseLus: {
        // Twice the count is an integer; halve once at the end.
        const long long twice = (total_rx + 2 * own_streams) * total_rx;
        out[i] = static_cast<double>(twice) / 2.0;
        break;
      }
    }
  }
  return out;
}

}  // namespace cfmimo
