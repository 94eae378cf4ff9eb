#include "cfmimo/ezf.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "cfmimo/wmmse.hpp"

namespace cfmimo {

namespace {

struct LinkBasis {
  CMat u;  // N_k x D, left singular vectors
  CMat v;  // M_i x D, right singular vectors
  RVec s;  // D leading singular values
};

LinkBasis leading_basis(const CMat& h, int d) {
  Eigen::JacobiSVD<CMat> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RVec& sv = svd.singularValues();
  if (d > sv.size()) throw std::invalid_argument("ezf: more streams than min(N_k, M_i)");
  if (d > 0 && !(sv(d - 1) > 1e-12 * sv(0) && sv(0) > 0.0)) {
    throw NumericError("ezf: link rank is below the requested stream count");
  }
  LinkBasis b{svd.matrixU().leftCols(d), svd.matrixV().leftCols(d), sv.head(d)};
  for (int j = 0; j < d; ++j) {
    auto v = b.v.col(j);
    for (Eigen::Index r = 0; r < v.size(); ++r) {
      const double mag = std::abs(v(r));
      if (mag > 1e-12) {
        const cdouble phase = std::conj(v(r)) / mag;
        v *= phase;
        b.u.col(j) *= phase;
        break;
      }
    }
  }
  return b;
}

/// Per-AP pieces shared by both forms: the link bases and the S_i x S_i
/// mixing matrix Gamma_i with P_i = Vbar_i Gamma_i.
struct ApEzf {
  std::vector<LinkBasis> links;  // indexed by UE, empty when D_{i,k} = 0
  CMat gamma;
};

ApEzf ap_ezf(const ChannelSet& channels, const StreamCounts& streams, double p_max, int i) {
  ApEzf out;
  out.links.resize(channels.num_ues());
  int s_i = 0;
  for (int k = 0; k < channels.num_ues(); ++k) {
    const int d = streams(i, k);
    if (d > channels.rx_antennas(k)) throw std::invalid_argument("ezf: D_{i,k} exceeds N_k");
    s_i += d;
  }
  if (s_i > channels.tx_antennas(i)) {
    throw std::invalid_argument("ezf: AP " + std::to_string(i) + " has more streams than antennas");
  }
  CMat vbar(channels.tx_antennas(i), s_i);
  int c = 0;
  for (int k = 0; k < channels.num_ues(); ++k) {
    const int d = streams(i, k);
    if (d == 0) continue;
    out.links[k] = leading_basis(channels.channel(i, k), d);
    vbar.middleCols(c, d) = out.links[k].v;
    c += d;
  }
  if (s_i == 0) return out;

  const CMat gram = vbar.adjoint() * vbar;
  Eigen::SelfAdjointEigenSolver<CMat> eig(gram);
  const RVec& lam = eig.eigenvalues();
  if (!(lam.minCoeff() > 1e-10 * lam.maxCoeff())) {
    throw NumericError("ezf: effective channel of AP " + std::to_string(i) + " is rank deficient");
  }
  const CMat gram_inv = eig.eigenvectors() * lam.cwiseInverse().asDiagonal() *
                        eig.eigenvectors().adjoint();
  // ||Vbar (Vbar^H Vbar)^{-1}||_F^2 = Tr((Vbar^H Vbar)^{-1}).
  const double pinv_norm = std::sqrt(lam.cwiseInverse().sum());
  out.gamma = gram_inv * (std::sqrt(p_max) / pinv_norm);
  return out;
}

void check_inputs(const ChannelSet& channels, const StreamCounts& streams,
                  const SystemParams& params) {
  detail::check_params(channels, params);
  detail::check_streams(channels, streams);
}

}  // namespace

Beamformer ezf_beamformer(const ChannelSet& channels, const StreamCounts& streams,
                          const SystemParams& params) {
  check_inputs(channels, streams, params);
  Beamformer bf;
  bf.blocks = PairGrid<CMat>(channels.num_aps(), channels.num_ues());
  for (int i = 0; i < channels.num_aps(); ++i) {
    const ApEzf ap = ap_ezf(channels, streams, params.power_budget[i], i);
    int c = 0;
    for (int k = 0; k < channels.num_ues(); ++k) {
      const int d = streams(i, k);
      if (d == 0) {
        bf.blocks(i, k).resize(channels.tx_antennas(i), 0);
        continue;
      }
      bf.blocks(i, k).noalias() = CMat::Zero(channels.tx_antennas(i), d);
      int r = 0;
      for (int l = 0; l < channels.num_ues(); ++l) {
        const int dl = streams(i, l);
        if (dl == 0) continue;
        bf.blocks(i, k) += ap.links[l].v * ap.gamma.block(r, c, dl, d);
        r += dl;
      }
      c += d;
    }
  }
  return bf;
}

LowDimBeamformer ezf_lowdim(const ChannelSet& channels, const StreamCounts& streams,
                            const SystemParams& params) {
  check_inputs(channels, streams, params);
  LowDimBeamformer x;
  x.blocks = PairGrid<CMat>(channels.num_aps(), channels.num_ues());
  for (int i = 0; i < channels.num_aps(); ++i) {
    const ApEzf ap = ap_ezf(channels, streams, params.power_budget[i], i);
    // v_j = H_{i,k}^H u_j / s_j, so Vbar_i = Hbar_i^H B with B holding
    // U_k Sigma_k^{-1} in the rows of UE k.
    int s_i = static_cast<int>(ap.gamma.cols());
    CMat b = CMat::Zero(channels.total_rx(), s_i);
    int c = 0;
    for (int k = 0; k < channels.num_ues(); ++k) {
      const int d = streams(i, k);
      if (d == 0) continue;
      b.block(channels.ue_offset(k), c, channels.rx_antennas(k), d) =
          ap.links[k].u * ap.links[k].s.cwiseInverse().asDiagonal();
      c += d;
    }
    detail::scatter_columns(s_i == 0 ? CMat(channels.total_rx(), 0) : CMat(b * ap.gamma),
                            streams, i, channels.total_rx(), x.blocks);
  }
  return x;
}

}  // namespace cfmimo
