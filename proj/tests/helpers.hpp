#pragma once

#include <cmath>
#include <vector>

#include "cfmimo/network.hpp"
#include "cfmimo/rng.hpp"
#include "cfmimo/types.hpp"

namespace cfmimo::test {

inline CMat random_cmat(Rng& rng, int rows, int cols, double scale = 1.0) {
  CMat m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = scale * rng.complex_normal();
  }
  return m;
}

/// Unit-variance channels on every pair with explicit clusters and a common
/// noise power.
inline ChannelSet random_channels(Rng& rng, const std::vector<int>& m, const std::vector<int>& n,
                                  std::vector<std::vector<int>> serving, double sigma2 = 1.0) {
  PairGrid<CMat> h(m.size(), n.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t k = 0; k < n.size(); ++k) h(i, k) = random_cmat(rng, n[k], m[i]);
  }
  ChannelSet ch(std::move(h), std::move(serving));
  ch.set_noise_powers(std::vector<double>(n.size(), sigma2));
  return ch;
}

/// A generated benchmark-style instance with smaller dimensions.
inline Scenario small_scenario(std::uint64_t seed, int aps = 3, int ues = 4, int m = 6, int n = 2,
                               int cluster = 2, double snr_db = 5.0) {
  return generate_scenario(NetworkConfig::uniform(aps, ues, m, n, cluster, 1.0, snr_db, seed));
}

inline ChannelSet single_link(const CMat& h, double sigma2) {
  PairGrid<CMat> g(1, 1);
  g(0, 0) = h;
  ChannelSet ch(std::move(g), {{0}});
  ch.set_noise_powers({sigma2});
  return ch;
}

/// Streams per serving pair, zero elsewhere.
inline StreamCounts streams_on_serving(const ChannelSet& ch, int d) {
  StreamCounts s(ch.num_aps(), ch.num_ues(), 0);
  for (int k = 0; k < ch.num_ues(); ++k) {
    for (int i : ch.serving_aps(k)) s(i, k) = d;
  }
  return s;
}

inline double max_abs_diff(const CMat& a, const CMat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return INFINITY;
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff();
}

/// log det through eigenvalues, independent of the Cholesky path.
inline double logdet_eig(const CMat& a) {
  Eigen::SelfAdjointEigenSolver<CMat> eig(0.5 * (a + a.adjoint()));
  return eig.eigenvalues().array().log().sum();
}

}  // namespace cfmimo::test
