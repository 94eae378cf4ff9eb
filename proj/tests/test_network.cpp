#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cfmimo/network.hpp"
#include "helpers.hpp"

using namespace cfmimo;

TEST_CASE("pathloss at reference distances") {
  CHECK(pathloss_db(0.1) == doctest::Approx(90.5).epsilon(1e-12));
  CHECK(pathloss_db(1.0) == doctest::Approx(128.1).epsilon(1e-12));
  CHECK(std::abs(pathloss_db(0.3) - (128.1 + 37.6 * std::log10(0.3))) < 1e-9);
  CHECK(std::abs(pathloss_db(0.3) - 108.43975) < 1e-4);
  CHECK_THROWS_AS(pathloss_db(0.0), std::domain_error);
  CHECK_THROWS_AS(pathloss_db(-1.0), std::domain_error);
}

TEST_CASE("amplitude gain at one kilometre") {
  const double g = amplitude_gain(1.0);
  CHECK(g * g == doctest::Approx(std::pow(10.0, -12.81)).epsilon(1e-12));
}

TEST_CASE("config validation rejects broken invariants") {
  auto c = NetworkConfig::uniform(4, 8, 64, 4, 2);
  CHECK_NOTHROW(c.validate());
  auto bad = c;
  bad.cluster_size = 5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.tx_antennas[1] = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.power_budget[0] = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.rate_weights.pop_back();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.d_lo_km = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("single AP serves every UE") {
  Rng rng(3);
  const auto topo = place_network(NetworkConfig::uniform(1, 5, 2, 1, 1), rng);
  for (const auto& s : topo.serving_sets) CHECK(s == std::vector<int>{0});
  CHECK(topo.served_sets[0] == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("nearest AP from a fixed distance matrix") {
  RMat d(2, 2);
  d << 0.1, 0.2, 0.3, 0.15;
  const auto topo = topology_from_distances(d, 1);
  CHECK(topo.serving_sets[0] == std::vector<int>{0});
  CHECK(topo.serving_sets[1] == std::vector<int>{1});
  CHECK(topo.served_sets[0] == std::vector<int>{0});
  CHECK(topo.served_sets[1] == std::vector<int>{1});
}

TEST_CASE("distance ties go to the lower AP index") {
  RMat d(3, 1);
  d << 0.2, 0.1, 0.2;
  CHECK(topology_from_distances(d, 2).serving_sets[0] == std::vector<int>{0, 1});
}

TEST_CASE("property: clusters are the L nearest APs and served sets invert them") {
  Rng gen(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int aps = 1 + static_cast<int>(gen.below(6));
    const int ues = 1 + static_cast<int>(gen.below(6));
    const int l = 1 + static_cast<int>(gen.below(aps));
    RMat d(aps, ues);
    for (int i = 0; i < aps; ++i) {
      // Coarse values so that ties actually occur.
      for (int k = 0; k < ues; ++k) d(i, k) = 0.1 + 0.05 * static_cast<double>(gen.below(4));
    }
    const auto topo = topology_from_distances(d, l);
    for (int k = 0; k < ues; ++k) {
      const auto& s = topo.serving_sets[k];
      REQUIRE(static_cast<int>(s.size()) == l);
      CHECK(std::is_sorted(s.begin(), s.end()));
      std::vector<int> order(aps);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return d(a, k) < d(b, k); });
      std::vector<int> expect(order.begin(), order.begin() + l);
      std::sort(expect.begin(), expect.end());
      CHECK(s == expect);
      for (int i = 0; i < aps; ++i) {
        const bool in_cluster = std::find(s.begin(), s.end(), i) != s.end();
        const auto& u = topo.served_sets[i];
        CHECK(in_cluster == (std::find(u.begin(), u.end(), k) != u.end()));
      }
    }
  }
}

TEST_CASE("same seed gives identical topology and channels") {
  const auto cfg = NetworkConfig::uniform(3, 4, 5, 2, 2, 1.0, 3.0, 77);
  const auto a = generate_scenario(cfg);
  const auto b = generate_scenario(cfg);
  CHECK(a.topology.distances_km == b.topology.distances_km);
  CHECK(a.topology.serving_sets == b.topology.serving_sets);
  CHECK(a.channels.channels() == b.channels.channels());
  CHECK(a.channels.noise_powers() == b.channels.noise_powers());
  auto other = cfg;
  other.rng_seed = 78;
  CHECK_FALSE(generate_scenario(other).channels.channels() == a.channels.channels());
}

TEST_CASE("distances stay inside the configured range") {
  auto cfg = NetworkConfig::uniform(4, 30, 1, 1, 2);
  Rng rng(5);
  const auto topo = place_network(cfg, rng);
  CHECK(topo.distances_km.minCoeff() >= 0.1);
  CHECK(topo.distances_km.maxCoeff() <= 0.3);
}

TEST_CASE("normalized channel entries have unit variance") {
  auto cfg = NetworkConfig::uniform(1, 1, 400, 250, 1);
  Rng rng(9);
  const auto topo = place_network(cfg, rng);
  const auto ch = draw_channels(topo, cfg, rng);
  const double g = amplitude_gain(topo.distances_km(0, 0));
  const CMat w = ch.channel(0, 0) / g;
  REQUIRE(w.size() == 100000);
  const double var = w.squaredNorm() / static_cast<double>(w.size());
  CHECK(std::abs(var - 1.0) < 0.05);
  // Circular symmetry: real and imaginary parts carry half the power each.
  const double re = w.real().squaredNorm() / static_cast<double>(w.size());
  CHECK(std::abs(re - 0.5) < 0.025);
  CHECK_FALSE(ch.has_noise());
  CHECK_THROWS_AS(ch.noise_power(0), StateError);
}

TEST_CASE("cached stacks match their definitions") {
  const auto sc = test::small_scenario(21, 3, 4, 5, 2, 2);
  const auto& ch = sc.channels;
  for (int k = 0; k < ch.num_ues(); ++k) {
    int c = 0;
    for (int i : ch.serving_aps(k)) {
      CHECK(ch.serving_concat(k).middleCols(c, ch.tx_antennas(i)) == ch.channel(i, k));
      c += ch.tx_antennas(i);
    }
    CHECK(c == ch.serving_concat(k).cols());
  }
  for (int i = 0; i < ch.num_aps(); ++i) {
    for (int k = 0; k < ch.num_ues(); ++k) {
      CHECK(ch.stacked(i).middleRows(ch.ue_offset(k), ch.rx_antennas(k)) == ch.channel(i, k));
    }
    const CMat g = ch.stacked(i) * ch.stacked(i).adjoint();
    CHECK((ch.gram(i) - g).norm() <= 1e-12 * g.norm());
    CHECK((ch.gram(i) - ch.gram(i).adjoint()).norm() <= 1e-12 * g.norm());
    const CMat rebuilt = ch.gram_basis(i) * ch.gram_eigvals(i).asDiagonal() *
                         ch.gram_basis(i).adjoint();
    CHECK((rebuilt - g).norm() <= 1e-10 * g.norm());
  }
}

TEST_CASE("channel set rejects inconsistent input") {
  PairGrid<CMat> h(2, 1);
  h(0, 0) = CMat::Ones(2, 3);
  h(1, 0) = CMat::Ones(1, 3);
  CHECK_THROWS_AS(ChannelSet(h, {{0}}), std::invalid_argument);
  h(1, 0) = CMat::Ones(2, 3);
  CHECK_THROWS_AS(ChannelSet(h, {{2}}), std::invalid_argument);
  CHECK_THROWS_AS(ChannelSet(h, {{0, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(ChannelSet(h, {{0}, {1}}), std::invalid_argument);
  ChannelSet ok(h, {{1, 0}});
  CHECK(ok.serving_aps(0) == std::vector<int>{0, 1});
  CHECK_THROWS_AS(ok.set_noise_powers({0.0}), std::invalid_argument);
  CHECK_THROWS_AS(ok.set_noise_powers({1.0, 1.0}), std::invalid_argument);
}

namespace {

/// Channels whose serving concatenations have a prescribed squared norm.
ChannelSet scaled_set(const std::vector<double>& energy_per_entry, int n, int m, int cluster) {
  const int ues = static_cast<int>(energy_per_entry.size());
  PairGrid<CMat> h(cluster, ues);
  std::vector<std::vector<int>> serving(ues);
  for (int k = 0; k < ues; ++k) {
    for (int i = 0; i < cluster; ++i) {
      h(i, k) = CMat::Constant(n, m, cdouble(std::sqrt(energy_per_entry[k]), 0.0));
      serving[k].push_back(i);
    }
  }
  return ChannelSet(std::move(h), std::move(serving));
}

}  // namespace

TEST_CASE("noise power from mean per-entry gain") {
  const auto unit = scaled_set({1.0, 1.0, 1.0}, 2, 3, 2);
  for (double s : noise_power(unit, 0.0)) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  for (double s : noise_power(unit, 10.0)) CHECK(s == doctest::Approx(0.1).epsilon(1e-12));
  const auto single = scaled_set({4.0}, 3, 5, 1);
  CHECK(noise_power(single, 0.0)[0] == doctest::Approx(4.0).epsilon(1e-12));
  // Geometric, not arithmetic, mean across UEs.
  const auto mixed = scaled_set({1.0, 16.0}, 1, 1, 1);
  CHECK(noise_power(mixed, 0.0)[0] == doctest::Approx(4.0).epsilon(1e-12));
  // The per-AP reading divides by the mean M_i instead of the cluster total.
  CHECK(noise_power(unit, 0.0, NoiseNormalization::kPerAp)[0] ==
        doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("noise power rejects a zero serving channel") {
  const auto zero = scaled_set({1.0, 0.0}, 1, 2, 1);
  CHECK_THROWS_AS(noise_power(zero, 0.0), std::domain_error);
}

TEST_CASE("property: scaling channels by c scales the noise by c squared") {
  Rng gen(4);
  for (int trial = 0; trial < 25; ++trial) {
    const auto sc = test::small_scenario(100 + trial);
    const double c = 0.1 + 10.0 * gen.uniform();
    PairGrid<CMat> h = sc.channels.channels();
    for (std::size_t i = 0; i < h.rows(); ++i) {
      for (std::size_t k = 0; k < h.cols(); ++k) h(i, k) *= c;
    }
    const ChannelSet scaled(std::move(h), sc.channels.serving_sets());
    const auto a = noise_power(sc.channels, 4.0);
    const auto b = noise_power(scaled, 4.0);
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(b[k] == doctest::Approx(c * c * a[k]).epsilon(1e-10));
    }
  }
}

TEST_CASE("serving-set swap keeps channels and noise") {
  const auto sc = test::small_scenario(5);
  const auto all = sc.channels.with_serving_sets(
      std::vector<std::vector<int>>(sc.channels.num_ues(), std::vector<int>{0, 1, 2}));
  CHECK(all.channels() == sc.channels.channels());
  CHECK(all.noise_powers() == sc.channels.noise_powers());
  CHECK(all.served_ues(1).size() == static_cast<std::size_t>(sc.channels.num_ues()));
}

TEST_CASE("effective distances invert the pathloss of the mean gain") {
  PairGrid<CMat> h(1, 1);
  const double g = amplitude_gain(0.2);
  h(0, 0) = CMat::Constant(2, 2, cdouble(g, 0.0));
  const ChannelSet ch(std::move(h), {{0}});
  CHECK(effective_distances(ch)(0, 0) == doctest::Approx(0.2).epsilon(1e-10));
}
