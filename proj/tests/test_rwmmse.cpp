#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cfmimo/ezf.hpp"
#include "cfmimo/rwmmse.hpp"
#include "helpers.hpp"

using namespace cfmimo;

namespace {

SystemParams params_for(const ChannelSet& ch, double p_max = 1.0) {
  return {std::vector<double>(ch.num_ues(), 1.0), std::vector<double>(ch.num_aps(), p_max)};
}

LowDimBeamformer random_x(Rng& rng, const ChannelSet& ch, int d, double scale) {
  LowDimBeamformer x{PairGrid<CMat>(ch.num_aps(), ch.num_ues())};
  for (int i = 0; i < ch.num_aps(); ++i) {
    for (int k = 0; k < ch.num_ues(); ++k) {
      x.blocks(i, k) = test::random_cmat(rng, ch.total_rx(), ch.serves(i, k) ? d : 0, scale);
    }
  }
  return x;
}

/// One AP whose all-UE stack is the identity: UE 0 sees rows 0-1, UE 1 row 2.
ChannelSet identity_stack(double sigma2) {
  const CMat eye = CMat::Identity(3, 3);
  PairGrid<CMat> h(1, 2);
  h(0, 0) = eye.topRows(2);
  h(0, 1) = eye.bottomRows(1);
  ChannelSet ch(std::move(h), {{0}, {0}});
  ch.set_noise_powers({sigma2, sigma2});
  return ch;
}

/// Scale keeping X near the unit-power regime of a generated scenario.
double x_scale(const ChannelSet& ch) { return 1.0 / ch.gram(0).norm(); }

int column_offset(const StreamCounts& s, int i, int k) {
  int off = 0;
  for (int l = 0; l < k; ++l) off += s(i, l);
  return off;
}

}  // namespace

TEST_CASE("expansion") {
  const auto ch = identity_stack(1.0);
  Rng rng(1);
  const auto x = random_x(rng, ch, 1, 1.0);
  const auto p = expand(ch, x);
  CHECK(test::max_abs_diff(p.blocks(0, 0), x.blocks(0, 0)) < 1e-15);
  CHECK(test::max_abs_diff(p.blocks(0, 1), x.blocks(0, 1)) < 1e-15);

  const auto sc = test::small_scenario(2);
  auto zero = random_x(rng, sc.channels, 1, 0.0);
  const auto pz = expand(sc.channels, zero);
  for (int i = 0; i < sc.channels.num_aps(); ++i) {
    for (int k = 0; k < sc.channels.num_ues(); ++k) {
      const CMat& b = pz.blocks(i, k);
      CHECK((b.size() == 0 || b.cwiseAbs().maxCoeff() == 0.0));
    }
  }
}

TEST_CASE("Gram-space and expanded rates agree") {
  for (int seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const auto sc = test::small_scenario(20 + seed, 3, 4, 7, 2, 2);
    const auto& ch = sc.channels;
    const auto x = random_x(rng, ch, 1, x_scale(ch));
    const auto w = params_for(ch).weights;
    CHECK(std::abs(weighted_sum_rate(ch, x, w) - weighted_sum_rate(ch, expand(ch, x), w)) < 1e-9);
  }
}

TEST_CASE("low-dimension filters equal the expanded ones") {
  const auto scalar = test::single_link(CMat::Ones(1, 1), 1.0);
  LowDimBeamformer one{PairGrid<CMat>(1, 1)};
  one.blocks(0, 0) = CMat::Ones(1, 1);
  const auto us = update_u_lowdim(scalar, one);
  CHECK(us[0](0, 0).real() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(update_w_lowdim(scalar, one, us)[0](0, 0).real() == doctest::Approx(2.0).epsilon(1e-14));

  for (int seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const auto sc = test::small_scenario(60 + seed, 3, 4, 7, 2, 2);
    const auto& ch = sc.channels;
    const auto x = random_x(rng, ch, 1 + seed % 2, x_scale(ch));
    const auto p = expand(ch, x);
    const auto ul = update_u_lowdim(ch, x);
    const auto u = update_u(ch, p);
    const auto wl = update_w_lowdim(ch, x, ul);
    const auto w = update_w(ch, p, u);
    for (int k = 0; k < ch.num_ues(); ++k) {
      CHECK(test::max_abs_diff(ul[k], u[k]) <= 1e-10 * std::max(1.0, u[k].norm()));
      CHECK(test::max_abs_diff(wl[k], w[k]) <= 1e-10 * std::max(1.0, w[k].norm()));
    }
    const auto z = random_x(rng, ch, 1, 0.0);
    const auto uz = update_u_lowdim(ch, z);
    const auto wz = update_w_lowdim(ch, z, uz);
    for (int k = 0; k < ch.num_ues(); ++k) {
      CHECK(uz[k].cwiseAbs().maxCoeff() == 0.0);
      CHECK(test::max_abs_diff(wz[k], CMat::Identity(wz[k].rows(), wz[k].cols())) == 0.0);
    }
  }
}

TEST_CASE("identity Gram reduces the X step to the P step") {
  for (double p_max : {0.05, 1.0, 50.0}) {
    const auto ch = identity_stack(0.2);
    Rng rng(3);
    const auto x0 = random_x(rng, ch, 1, 0.3);
    MmseAux aux;
    aux.u = update_u_lowdim(ch, x0);
    aux.w = update_w_lowdim(ch, x0, aux.u);
    const auto streams = x0.stream_counts();
    const auto params = params_for(ch, p_max);
    const auto ux = update_x(ch, aux, streams, params);
    const auto up = update_p(ch, aux, streams, params);
    for (int k = 0; k < 2; ++k) {
      CHECK(test::max_abs_diff(ux.x.blocks(0, k), up.bf.blocks(0, k)) < 1e-10);
    }
    CHECK(ux.large_factorizations == 0);
  }
}

TEST_CASE("X step is feasible and stationary") {
  for (int seed = 0; seed < 15; ++seed) {
    const auto sc = test::small_scenario(100 + seed, 3, 4, 8, 2, 2, -4.0 + seed);
    const auto& ch = sc.channels;
    const auto streams = test::streams_on_serving(ch, 1);
    const auto params = params_for(ch, 0.5);
    const auto x0 = ezf_lowdim(ch, streams, params);
    MmseAux aux;
    aux.u = update_u_lowdim(ch, x0);
    aux.w = update_w_lowdim(ch, x0, aux.u);
    const auto up = update_x(ch, aux, streams, params);
    const auto pw = ap_powers(ch, up.x);
    for (int i = 0; i < ch.num_aps(); ++i) {
      CHECK(pw[i] <= params.power_budget[i] * (1 + 1e-8));
      const CMat& hb = ch.stacked(i);
      const int m = ch.tx_antennas(i);
      CMat q = CMat::Zero(m, m);
      for (int l = 0; l < ch.num_ues(); ++l) {
        q += params.weights[l] * ch.channel(i, l).adjoint() * aux.u[l] * aux.w[l] *
             aux.u[l].adjoint() * ch.channel(i, l);
      }
      const double lam = up.multipliers[i];
      const CMat sys = hb * q * hb.adjoint() + lam * ch.gram(i);
      for (int k : ch.served_ues(i)) {
        int off = 0;
        for (int j : ch.serving_aps(k)) {
          if (j == i) break;
          off += streams(j, k);
        }
        const CMat rhs = params.weights[k] * hb * ch.channel(i, k).adjoint() *
                         (aux.u[k] * aux.w[k]).middleCols(off, streams(i, k));
        const CMat grad = sys * up.x.blocks(i, k) - rhs;
        CHECK(grad.norm() <= 1e-8 * std::max(1.0, rhs.norm()));
      }
      CHECK(lam * (params.power_budget[i] - pw[i]) <= 1e-8 * std::max(1.0, lam));
    }
  }
}

TEST_CASE("RWMMSE tracks WMMSE from the same start") {
  for (int seed = 0; seed < 4; ++seed) {
    const auto sc = test::small_scenario(200 + seed, 3, 4, 8, 2, 2, 3.0 * seed);
    const auto& ch = sc.channels;
    const auto streams = test::streams_on_serving(ch, 1);
    const auto params = params_for(ch);
    SolverOptions opts;
    opts.rel_tol = 1e-9;
    opts.max_iters = 3000;
    const auto x0 = ezf_lowdim(ch, streams, params);
    const auto [bf, tw] = solve_wmmse(ch, params, ezf_beamformer(ch, streams, params), opts);
    const auto [x, tr] = solve_rwmmse(ch, params, x0, opts);
    CHECK(std::abs(tr.final_wsr_bits() - tw.final_wsr_bits()) <= 1e-3 * tw.final_wsr_bits());
    CHECK(tr.large_factorizations == 0);
    CHECK(tr.small_factorizations > 0);
    const auto expect = interaction_count(Algorithm::kRwmmse, ch.tx_antenna_counts(),
                                          ch.rx_antenna_counts(), streams);
    CHECK(tr.interaction == expect);
    for (std::size_t t = 1; t < tr.wsr_bits.size(); ++t) {
      CHECK(tr.wsr_bits[t] * std::numbers::ln2 >= tr.wsr_bits[t - 1] * std::numbers::ln2 - 1e-9);
    }
  }
}

TEST_CASE("RWMMSE reaches the matched-filter optimum") {
  Rng rng(9);
  const CMat h = test::random_cmat(rng, 1, 2);
  const auto ch = test::single_link(h, 0.4);
  const SystemParams params{{1.0}, {3.0}};
  const auto [x, trace] = solve_rwmmse(ch, params, ezf_lowdim(ch, StreamCounts(1, 1, 1), params));
  CHECK(std::abs(trace.final_wsr_bits() - std::log2(1.0 + 3.0 * h.squaredNorm() / 0.4)) < 1e-6);
}

TEST_CASE("cross-check of the block-diagonal closed form") {
  const auto scalar = test::single_link(CMat::Ones(1, 1), 1.0);
  MmseAux aux{{CMat::Constant(1, 1, cdouble(0.5, 0.0))}, {CMat::Constant(1, 1, cdouble(2.0, 0.0))}};
  const auto rep = wmmse_lowdim_crosscheck(scalar, aux, StreamCounts(1, 1, 1), {{1.0}, {4.0}}, {0.0});
  CHECK(rep.ok);
  CHECK(rep.x[0](0, 0).real() == doctest::Approx(2.0).epsilon(1e-14));

  for (int seed = 0; seed < 8; ++seed) {
    const auto sc = test::small_scenario(400 + seed, 3, 4, 8, 2, 2);
    const auto& ch = sc.channels;
    const auto streams = test::streams_on_serving(ch, 1);
    const auto params = params_for(ch);
    SolverOptions opts;
    opts.max_iters = 40;
    const auto [bf, trace] = solve_wmmse(ch, params, ezf_beamformer(ch, streams, params), opts);
    MmseAux a;
    a.u = update_u(ch, bf);
    a.w = update_w(ch, bf, a.u);
    const auto mu = update_p(ch, a, streams, params).multipliers;
    const auto r = wmmse_lowdim_crosscheck(ch, a, streams, params, mu);
    CHECK_MESSAGE(r.ok, r.message);
    CHECK(r.max_abs_error <= 1e-8);
  }
}

TEST_CASE("cross-check gives zero columns for a UE without channel") {
  Rng rng(10);
  auto ch = test::random_channels(rng, {4, 4}, {1, 1, 1}, {{0}, {0, 1}, {1}}, 0.5);
  PairGrid<CMat> h = ch.channels();
  for (int i = 0; i < 2; ++i) h(i, 1).setZero();
  ChannelSet zeroed(std::move(h), ch.serving_sets());
  zeroed.set_noise_powers({0.5, 0.5, 0.5});
  const auto streams = test::streams_on_serving(zeroed, 1);
  Beamformer bf{PairGrid<CMat>(2, 3)};
  for (int i = 0; i < 2; ++i) {
    for (int k = 0; k < 3; ++k) {
      bf.blocks(i, k) = test::random_cmat(rng, 4, streams(i, k), 0.3);
    }
  }
  MmseAux aux;
  aux.u = update_u(zeroed, bf);
  aux.w = update_w(zeroed, bf, aux.u);
  const auto r = wmmse_lowdim_crosscheck(zeroed, aux, streams, params_for(zeroed), {0.3, 0.7});
  CHECK(r.ok);
  for (int i = 0; i < 2; ++i) {
    const CMat cols = r.x[i].middleCols(column_offset(streams, i, 1), streams(i, 1));
    CHECK(cols.cwiseAbs().maxCoeff() == 0.0);
  }
}
