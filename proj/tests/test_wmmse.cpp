#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cfmimo/ezf.hpp"
#include "cfmimo/wmmse.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace cfmimo;

namespace {

Beamformer scalar_bf(double p) {
  Beamformer bf{PairGrid<CMat>(1, 1)};
  bf.blocks(0, 0) = CMat::Constant(1, 1, cdouble(p, 0.0));
  return bf;
}

SystemParams params_for(const ChannelSet& ch, double p_max = 1.0) {
  return {std::vector<double>(ch.num_ues(), 1.0), std::vector<double>(ch.num_aps(), p_max)};
}

/// Every serving block of UE k stacked as in the block-diagonal P_k.
CMat effective(const ChannelSet& ch, const Beamformer& bf, int k) {
  int cols = 0;
  for (int i : ch.serving_aps(k)) cols += bf.streams(i, k);
  CMat hp(ch.rx_antennas(k), cols);
  int c = 0;
  for (int i : ch.serving_aps(k)) {
    const int d = bf.streams(i, k);
    hp.middleCols(c, d) = ch.channel(i, k) * bf.blocks(i, k);
    c += d;
  }
  return hp;
}

MmseAux aux_at(const ChannelSet& ch, const Beamformer& bf) {
  MmseAux aux;
  aux.u = update_u(ch, bf);
  aux.w = update_w(ch, bf, aux.u);
  return aux;
}

}  // namespace

TEST_CASE("scalar receive filter and weight") {
  const auto ch = test::single_link(CMat::Ones(1, 1), 1.0);
  const auto u = update_u(ch, scalar_bf(1.0));
  CHECK(u[0](0, 0).real() == doctest::Approx(0.5).epsilon(1e-15));
  const auto w = update_w(ch, scalar_bf(1.0), u);
  CHECK(w[0](0, 0).real() == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("zero beamformer gives zero filter and identity weight") {
  const auto sc = test::small_scenario(3);
  const auto& ch = sc.channels;
  Beamformer bf{PairGrid<CMat>(ch.num_aps(), ch.num_ues())};
  for (int i = 0; i < ch.num_aps(); ++i) {
    for (int k = 0; k < ch.num_ues(); ++k) {
      bf.blocks(i, k) = CMat::Zero(ch.tx_antennas(i), ch.serves(i, k) ? 1 : 0);
    }
  }
  const auto u = update_u(ch, bf);
  const auto w = update_w(ch, bf, u);
  for (int k = 0; k < ch.num_ues(); ++k) {
    CHECK(u[k].cwiseAbs().maxCoeff() == 0.0);
    CHECK(test::max_abs_diff(w[k], CMat::Identity(w[k].rows(), w[k].cols())) == 0.0);
  }
}

TEST_CASE("receive filter solves its linear system and weight inverts the MSE") {
  for (int seed = 0; seed < 20; ++seed) {
    const auto sc = test::small_scenario(40 + seed, 3, 4, 6, 2, 2);
    const auto& ch = sc.channels;
    const auto bf = ezf_beamformer(ch, test::streams_on_serving(ch, 1), params_for(ch));
    const auto aux = aux_at(ch, bf);
    for (int k = 0; k < ch.num_ues(); ++k) {
      const CMat n = interference_plus_noise(k, ch, bf);
      const CMat hp = effective(ch, bf, k);
      const CMat lhs = (n + hp * hp.adjoint()) * aux.u[k];
      CHECK((lhs - hp).norm() <= 1e-10 * std::max(1.0, hp.norm()));
      const CMat d = CMat::Identity(hp.cols(), hp.cols()) - aux.u[k].adjoint() * hp;
      const CMat e = d * d.adjoint() + aux.u[k].adjoint() * n * aux.u[k];
      CHECK(test::max_abs_diff(aux.w[k] * e, CMat::Identity(e.rows(), e.cols())) < 1e-9);
      CHECK(test::max_abs_diff(aux.w[k], aux.w[k].adjoint()) < 1e-12);
    }
  }
}

TEST_CASE("bisection on closed-form power maps") {
  auto quad = [](double mu) { return 4.0 / ((1.0 + mu) * (1.0 + mu)); };
  CHECK(bisect_multiplier(quad, 4.0, 1e-8) == 0.0);
  CHECK(std::abs(bisect_multiplier(quad, 1.0, 1e-8) - 1.0) < 1e-6);
  auto expo = [](double mu) { return std::exp(-mu); };
  CHECK(std::abs(bisect_multiplier(expo, 0.5, 1e-8) - std::numbers::ln2) < 1e-6);
  // The answer always sits on the feasible side.
  CHECK(expo(bisect_multiplier(expo, 0.5, 1e-12)) <= 0.5);
}

TEST_CASE("bisection fails without a bracket") {
  CHECK_THROWS_AS(bisect_multiplier([](double) { return 2.0; }, 1.0, 1e-8), NumericError);
}

TEST_CASE("scalar transmit update") {
  const auto ch = test::single_link(CMat::Ones(1, 1), 1.0);
  MmseAux aux{{CMat::Constant(1, 1, cdouble(0.5, 0.0))}, {CMat::Constant(1, 1, cdouble(2.0, 0.0))}};
  StreamCounts d(1, 1, 1);
  const auto loose = update_p(ch, aux, d, params_for(ch, 4.0));
  CHECK(loose.multipliers[0] == 0.0);
  CHECK(loose.bf.blocks(0, 0)(0, 0).real() == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(ap_power(0, loose.bf) == doctest::Approx(4.0).epsilon(1e-14));
  const auto tight = update_p(ch, aux, d, params_for(ch, 1.0));
  CHECK(std::abs(ap_power(0, tight.bf) - 1.0) < 1e-6);
  CHECK(tight.multipliers[0] > 0.0);
}

TEST_CASE("transmit update satisfies the KKT conditions") {
  for (int seed = 0; seed < 20; ++seed) {
    const auto sc = test::small_scenario(70 + seed, 3, 4, 6, 2, 2, 0.0 + seed);
    const auto& ch = sc.channels;
    const auto streams = test::streams_on_serving(ch, 1);
    auto params = params_for(ch, 0.2 + 0.1 * (seed % 5));
    for (std::size_t k = 0; k < params.weights.size(); ++k) params.weights[k] = 0.5 + 0.25 * k;
    const auto bf = ezf_beamformer(ch, streams, params);
    const auto aux = aux_at(ch, bf);
    const auto up = update_p(ch, aux, streams, params);
    for (int i = 0; i < ch.num_aps(); ++i) {
      const int m = ch.tx_antennas(i);
      CMat q = CMat::Zero(m, m);
      for (int l = 0; l < ch.num_ues(); ++l) {
        const CMat a = aux.u[l] * aux.w[l] * aux.u[l].adjoint();
        q += params.weights[l] * ch.channel(i, l).adjoint() * a * ch.channel(i, l);
      }
      const double mu = up.multipliers[i];
      for (int k : ch.served_ues(i)) {
        // Column block of AP i inside UE k's stream index.
        int off = 0;
        for (int j : ch.serving_aps(k)) {
          if (j == i) break;
          off += streams(j, k);
        }
        const CMat rhs = params.weights[k] * ch.channel(i, k).adjoint() *
                         (aux.u[k] * aux.w[k]).middleCols(off, streams(i, k));
        const CMat grad = (q + mu * CMat::Identity(m, m)) * up.bf.blocks(i, k) - rhs;
        CHECK(grad.norm() <= 1e-8 * std::max(1.0, rhs.norm()));
      }
      const double p = ap_power(i, up.bf);
      CHECK(p <= params.power_budget[i] * (1 + 1e-8));
      CHECK(mu * (params.power_budget[i] - p) <= 1e-8 * std::max(1.0, mu));
    }
  }
}

TEST_CASE("single-antenna pair converges to the matched filter") {
  Rng rng(5);
  for (int t = 0; t < 5; ++t) {
    const CMat h = test::random_cmat(rng, 1, 2);
    const double sigma2 = 0.3 + t;
    const auto ch = test::single_link(h, sigma2);
    const SystemParams params{{1.0}, {2.0}};
    StreamCounts d(1, 1, 1);
    const auto init = ezf_beamformer(ch, d, params);
    const auto [bf, trace] = solve_wmmse(ch, params, init);
    const double expect = std::log2(1.0 + 2.0 * h.squaredNorm() / sigma2);
    CHECK(std::abs(trace.final_wsr_bits() - expect) < 1e-6);
    const CMat mrt = std::sqrt(2.0) * h.adjoint() / h.norm();
    // Equal up to a common phase.
    const cdouble phase = (mrt.adjoint() * bf.blocks(0, 0))(0, 0);
    CHECK(std::abs(std::abs(phase) - 2.0) < 1e-6);
  }
}

TEST_CASE("two-user single-antenna case reaches the brute-force optimum") {
  Rng rng(8);
  for (int t = 0; t < 3; ++t) {
    test::TwoUserMiso s;
    s.h1 = test::random_cmat(rng, 2, 1);
    s.h2 = test::random_cmat(rng, 2, 1);
    s.sigma2 = 0.5;
    PairGrid<CMat> g(1, 2);
    g(0, 0) = s.h1.transpose();
    g(0, 1) = s.h2.transpose();
    ChannelSet ch(std::move(g), {{0}, {0}});
    ch.set_noise_powers({s.sigma2, s.sigma2});
    const SystemParams params{{1.0, 1.0}, {s.p_max}};
    StreamCounts d(1, 2, 1);
    const auto [bf, trace] = solve_wmmse(ch, params, ezf_beamformer(ch, d, params));
    CHECK(std::abs(trace.final_wsr_bits() - weighted_sum_rate(ch, bf, params.weights)) < 1e-12);
    CHECK(trace.final_wsr_bits() >= test::two_user_grid_oracle(s) - 1e-3);
  }
}

TEST_CASE("property: monotone ascent and feasibility on random instances") {
  for (int seed = 0; seed < 10; ++seed) {
    const auto sc = test::small_scenario(300 + seed, 3, 5, 8, 2, 2, -5.0 + 2.0 * seed);
    const auto& ch = sc.channels;
    const auto params = params_for(ch);
    SolverOptions opts;
    opts.max_iters = 60;
    const auto [bf, trace] =
        solve_wmmse(ch, params, ezf_beamformer(ch, test::streams_on_serving(ch, 1), params), opts);
    for (std::size_t t = 1; t < trace.wsr_bits.size(); ++t) {
      CHECK(trace.wsr_bits[t] * std::numbers::ln2 >=
            trace.wsr_bits[t - 1] * std::numbers::ln2 - 1e-9);
    }
    for (const auto& p : trace.ap_power) {
      for (double v : p) CHECK(v <= 1.0 + 1e-8);
    }
    CHECK(trace.large_factorizations > 0);
  }
}

TEST_CASE("a stationary start stops within two sweeps") {
  const auto sc = test::small_scenario(12);
  const auto& ch = sc.channels;
  const auto params = params_for(ch);
  SolverOptions opts;
  opts.rel_tol = 1e-12;
  opts.max_iters = 2000;
  const auto [bf, trace] =
      solve_wmmse(ch, params, ezf_beamformer(ch, test::streams_on_serving(ch, 1), params), opts);
  SolverOptions again;
  again.rel_tol = 1e-6;
  const auto [bf2, trace2] = solve_wmmse(ch, params, bf, again);
  CHECK(trace2.iterations() <= 2);
  CHECK(std::abs(trace2.final_wsr_bits() - trace.final_wsr_bits()) < 1e-9);
}

TEST_CASE("uniform weight scaling leaves the iterates unchanged") {
  const auto sc = test::small_scenario(13);
  const auto& ch = sc.channels;
  auto params = params_for(ch);
  SolverOptions opts;
  opts.max_iters = 15;
  opts.rel_tol = 1e-15;
  const auto init = ezf_beamformer(ch, test::streams_on_serving(ch, 1), params);
  const auto [a, ta] = solve_wmmse(ch, params, init, opts);
  for (double& w : params.weights) w *= 3.7;
  const auto [b, tb] = solve_wmmse(ch, params, init, opts);
  for (int i = 0; i < ch.num_aps(); ++i) {
    for (int k = 0; k < ch.num_ues(); ++k) {
      CHECK(test::max_abs_diff(a.blocks(i, k), b.blocks(i, k)) < 1e-9);
    }
  }
}

TEST_CASE("solver input validation") {
  const auto sc = test::small_scenario(14);
  const auto& ch = sc.channels;
  const auto params = params_for(ch);
  auto init = ezf_beamformer(ch, test::streams_on_serving(ch, 1), params);
  SolverOptions bad;
  bad.max_iters = 0;
  CHECK_THROWS_AS(solve_wmmse(ch, params, init, bad), std::invalid_argument);
  const int i = ch.serving_aps(0)[0];
  init.blocks(i, 0) *= 10.0;
  CHECK_THROWS_AS(solve_wmmse(ch, params, init), std::invalid_argument);
  SystemParams short_params{{1.0}, params.power_budget};
  CHECK_THROWS_AS(solve_wmmse(ch, short_params, init), std::invalid_argument);
}
