#include "cfmimo/wmmse.hpp"

#include <stdexcept>

#include "solver_common.hpp"

namespace cfmimo {

void SolverOptions::validate() const {
  if (max_iters < 1) throw std::invalid_argument("max_iters must be positive");
  if (!(rel_tol > 0.0)) throw std::invalid_argument("rel_tol must be positive");
  if (!(bisect_tol > 0.0)) throw std::invalid_argument("bisect_tol must be positive");
  if (!(ridge_eps > 0.0)) throw std::invalid_argument("ridge_eps must be positive");
}

namespace detail {

void check_params(const ChannelSet& channels, const SystemParams& params) {
  if (static_cast<int>(params.weights.size()) != channels.num_ues()) {
    throw std::invalid_argument("one weight per UE required");
  }
  if (static_cast<int>(params.power_budget.size()) != channels.num_aps()) {
    throw std::invalid_argument("one power budget per AP required");
  }
  for (double p : params.power_budget) {
    if (!(p > 0.0)) throw std::invalid_argument("power budgets must be positive");
  }
}

void check_streams(const ChannelSet& channels, const StreamCounts& streams) {
  if (static_cast<int>(streams.rows()) != channels.num_aps() ||
      static_cast<int>(streams.cols()) != channels.num_ues()) {
    throw std::invalid_argument("stream grid does not match the channel set");
  }
  for (int k = 0; k < channels.num_ues(); ++k) {
    for (int i = 0; i < channels.num_aps(); ++i) {
      if (streams(i, k) < 0) throw std::invalid_argument("negative stream count");
      if (streams(i, k) > 0 && !channels.serves(i, k)) {
        throw std::invalid_argument("streams assigned to a non-serving pair");
      }
    }
  }
}

std::vector<CMat> update_u(const ChannelSet& channels, const EffectiveLinks& eff) {
  std::vector<CMat> u(channels.num_ues());
  for (int k = 0; k < channels.num_ues(); ++k) {
    const CMat hp = desired_link(k, channels, eff);
    if (hp.cols() == 0) {
      u[k].resize(channels.rx_antennas(k), 0);
      continue;
    }
    const CMat total =
        hermitian_part(interference_plus_noise(k, channels, eff) + hp * hp.adjoint());
    Eigen::LLT<CMat> llt(total);
    if (llt.info() != Eigen::Success) throw NumericError("update_u: covariance not positive definite");
    u[k] = llt.solve(hp);
  }
  return u;
}

std::vector<CMat> update_w(const ChannelSet& channels, const EffectiveLinks& eff,
                           const std::vector<CMat>& u) {
  if (static_cast<int>(u.size()) != channels.num_ues()) {
    throw std::invalid_argument("update_w: one receive filter per UE required");
  }
  std::vector<CMat> w(channels.num_ues());
  for (int k = 0; k < channels.num_ues(); ++k) {
    const CMat hp = desired_link(k, channels, eff);
    if (u[k].rows() != hp.rows() || u[k].cols() != hp.cols()) {
      throw std::invalid_argument("update_w: receive filter dimensions do not match");
    }
    const auto d = hp.cols();
    if (d == 0) {
      w[k].resize(0, 0);
      continue;
    }
    const CMat e = hermitian_part(CMat::Identity(d, d) - u[k].adjoint() * hp);
    Eigen::LLT<CMat> llt(e);
    if (llt.info() != Eigen::Success) throw NumericError("update_w: MSE matrix is singular");
    w[k] = hermitian_part(llt.solve(CMat::Identity(d, d)));
  }
  return w;
}

CMat weighted_precision(const ChannelSet& channels, const MmseAux& aux,
                        const std::vector<double>& weights) {
  const int n = channels.total_rx();
  CMat dm = CMat::Zero(n, n);
  for (int l = 0; l < channels.num_ues(); ++l) {
    if (aux.u[l].cols() == 0) continue;
    const int nl = channels.rx_antennas(l);
    const int off = channels.ue_offset(l);
    dm.block(off, off, nl, nl) =
        hermitian_part(weights[l] * aux.u[l] * aux.w[l] * aux.u[l].adjoint());
  }
  return dm;
}

CMat weighted_targets(const ChannelSet& channels, const MmseAux& aux,
                      const StreamCounts& streams, const std::vector<double>& weights, int i) {
  int cols = 0;
  for (int k = 0; k < channels.num_ues(); ++k) cols += streams(i, k);
  CMat z = CMat::Zero(channels.total_rx(), cols);
  int c = 0;
  for (int k = 0; k < channels.num_ues(); ++k) {
    const int d = streams(i, k);
    if (d == 0) continue;
    const int off = stream_offset(streams, i, k);
    if (aux.u[k].cols() < off + d) {
      throw std::invalid_argument("receive filter has fewer columns than the stream grid");
    }
    z.block(channels.ue_offset(k), c, channels.rx_antennas(k), d) =
        weights[k] * (aux.u[k] * aux.w[k].middleCols(off, d));
    c += d;
  }
  return z;
}

void scatter_columns(const CMat& stack, const StreamCounts& streams, int i, int rows,
                     PairGrid<CMat>& out) {
  int c = 0;
  for (std::size_t k = 0; k < streams.cols(); ++k) {
    const int d = streams(i, k);
    if (d == 0) {
      out(i, k).resize(rows, 0);
      continue;
    }
    out(i, k) = stack.middleCols(c, d);
    c += d;
  }
}

}  // namespace detail

namespace {

detail::ShiftedSystem wmmse_system(const ChannelSet& channels, const CMat& dm,
                                   const MmseAux& aux, const StreamCounts& streams,
                                   const SystemParams& params, const SolverOptions& opts, int i) {
  const CMat& hbar = channels.stacked(i);
  const CMat q = detail::hermitian_part(hbar.adjoint() * dm * hbar);
  const CMat b = hbar.adjoint() * detail::weighted_targets(channels, aux, streams, params.weights, i);
  return detail::ShiftedSystem(q, b, opts.ridge_eps);
}

void check_aux(const ChannelSet& channels, const MmseAux& aux) {
  if (static_cast<int>(aux.u.size()) != channels.num_ues() ||
      static_cast<int>(aux.w.size()) != channels.num_ues()) {
    throw std::invalid_argument("one U and one W per UE required");
  }
}

}  // namespace

std::vector<CMat> update_u(const ChannelSet& channels, const Beamformer& bf) {
  return detail::update_u(channels, detail::effective_links(channels, bf));
}

std::vector<CMat> update_w(const ChannelSet& channels, const Beamformer& bf,
                           const std::vector<CMat>& u) {
  return detail::update_w(channels, detail::effective_links(channels, bf), u);
}

BeamformerUpdate update_p(const ChannelSet& channels, const MmseAux& aux,
                          const StreamCounts& streams, const SystemParams& params,
                          const SolverOptions& opts) {
  detail::check_params(channels, params);
  detail::check_streams(channels, streams);
  check_aux(channels, aux);
  const CMat dm = detail::weighted_precision(channels, aux, params.weights);

  BeamformerUpdate out;
  out.bf.blocks = PairGrid<CMat>(channels.num_aps(), channels.num_ues());
  out.multipliers.assign(channels.num_aps(), 0.0);
  for (int i = 0; i < channels.num_aps(); ++i) {
    const auto sys = wmmse_system(channels, dm, aux, streams, params, opts, i);
    ++out.large_factorizations;
    const double mu = bisect_multiplier([&](double m) { return sys.power(m); },
                                        params.power_budget[i], opts.bisect_tol);
    out.multipliers[i] = mu;
    detail::scatter_columns(sys.solve(mu), streams, i, channels.tx_antennas(i), out.bf.blocks);
  }
  return out;
}

Beamformer update_p_fixed(const ChannelSet& channels, const MmseAux& aux,
                          const StreamCounts& streams, const SystemParams& params,
                          const std::vector<double>& mu, const SolverOptions& opts) {
  detail::check_params(channels, params);
  detail::check_streams(channels, streams);
  check_aux(channels, aux);
  if (static_cast<int>(mu.size()) != channels.num_aps()) {
    throw std::invalid_argument("one multiplier per AP required");
  }
  const CMat dm = detail::weighted_precision(channels, aux, params.weights);
  Beamformer bf;
  bf.blocks = PairGrid<CMat>(channels.num_aps(), channels.num_ues());
  for (int i = 0; i < channels.num_aps(); ++i) {
    const auto sys = wmmse_system(channels, dm, aux, streams, params, opts, i);
    detail::scatter_columns(sys.solve(mu[i]), streams, i, channels.tx_antennas(i), bf.blocks);
  }
  return bf;
}

std::pair<Beamformer, SolveTrace> solve_wmmse(const ChannelSet& channels,
                                              const SystemParams& params,
                                              const Beamformer& init,
                                              const SolverOptions& opts) {
  opts.validate();
  detail::check_params(channels, params);
  if (static_cast<int>(init.num_aps()) != channels.num_aps() ||
      static_cast<int>(init.num_ues()) != channels.num_ues()) {
    throw std::invalid_argument("initial beamformer does not match the channel set");
  }
  const StreamCounts streams = init.stream_counts();
  detail::check_streams(channels, streams);
  const int n_streams = detail::total_streams(streams);

  SolveTrace trace;
  trace.algorithm = Algorithm::kWmmse;
  trace.init_tag = "given";
  trace.interaction = interaction_count(Algorithm::kWmmse, channels.tx_antenna_counts(),
                                        channels.rx_antenna_counts(), streams);

  Beamformer bf = init;
  auto eff = detail::effective_links(channels, bf);
  for (int i = 0; i < channels.num_aps(); ++i) {
    if (ap_power(i, bf) > params.power_budget[i] * (1.0 + 1e-8)) {
      throw std::invalid_argument("initial beamformer violates the power budget of AP " +
                                  std::to_string(i));
    }
  }
  detail::record_state(trace, detail::wsr_nats(channels, eff, params.weights), ap_powers(bf),
                       params, n_streams);

  for (int t = 1; t <= opts.max_iters; ++t) {
    const auto start = detail::Clock::now();
    BeamformerUpdate upd;
    try {
      MmseAux aux;
      aux.u = detail::update_u(channels, eff);
      aux.w = detail::update_w(channels, eff, aux.u);
      trace.small_factorizations += 2 * channels.num_ues();
      upd = update_p(channels, aux, streams, params, opts);
    } catch (const NumericError& e) {
      throw SolverError(e.what(), trace);
    }
    trace.sweep_seconds.push_back(detail::seconds_since(start));
    trace.large_factorizations += upd.large_factorizations;
    trace.multipliers.push_back(upd.multipliers);
    bf = std::move(upd.bf);
    eff = detail::effective_links(channels, bf);
    detail::record_state(trace, detail::wsr_nats(channels, eff, params.weights), ap_powers(bf),
                         params, n_streams);
    if (detail::converged(trace, opts.rel_tol)) {
      trace.converged = true;
      break;
    }
  }
  return {std::move(bf), std::move(trace)};
}

}  // namespace cfmimo
