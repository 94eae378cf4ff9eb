#include "cfmimo/rwmmse.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "solver_common.hpp"

namespace cfmimo {

Beamformer expand(const ChannelSet& channels, const LowDimBeamformer& x) {
  if (static_cast<int>(x.num_aps()) != channels.num_aps() ||
      static_cast<int>(x.num_ues()) != channels.num_ues()) {
    throw std::invalid_argument("expand: beamformer does not match the channel set");
  }
  Beamformer bf;
  bf.blocks = PairGrid<CMat>(channels.num_aps(), channels.num_ues());
  for (int i = 0; i < channels.num_aps(); ++i) {
    for (int k = 0; k < channels.num_ues(); ++k) {
      const CMat& xb = x.blocks(i, k);
      if (xb.cols() == 0) {
        bf.blocks(i, k).resize(channels.tx_antennas(i), 0);
        continue;
      }
      if (xb.rows() != channels.total_rx()) {
        throw std::invalid_argument("expand: X row count must equal sum N_k");
      }
      bf.blocks(i, k) = channels.stacked(i).adjoint() * xb;
    }
  }
  return bf;
}

std::vector<CMat> update_u_lowdim(const ChannelSet& channels, const LowDimBeamformer& x) {
  return detail::update_u(channels, detail::effective_links(channels, x));
}

std::vector<CMat> update_w_lowdim(const ChannelSet& channels, const LowDimBeamformer& x,
                                  const std::vector<CMat>& u) {
  return detail::update_w(channels, detail::effective_links(channels, x), u);
}

LowDimUpdate update_x(const ChannelSet& channels, const MmseAux& aux,
                      const StreamCounts& streams, const SystemParams& params,
                      const SolverOptions& opts) {
  detail::check_params(channels, params);
  detail::check_streams(channels, streams);
  if (static_cast<int>(aux.u.size()) != channels.num_ues() ||
      static_cast<int>(aux.w.size()) != channels.num_ues()) {
    throw std::invalid_argument("one U and one W per UE required");
  }
  const CMat dm = detail::weighted_precision(channels, aux, params.weights);

  LowDimUpdate out;
  out.x.blocks = PairGrid<CMat>(channels.num_aps(), channels.num_ues());
  out.multipliers.assign(channels.num_aps(), 0.0);
  for (int i = 0; i < channels.num_aps(); ++i) {
    // G_i = F F^H with F = V S^{1/2}; in the coordinates Y = F^H X the
    // subproblem is (F^H D F + lambda I) Y = F^H Z and the power is ||Y||^2.
    const CMat& basis = channels.gram_basis(i);
    const RVec& s = channels.gram_eigvals(i);
    const CMat f = basis * s.cwiseSqrt().asDiagonal();
    const CMat c = detail::hermitian_part(f.adjoint() * dm * f);
    const CMat rhs = f.adjoint() * detail::weighted_targets(channels, aux, streams, params.weights, i);
    const detail::ShiftedSystem sys(c, rhs, opts.ridge_eps);
    ++out.small_factorizations;
    const double lambda = bisect_multiplier([&](double m) { return sys.power(m); },
                                            params.power_budget[i], opts.bisect_tol);
    out.multipliers[i] = lambda;
    const CMat x_stack = basis * (s.cwiseSqrt().cwiseInverse().asDiagonal() * sys.solve(lambda));
    detail::scatter_columns(x_stack, streams, i, channels.total_rx(), out.x.blocks);
  }
  return out;
}

std::pair<LowDimBeamformer, SolveTrace> solve_rwmmse(const ChannelSet& channels,
                                                     const SystemParams& params,
                                                     const LowDimBeamformer& init,
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
  trace.algorithm = Algorithm::kRwmmse;
  trace.init_tag = "given";
  trace.interaction = interaction_count(Algorithm::kRwmmse, channels.tx_antenna_counts(),
                                        channels.rx_antenna_counts(), streams);

  LowDimBeamformer x = init;
  auto eff = detail::effective_links(channels, x);
  for (int i = 0; i < channels.num_aps(); ++i) {
    if (ap_power(i, channels, x) > params.power_budget[i] * (1.0 + 1e-8)) {
      throw std::invalid_argument("initial beamformer violates the power budget of AP " +
                                  std::to_string(i));
    }
  }
  detail::record_state(trace, detail::wsr_nats(channels, eff, params.weights),
                       ap_powers(channels, x), params, n_streams);

  for (int t = 1; t <= opts.max_iters; ++t) {
    const auto start = detail::Clock::now();
    LowDimUpdate upd;
    try {
      MmseAux aux;
      aux.u = detail::update_u(channels, eff);
      aux.w = detail::update_w(channels, eff, aux.u);
      trace.small_factorizations += 2 * channels.num_ues();
      upd = update_x(channels, aux, streams, params, opts);
    } catch (const NumericError& e) {
      throw SolverError(e.what(), trace);
    }
    trace.sweep_seconds.push_back(detail::seconds_since(start));
    trace.large_factorizations += upd.large_factorizations;
    trace.small_factorizations += upd.small_factorizations;
    trace.multipliers.push_back(upd.multipliers);
    x = std::move(upd.x);
    eff = detail::effective_links(channels, x);
    detail::record_state(trace, detail::wsr_nats(channels, eff, params.weights),
                         ap_powers(channels, x), params, n_streams);
    if (detail::converged(trace, opts.rel_tol)) {
      trace.converged = true;
      break;
    }
  }
  return {std::move(x), std::move(trace)};
}

CrosscheckReport wmmse_lowdim_crosscheck(const ChannelSet& channels, const MmseAux& aux,
                                         const StreamCounts& streams,
                                         const SystemParams& params,
                                         const std::vector<double>& mu, double tol) {
  const Beamformer reference = update_p_fixed(channels, aux, streams, params, mu);

  const int num_ues = channels.num_ues();
  const int total_rx = channels.total_rx();
  std::vector<int> stream_base(num_ues + 1, 0);
  for (int k = 0; k < num_ues; ++k) {
    stream_base[k + 1] = stream_base[k] + static_cast<int>(aux.u[k].cols());
  }
  const int total_streams = stream_base[num_ues];

  CMat u_blk = CMat::Zero(total_rx, total_streams);
  CMat e_blk = CMat::Zero(total_streams, total_streams);  // W^{-1}
  RVec omega(total_streams);
  for (int k = 0; k < num_ues; ++k) {
    const int d = stream_base[k + 1] - stream_base[k];
    if (d == 0) continue;
    u_blk.block(channels.ue_offset(k), stream_base[k], channels.rx_antennas(k), d) = aux.u[k];
    e_blk.block(stream_base[k], stream_base[k], d, d) =
        aux.w[k].partialPivLu().solve(CMat::Identity(d, d));
    omega.segment(stream_base[k], d).setConstant(params.weights[k]);
  }

  CrosscheckReport report;
  report.x.resize(channels.num_aps());
  for (int i = 0; i < channels.num_aps(); ++i) {
    int s_i = 0;
    for (int k = 0; k < num_ues; ++k) s_i += streams(i, k);
    // Omega Xi_i^H: selects AP i's columns from the global stream index.
    CMat sel = CMat::Zero(total_streams, s_i);
    int c = 0;
    for (int k = 0; k < num_ues; ++k) {
      const int d = streams(i, k);
      const int off = stream_base[k] + detail::stream_offset(streams, i, k);
      for (int j = 0; j < d; ++j) sel(off + j, c++) = params.weights[k];
    }
    const CMat m = omega.asDiagonal() * (u_blk.adjoint() * channels.gram(i) * u_blk) +
                   mu[i] * e_blk;
    report.x[i] = u_blk * m.completeOrthogonalDecomposition().solve(sel);

    const CMat p_i = channels.stacked(i).adjoint() * report.x[i];
    c = 0;
    for (int k = 0; k < num_ues; ++k) {
      const int d = streams(i, k);
      if (d == 0) continue;
      const double err = (p_i.middleCols(c, d) - reference.blocks(i, k)).cwiseAbs().maxCoeff();
      report.max_abs_error = std::max(report.max_abs_error, err);
      c += d;
    }
  }
  report.ok = report.max_abs_error <= tol;
  std::ostringstream msg;
  msg << "max |Hbar^H X - P| = " << report.max_abs_error << (report.ok ? " <= " : " > ") << tol;
  report.message = msg.str();
  return report;
}

}  // namespace cfmimo
