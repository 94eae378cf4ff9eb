#include "cfmimo/streams.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "cfmimo/ezf.hpp"
#include "solver_common.hpp"

namespace cfmimo {

StreamAllocation::StreamAllocation(int num_aps, std::vector<int> rx_antennas)
    : bits_(num_aps, rx_antennas.size()) {
  for (int i = 0; i < num_aps; ++i) {
    for (std::size_t k = 0; k < rx_antennas.size(); ++k) {
      bits_(i, k).assign(rx_antennas[k], false);
    }
  }
}

std::vector<int> StreamAllocation::active(int i, int k) const {
  std::vector<int> out;
  const auto& b = bits_(i, k);
  for (int m = 0; m < static_cast<int>(b.size()); ++m) {
    if (b[m]) out.push_back(m);
  }
  return out;
}

int StreamAllocation::count(int i, int k) const {
  const auto& b = bits_(i, k);
  return static_cast<int>(std::count(b.begin(), b.end(), true));
}

int StreamAllocation::ue_total(int k) const {
  int d = 0;
  for (int i = 0; i < num_aps(); ++i) d += count(i, k);
  return d;
}

StreamCounts StreamAllocation::counts() const {
  StreamCounts d(num_aps(), num_ues(), 0);
  for (int i = 0; i < num_aps(); ++i) {
    for (int k = 0; k < num_ues(); ++k) d(i, k) = count(i, k);
  }
  return d;
}

int StreamAllocation::total() const { return detail::total_streams(counts()); }

StreamAllocation init_allocation(const ChannelSet& channels, const RMat& distances_km) {
  if (distances_km.rows() != channels.num_aps() || distances_km.cols() != channels.num_ues()) {
    throw std::invalid_argument("init_allocation: distance matrix does not match");
  }
  StreamAllocation alloc(channels.num_aps(), channels.rx_antenna_counts());
  for (int k = 0; k < channels.num_ues(); ++k) {
    std::vector<int> aps = channels.serving_aps(k);
    if (aps.empty()) continue;
    std::stable_sort(aps.begin(), aps.end(), [&](int a, int b) {
      return distances_km(a, k) < distances_km(b, k);
    });
    const int n = channels.rx_antennas(k);
    const int base = n / static_cast<int>(aps.size());
    const int extra = n % static_cast<int>(aps.size());
    for (int r = 0; r < static_cast<int>(aps.size()); ++r) {
      const int d = base + (r < extra ? 1 : 0);
      for (int m = 0; m < d; ++m) alloc.set(aps[r], k, m);
    }
  }
  return alloc;
}

StreamAllocation random_allocation(const ChannelSet& channels, Rng& rng) {
  StreamAllocation alloc(channels.num_aps(), channels.rx_antenna_counts());
  for (int k = 0; k < channels.num_ues(); ++k) {
    const auto& aps = channels.serving_aps(k);
    const int n = channels.rx_antennas(k);
    std::vector<int> slots(aps.size() * n);
    std::iota(slots.begin(), slots.end(), 0);
    // Partial Fisher-Yates: the first n slots are a uniform n-subset.
    const int take = std::min<int>(n, static_cast<int>(slots.size()));
    for (int j = 0; j < take; ++j) {
      const auto r = j + static_cast<int>(rng.below(slots.size() - j));
      std::swap(slots[j], slots[r]);
    }
    for (int j = 0; j < take; ++j) alloc.set(aps[slots[j] / n], k, slots[j] % n);
  }
  return alloc;
}

StreamAllocation uniform_allocation(const ChannelSet& channels, int per_link) {
  StreamAllocation alloc(channels.num_aps(), channels.rx_antenna_counts());
  for (int k = 0; k < channels.num_ues(); ++k) {
    if (per_link < 0 || per_link > channels.rx_antennas(k)) {
      throw std::invalid_argument("uniform_allocation: streams per link must be in [0, N_k]");
    }
    for (int i : channels.serving_aps(k)) {
      for (int m = 0; m < per_link; ++m) alloc.set(i, k, m);
    }
  }
  return alloc;
}

StreamAllocation full_allocation(const ChannelSet& channels) {
  StreamAllocation alloc(channels.num_aps(), channels.rx_antenna_counts());
  for (int k = 0; k < channels.num_ues(); ++k) {
    for (int i : channels.serving_aps(k)) {
      for (int m = 0; m < channels.rx_antennas(k); ++m) alloc.set(i, k, m);
    }
  }
  return alloc;
}

void check_allocation(const ChannelSet& channels, const StreamAllocation& alloc,
                      bool enforce_limit) {
  if (alloc.num_aps() != channels.num_aps() || alloc.num_ues() != channels.num_ues()) {
    throw std::invalid_argument("allocation does not match the channel set");
  }
  for (int k = 0; k < channels.num_ues(); ++k) {
    if (alloc.rx_antennas(k) != channels.rx_antennas(k)) {
      throw std::invalid_argument("allocation width must equal N_k");
    }
    for (int i = 0; i < channels.num_aps(); ++i) {
      if (alloc.count(i, k) > 0 && !channels.serves(i, k)) {
        throw std::invalid_argument("allocation sets bits on a non-serving pair");
      }
    }
    if (enforce_limit && alloc.ue_total(k) > channels.rx_antennas(k)) {
      throw std::invalid_argument("allocation exceeds N_k receive streams for UE " +
                                  std::to_string(k));
    }
  }
}

LowDimBeamformer to_virtual(const ChannelSet& channels, const LowDimBeamformer& compact,
                            const StreamAllocation& alloc) {
  LowDimBeamformer v;
  v.blocks = PairGrid<CMat>(channels.num_aps(), channels.num_ues());
  for (int i = 0; i < channels.num_aps(); ++i) {
    for (int k = 0; k < channels.num_ues(); ++k) {
      if (!channels.serves(i, k)) {
        v.blocks(i, k).resize(channels.total_rx(), 0);
        continue;
      }
      const auto act = alloc.active(i, k);
      if (static_cast<int>(compact.blocks(i, k).cols()) != static_cast<int>(act.size())) {
        throw std::invalid_argument("to_virtual: column count differs from the allocation");
      }
      CMat full = CMat::Zero(channels.total_rx(), channels.rx_antennas(k));
      for (std::size_t c = 0; c < act.size(); ++c) full.col(act[c]) = compact.blocks(i, k).col(c);
      v.blocks(i, k) = std::move(full);
    }
  }
  return v;
}

LowDimBeamformer to_compact(const LowDimBeamformer& virt, const StreamAllocation& alloc) {
  LowDimBeamformer x;
  x.blocks = PairGrid<CMat>(virt.num_aps(), virt.num_ues());
  for (int i = 0; i < static_cast<int>(virt.num_aps()); ++i) {
    for (int k = 0; k < static_cast<int>(virt.num_ues()); ++k) {
      const CMat& vb = virt.blocks(i, k);
      const auto act = alloc.active(i, k);
      if (!act.empty() && vb.cols() != alloc.rx_antennas(k)) {
        throw std::invalid_argument("to_compact: fixed-width block must have N_k columns");
      }
      CMat out(vb.rows(), static_cast<Eigen::Index>(act.size()));
      for (std::size_t c = 0; c < act.size(); ++c) out.col(c) = vb.col(act[c]);
      x.blocks(i, k) = std::move(out);
    }
  }
  return x;
}

LowDimBeamformer update_x_streams(const ChannelSet& channels, const MmseAux& aux,
                                  const StreamAllocation& alloc, const SystemParams& params,
                                  const SolverOptions& opts) {
  check_allocation(channels, alloc, false);
  const LowDimUpdate upd = update_x(channels, aux, alloc.counts(), params, opts);
  return to_virtual(channels, upd.x, alloc);
}

std::vector<RVec> compute_psi(const ChannelSet& channels, const LowDimBeamformer& x,
                              const MmseAux& aux, const StreamAllocation& alloc,
                              const std::vector<double>& weights) {
  const StreamCounts counts = alloc.counts();
  const CMat dm = detail::weighted_precision(channels, aux, weights);
  std::vector<RVec> psi(channels.num_ues());
  for (int k = 0; k < channels.num_ues(); ++k) {
    const auto& aps = channels.serving_aps(k);
    const int n = channels.rx_antennas(k);
    const int off_k = channels.ue_offset(k);
    psi[k] = RVec::Zero(static_cast<Eigen::Index>(aps.size()) * n);
    if (aux.u[k].cols() != alloc.ue_total(k)) {
      throw std::invalid_argument("compute_psi: receive filter does not match the allocation");
    }
    const CMat wu = aux.u[k].cols() == 0 ? CMat(0, n) : CMat(aux.w[k] * aux.u[k].adjoint());
    for (std::size_t pos = 0; pos < aps.size(); ++pos) {
      const int i = aps[pos];
      const auto act = alloc.active(i, k);
      if (act.empty()) continue;
      const CMat& xb = x.blocks(i, k);
      if (xb.cols() != static_cast<Eigen::Index>(act.size())) {
        throw std::invalid_argument("compute_psi: beamformer does not match the allocation");
      }
      const CMat e = channels.gram(i) * xb;  // column c holds H_{i,*} p_c
      const int base = detail::stream_offset(counts, i, k);
      for (std::size_t c = 0; c < act.size(); ++c) {
        const double quad = e.col(c).dot(dm * e.col(c)).real();
        const cdouble lin = (wu.row(base + c) * e.col(c).segment(off_k, n)).value();
        psi[k](pos * n + act[c]) = quad - 2.0 * weights[k] * lin.real();
      }
    }
  }
  return psi;
}

std::vector<std::vector<bool>> update_l(const std::vector<RVec>& psi,
                                        std::span<const int> max_streams) {
  if (psi.size() != max_streams.size()) {
    throw std::invalid_argument("update_l: one stream limit per UE required");
  }
  constexpr double kZeroBand = 1e-12;
  std::vector<std::vector<bool>> flags(psi.size());
  for (std::size_t k = 0; k < psi.size(); ++k) {
    const auto& p = psi[k];
    flags[k].assign(p.size(), false);
    std::vector<int> neg;
    for (int j = 0; j < p.size(); ++j) {
      if (p(j) < -kZeroBand) neg.push_back(j);
    }
    std::stable_sort(neg.begin(), neg.end(), [&](int a, int b) { return p(a) < p(b); });
    const int take = std::min<int>(std::max(max_streams[k], 0), static_cast<int>(neg.size()));
    for (int j = 0; j < take; ++j) flags[k][neg[j]] = true;
  }
  return flags;
}

StreamAllocation allocation_from_flags(const ChannelSet& channels,
                                       const std::vector<std::vector<bool>>& flags) {
  if (static_cast<int>(flags.size()) != channels.num_ues()) {
    throw std::invalid_argument("one flag vector per UE required");
  }
  StreamAllocation alloc(channels.num_aps(), channels.rx_antenna_counts());
  for (int k = 0; k < channels.num_ues(); ++k) {
    const auto& aps = channels.serving_aps(k);
    const int n = channels.rx_antennas(k);
    if (flags[k].size() != aps.size() * static_cast<std::size_t>(n)) {
      throw std::invalid_argument("flag vector length must be |I_k| N_k");
    }
    for (std::size_t j = 0; j < flags[k].size(); ++j) {
      if (flags[k][j]) alloc.set(aps[j / n], k, static_cast<int>(j % n));
    }
  }
  return alloc;
}

namespace {

/// Drops the columns of `x` whose bits are clear in `next` (a subset of `prev`).
LowDimBeamformer restrict_columns(const LowDimBeamformer& x, const StreamAllocation& prev,
                                  const StreamAllocation& next) {
  LowDimBeamformer out;
  out.blocks = PairGrid<CMat>(x.num_aps(), x.num_ues());
  for (int i = 0; i < prev.num_aps(); ++i) {
    for (int k = 0; k < prev.num_ues(); ++k) {
      const auto act = prev.active(i, k);
      std::vector<Eigen::Index> keep;
      for (std::size_t c = 0; c < act.size(); ++c) {
        if (next.bit(i, k, act[c])) keep.push_back(static_cast<Eigen::Index>(c));
      }
      for (int m = 0; m < next.rx_antennas(k); ++m) {
        if (next.bit(i, k, m) && !prev.bit(i, k, m)) {
          throw std::logic_error("stream step re-activated a cleared stream");
        }
      }
      out.blocks(i, k) = x.blocks(i, k)(Eigen::all, keep);
    }
  }
  return out;
}

}  // namespace

LsaResult solve_rwmmse_lsa(const ChannelSet& channels, const SystemParams& params,
                           const StreamAllocation& init_alloc,
                           const LowDimBeamformer& init_x, const SolverOptions& opts,
                           const LsaOptions& lsa) {
  opts.validate();
  detail::check_params(channels, params);
  check_allocation(channels, init_alloc, false);

  LsaResult res;
  res.alloc = init_alloc;
  bool fixed_width = true;
  for (int i = 0; i < channels.num_aps() && fixed_width; ++i) {
    for (int k = 0; k < channels.num_ues(); ++k) {
      const auto cols = init_x.blocks(i, k).cols();
      if (channels.serves(i, k) ? cols != channels.rx_antennas(k) : cols != 0) {
        fixed_width = false;
        break;
      }
    }
  }
  const StreamCounts init_counts = init_alloc.counts();
  res.x = fixed_width && init_x.stream_counts() != init_counts ? to_compact(init_x, init_alloc)
                                                               : init_x;
  if (res.x.stream_counts() != init_counts) {
    throw std::invalid_argument("initial beamformer does not match the initial allocation");
  }

  SolveTrace& trace = res.trace;
  trace.algorithm = Algorithm::kRwmmseLsa;
  trace.init_tag = "given";
  for (int i = 0; i < channels.num_aps(); ++i) {
    if (ap_power(i, channels, res.x) > params.power_budget[i] * (1.0 + 1e-8)) {
      throw std::invalid_argument("initial beamformer violates the power budget of AP " +
                                  std::to_string(i));
    }
  }
  auto eff = detail::effective_links(channels, res.x);
  detail::record_state(trace, detail::wsr_nats(channels, eff, params.weights),
                       ap_powers(channels, res.x), params, res.alloc.total());

  const std::vector<int> limits = channels.rx_antenna_counts();
  bool start_feasible = true;
  for (int k = 0; k < channels.num_ues(); ++k) {
    start_feasible = start_feasible && init_alloc.ue_total(k) <= limits[k];
  }
  if (!start_feasible && !lsa.allocate_streams) {
    throw std::invalid_argument("allocation exceeds N_k while the stream step is disabled");
  }
  if (lsa.warmup_sweeps < 0 || (lsa.allocate_streams && lsa.warmup_sweeps >= opts.max_iters)) {
    throw std::invalid_argument("warmup_sweeps must be in [0, max_iters)");
  }
  // Termination is only allowed once the first stream step has run and one
  // more sweep has been taken on the resulting allocation.
  const int first_stream_step = lsa.warmup_sweeps + 1;
  const int settle_until = lsa.allocate_streams ? first_stream_step + 1 : 0;
  for (int t = 1; t <= opts.max_iters; ++t) {
    const auto start = detail::Clock::now();
    try {
      MmseAux aux;
      aux.u = detail::update_u(channels, eff);
      aux.w = detail::update_w(channels, eff, aux.u);
      trace.small_factorizations += 2 * channels.num_ues();
      LowDimUpdate upd = update_x(channels, aux, res.alloc.counts(), params, opts);
      trace.large_factorizations += upd.large_factorizations;
      trace.small_factorizations += upd.small_factorizations;
      trace.multipliers.push_back(upd.multipliers);
      res.x = std::move(upd.x);
      if (lsa.allocate_streams && t > lsa.warmup_sweeps) {
        const auto psi = compute_psi(channels, res.x, aux, res.alloc, params.weights);
        StreamAllocation next = allocation_from_flags(channels, update_l(psi, limits));
        res.x = restrict_columns(res.x, res.alloc, next);
        res.alloc = std::move(next);
      }
    } catch (const NumericError& e) {
      throw SolverError(e.what(), trace);
    }
    trace.sweep_seconds.push_back(detail::seconds_since(start));
    eff = detail::effective_links(channels, res.x);
    detail::record_state(trace, detail::wsr_nats(channels, eff, params.weights),
                         ap_powers(channels, res.x), params, res.alloc.total());
    if (lsa.allocate_streams && t == first_stream_step && !start_feasible) {
      trace.ascent_from = t;
    }
    if (t >= settle_until && detail::converged(trace, opts.rel_tol)) {
      trace.converged = true;
      break;
    }
  }
  // The CU downloads the final X once; count with the final allocation.
  trace.interaction = interaction_count(Algorithm::kRwmmseLsa, channels.tx_antenna_counts(),
                                        channels.rx_antenna_counts(), res.alloc.counts());
  return res;
}

LusResult solve_rwmmse_lus(const ChannelSet& channels, const SystemParams& params,
                           const SolverOptions& opts, const LsaOptions& lsa_opts) {
  std::vector<int> all(channels.num_aps());
  std::iota(all.begin(), all.end(), 0);
  LusResult out;
  out.channels = channels.with_serving_sets(
      std::vector<std::vector<int>>(channels.num_ues(), all));
  const StreamAllocation init = full_allocation(out.channels);
  const LowDimBeamformer x0 = ezf_lowdim(out.channels, init.counts(), params);

  LsaResult lsa = solve_rwmmse_lsa(out.channels, params, init, x0, opts, lsa_opts);
  lsa.trace.algorithm = Algorithm::kRwmmseLus;
  lsa.trace.init_tag = "local-ezf";
  lsa.trace.interaction = interaction_count(Algorithm::kRwmmseLus,
                                            out.channels.tx_antenna_counts(),
                                            out.channels.rx_antenna_counts(),
                                            lsa.alloc.counts());
  out.serving_sets.resize(channels.num_ues());
  for (int k = 0; k < channels.num_ues(); ++k) {
    for (int i = 0; i < channels.num_aps(); ++i) {
      if (lsa.alloc.count(i, k) > 0) out.serving_sets[k].push_back(i);
    }
  }
  out.x = std::move(lsa.x);
  out.alloc = std::move(lsa.alloc);
  out.trace = std::move(lsa.trace);
  return out;
}

}  // namespace cfmimo
