#include "cfmimo/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "cfmimo/channel_io.hpp"
#include "cfmimo/ezf.hpp"
#include "cfmimo/metrics.hpp"
#include "cfmimo/rwmmse.hpp"

namespace cfmimo {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& value) {
  std::vector<T> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !(is >> std::ws).eof()) {
      throw std::invalid_argument("config: bad value for " + key + ": '" + item + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("config: empty value for " + key);
  return out;
}

template <class T>
T parse_one(const std::string& key, const std::string& value) {
  const auto v = parse_list<T>(key, value);
  if (v.size() != 1) throw std::invalid_argument("config: " + key + " takes one value");
  return v[0];
}

/// Broadcasts a single value or checks an explicit list against `count`.
template <class T>
std::vector<T> fit_list(std::vector<T> v, int count, const char* what) {
  if (v.size() == 1) return std::vector<T>(count, v[0]);
  if (static_cast<int>(v.size()) != count) {
    throw std::invalid_argument(std::string("config: ") + what + " needs 1 or " +
                                std::to_string(count) + " values");
  }
  return v;
}

struct AxisPoint {
  double snr_db;
  int m;
  int k;
};

NetworkConfig config_at(const NetworkConfig& base, const AxisPoint& p, bool sweep_m,
                        bool sweep_k) {
  NetworkConfig c = base;
  c.snr_db = p.snr_db;
  if (sweep_m) c.tx_antennas.assign(c.num_aps, p.m);
  if (sweep_k) {
    c.num_ues = p.k;
    c.rx_antennas.assign(p.k, base.rx_antennas.front());
    c.rate_weights.assign(p.k, base.rate_weights.front());
  }
  c.validate();
  return c;
}

void fill_from_trace(ResultRow& row, const SolveTrace& trace, const SystemParams& params,
                     bool timing) {
  row.iters = trace.iterations();
  row.wsr_bits = trace.final_wsr_bits();
  row.streams_total = trace.total_streams.empty() ? 0 : trace.total_streams.back();
  row.sum_power_watts = 0.0;
  row.max_ap_power_ratio = 0.0;
  if (!trace.ap_power.empty()) {
    const auto& p = trace.ap_power.back();
    for (std::size_t i = 0; i < p.size(); ++i) {
      row.sum_power_watts += p[i];
      row.max_ap_power_ratio = std::max(row.max_ap_power_ratio, p[i] / params.power_budget[i]);
    }
  }
  if (!trace.interaction.empty()) {
    row.interaction_scalars =
        std::accumulate(trace.interaction.begin(), trace.interaction.end(), 0.0) /
        static_cast<double>(trace.interaction.size());
  }
  row.wall_ms = timing ? 1e3 * std::accumulate(trace.sweep_seconds.begin(),
                                               trace.sweep_seconds.end(), 0.0)
                       : 0.0;
  row.trace = trace;
}

SolveTrace run_algorithm(Algorithm algo, const ChannelSet& ch, const SystemParams& params,
                         const StreamCounts& fixed, const ExperimentSpec& spec) {
  LsaOptions lsa;
  lsa.warmup_sweeps = spec.lsa_warmup_sweeps;
  SolveTrace trace;
  switch (algo) {
    case Algorithm::kLocalEzf: {
      const Beamformer bf = ezf_beamformer(ch, fixed, params);
      trace.algorithm = algo;
      trace.wsr_bits.push_back(weighted_sum_rate(ch, bf, params.weights));
      trace.ap_power.push_back(ap_powers(bf));
      int s = 0;
      for (std::size_t i = 0; i < fixed.rows(); ++i) {
        for (std::size_t k = 0; k < fixed.cols(); ++k) s += fixed(i, k);
      }
      trace.total_streams.push_back(s);
      trace.interaction = interaction_count(algo, ch.tx_antenna_counts(), ch.rx_antenna_counts(),
                                            fixed);
      trace.converged = true;
      break;
    }
    case Algorithm::kWmmse:
      trace = solve_wmmse(ch, params, ezf_beamformer(ch, fixed, params), spec.solver).second;
      break;
    case Algorithm::kRwmmse:
      trace = solve_rwmmse(ch, params, ezf_lowdim(ch, fixed, params), spec.solver).second;
      break;
    case Algorithm::kRwmmseLsa: {
      const StreamAllocation init = full_allocation(ch);
      trace = solve_rwmmse_lsa(ch, params, init, ezf_lowdim(ch, init.counts(), params),
                               spec.solver, lsa)
                  .trace;
      break;
    }
    case Algorithm::kRwmmseLus:
      trace = solve_rwmmse_lus(ch, params, spec.solver, lsa).trace;
      break;
  }
  trace.init_tag = "local-ezf";
  return trace;
}

}  // namespace

NetworkConfig default_config() { return NetworkConfig::uniform(4, 8, 64, 4, 2, 1.0, 0.0, 1); }

void ExperimentSpec::validate() const {
  base.validate();
  solver.validate();
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (algorithms.empty()) throw std::invalid_argument("at least one algorithm is required");
  if (lsa_warmup_sweeps < 0) throw std::invalid_argument("lsa warm-up must be >= 0");
  const bool allocating = std::any_of(algorithms.begin(), algorithms.end(), [](Algorithm a) {
    return a == Algorithm::kRwmmseLsa || a == Algorithm::kRwmmseLus;
  });
  if (allocating && lsa_warmup_sweeps >= solver.max_iters) {
    throw std::invalid_argument("lsa warm-up must be smaller than max_iters");
  }
  if (load_channels && (!tx_antennas.empty() || !num_ues.empty())) {
    throw std::invalid_argument("M and K sweeps cannot be combined with loaded channels");
  }
  for (int m : tx_antennas) {
    if (m < 1) throw std::invalid_argument("swept M values must be positive");
  }
  for (int k : num_ues) {
    if (k < 1) throw std::invalid_argument("swept K values must be positive");
  }
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const std::vector<double> snrs = spec.snr_db.empty() ? std::vector<double>{spec.base.snr_db}
                                                       : spec.snr_db;
  const std::vector<int> ms = spec.tx_antennas.empty()
                                  ? std::vector<int>{spec.base.tx_antennas.front()}
                                  : spec.tx_antennas;
  const std::vector<int> ks =
      spec.num_ues.empty() ? std::vector<int>{spec.base.num_ues} : spec.num_ues;

  std::optional<ChannelSet> loaded;
  if (spec.load_channels) loaded = load_channels(*spec.load_channels);

  ExperimentResult result;
  bool dumped = false;
  for (double snr : snrs) {
    for (int m : ms) {
      for (int k : ks) {
        const NetworkConfig cfg = config_at(spec.base, {snr, m, k}, !spec.tx_antennas.empty(),
                                            !spec.num_ues.empty());
        const SystemParams params = cfg.system_params();
        for (int t = 0; t < spec.trials; ++t) {
          ChannelSet ch;
          RMat dist;
          if (loaded) {
            ch = *loaded;
            if (!ch.has_noise()) ch.set_noise_powers(noise_power(ch, snr, cfg.noise_normalization));
            dist = effective_distances(ch);
          } else {
            NetworkConfig trial_cfg = cfg;
            trial_cfg.rng_seed = spec.base.rng_seed ^ static_cast<std::uint64_t>(t);
            Scenario sc = generate_scenario(trial_cfg);
            ch = std::move(sc.channels);
            dist = std::move(sc.topology.distances_km);
          }
          if (spec.dump_channels && !dumped) {
            dump_channels(ch, *spec.dump_channels);
            dumped = true;
          }
          const bool dims_match =
              ch.num_aps() == cfg.num_aps && ch.num_ues() == cfg.num_ues;
          const SystemParams run_params =
              !dims_match ? SystemParams{std::vector<double>(ch.num_ues(), 1.0),
                                    std::vector<double>(ch.num_aps(), params.power_budget.front())}
                     : params;
          const StreamCounts fixed = spec.streams_per_link
                                         ? uniform_allocation(ch, *spec.streams_per_link).counts()
                                         : init_allocation(ch, dist).counts();
          for (Algorithm algo : spec.algorithms) {
            ResultRow row;
            row.trial = t;
            row.algorithm = algo;
            row.snr_db = snr;
            row.m = ch.tx_antennas(0);
            row.k = ch.num_ues();
            row.n = ch.rx_antennas(0);
            row.l = static_cast<int>(ch.serving_aps(0).size());
            try {
              fill_from_trace(row, run_algorithm(algo, ch, run_params, fixed, spec), run_params,
                              spec.timing);
              row.status = row.trace.converged ? "ok" : "max_iters";
            } catch (const SolverError& e) {
              fill_from_trace(row, e.trace(), run_params, spec.timing);
              row.trace.algorithm = algo;
              row.status = "numeric_error";
            } catch (const NumericError&) {
              row.status = "numeric_error";
            }
            result.rows.push_back(std::move(row));
          }
        }
      }
    }
  }
  return result;
}

void write_rows_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << "trial,algo,snr_db,M,K,N,L,iters,wsr_bits,sum_power_watts,max_ap_power_ratio,"
        "interaction_scalars,wall_ms,streams_total,status\n";
  for (const auto& r : rows) {
    os << r.trial << ',' << to_string(r.algorithm) << ',' << num(r.snr_db) << ',' << r.m << ','
       << r.k << ',' << r.n << ',' << r.l << ',' << r.iters << ',' << num(r.wsr_bits) << ','
       << num(r.sum_power_watts) << ',' << num(r.max_ap_power_ratio) << ','
       << num(r.interaction_scalars) << ',' << num(r.wall_ms) << ',' << r.streams_total << ','
       << r.status << '\n';
  }
}

void write_summary_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  struct Acc {
    int n = 0, failures = 0;
    double sum = 0, sum_sq = 0, iters = 0, wall = 0;
  };
  using Key = std::tuple<double, int, int, std::string>;
  std::vector<Key> order;
  std::map<Key, Acc> acc;
  for (const auto& r : rows) {
    const Key key{r.snr_db, r.m, r.k, std::string(to_string(r.algorithm))};
    auto [it, fresh] = acc.try_emplace(key);
    if (fresh) order.push_back(key);
    Acc& a = it->second;
    if (r.status == "numeric_error") {
      ++a.failures;
      continue;
    }
    ++a.n;
    a.sum += r.wsr_bits;
    a.sum_sq += r.wsr_bits * r.wsr_bits;
    a.iters += r.iters;
    a.wall += r.wall_ms;
  }
  os << "snr_db,M,K,algo,trials,failures,mean_wsr_bits,se_wsr_bits,mean_iters,mean_wall_ms\n";
  for (const auto& key : order) {
    const Acc& a = acc.at(key);
    const double mean = a.n ? a.sum / a.n : 0.0;
    double se = 0.0;
    if (a.n > 1) {
      const double var = std::max(0.0, (a.sum_sq - a.n * mean * mean) / (a.n - 1));
      se = std::sqrt(var / a.n);
    }
    os << num(std::get<0>(key)) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ','
       << std::get<3>(key) << ',' << a.n << ',' << a.failures << ',' << num(mean) << ','
       << num(se) << ',' << num(a.n ? a.iters / a.n : 0.0) << ','
       << num(a.n ? a.wall / a.n : 0.0) << '\n';
  }
}

void write_trace_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << "trial,algo,snr_db,M,K,iter,wsr_bits,sum_power_watts,max_ap_power_watts,"
        "streams_total,sweep_ms\n";
  for (const auto& r : rows) {
    const SolveTrace& tr = r.trace;
    for (std::size_t t = 0; t < tr.wsr_bits.size(); ++t) {
      double total = 0.0;
      double peak = 0.0;
      if (t < tr.ap_power.size()) {
        for (double p : tr.ap_power[t]) {
          total += p;
          peak = std::max(peak, p);
        }
      }
      const double sweep = t == 0 || t > tr.sweep_seconds.size() || r.wall_ms == 0.0
                               ? 0.0
                               : 1e3 * tr.sweep_seconds[t - 1];
      os << r.trial << ',' << to_string(r.algorithm) << ',' << num(r.snr_db) << ',' << r.m << ','
         << r.k << ',' << t << ',' << num(tr.wsr_bits[t]) << ',' << num(total) << ','
         << num(peak) << ',' << (t < tr.total_streams.size() ? tr.total_streams[t] : 0) << ','
         << num(sweep) << '\n';
    }
  }
}

void write_results(const ExperimentSpec& spec, const ExperimentResult& result) {
  auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + p.string() + " for writing");
    return f;
  };
  {
    auto f = open(spec.out);
    write_rows_csv(f, result.rows);
  }
  {
    auto f = open(spec.out.string() + ".summary.csv");
    write_summary_csv(f, result.rows);
  }
  if (spec.write_trace) {
    auto f = open(spec.out.string() + ".trace.csv");
    write_trace_csv(f, result.rows);
  }
}

double scaling_fit(const std::vector<std::pair<double, double>>& m_and_time) {
  std::vector<double> distinct;
  for (const auto& [m, t] : m_and_time) {
    if (!(m > 0.0) || !(t > 0.0)) throw std::invalid_argument("scaling_fit: values must be positive");
    distinct.push_back(m);
  }
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3) throw std::invalid_argument("scaling_fit: need at least 3 distinct M");
  const double n = static_cast<double>(m_and_time.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [m, t] : m_and_time) {
    const double x = std::log(m);
    const double y = std::log(t);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

double median_sweep_seconds(const SolveTrace& trace) {
  const auto& s = trace.sweep_seconds;
  if (s.size() <= 1) return median(s);
  return median(std::vector<double>(s.begin() + 1, s.end()));
}

std::vector<std::pair<Algorithm, double>> scaling_exponents(const std::vector<ResultRow>& rows) {
  std::map<Algorithm, std::map<int, std::vector<double>>> per_m;
  for (const auto& r : rows) {
    if (r.status == "numeric_error" || r.trace.sweep_seconds.empty()) continue;
    per_m[r.algorithm][r.m].push_back(median_sweep_seconds(r.trace));
  }
  std::vector<std::pair<Algorithm, double>> out;
  for (const auto& [algo, by_m] : per_m) {
    if (by_m.size() < 3) continue;
    std::vector<std::pair<double, double>> pts;
    for (const auto& [m, times] : by_m) pts.emplace_back(m, median(times));
    out.emplace_back(algo, scaling_fit(pts));
  }
  return out;
}

NetworkConfig parse_config(std::istream& is, NetworkConfig base) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }

  NetworkConfig c = base;
  auto take = [&](const char* key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (auto v = take("num_aps")) c.num_aps = parse_one<int>("num_aps", *v);
  if (auto v = take("num_ues")) c.num_ues = parse_one<int>("num_ues", *v);
  if (c.num_aps < 1 || c.num_ues < 1) throw std::invalid_argument("config: counts must be positive");
  auto list_or_base = [&](const char* key, auto current) {
    using T = typename decltype(current)::value_type;
    const int count = std::string(key) == "tx_antennas" || std::string(key) == "power_budget"
                          ? c.num_aps
                          : c.num_ues;
    if (auto v = take(key)) return fit_list(parse_list<T>(key, *v), count, key);
    return fit_list(std::vector<T>{current.front()}, count, key);
  };
  c.tx_antennas = list_or_base("tx_antennas", base.tx_antennas);
  c.rx_antennas = list_or_base("rx_antennas", base.rx_antennas);
  c.power_budget = list_or_base("power_budget", base.power_budget);
  c.rate_weights = list_or_base("rate_weights", base.rate_weights);
  if (auto v = take("cluster_size")) c.cluster_size = parse_one<int>("cluster_size", *v);
  if (auto v = take("snr_db")) c.snr_db = parse_one<double>("snr_db", *v);
  if (auto v = take("rng_seed")) c.rng_seed = parse_one<std::uint64_t>("rng_seed", *v);
  if (auto v = take("d_lo_km")) c.d_lo_km = parse_one<double>("d_lo_km", *v);
  if (auto v = take("d_hi_km")) c.d_hi_km = parse_one<double>("d_hi_km", *v);
  if (auto v = take("noise_normalization")) {
    if (*v == "serving_concat") {
      c.noise_normalization = NoiseNormalization::kServingConcat;
    } else if (*v == "per_ap") {
      c.noise_normalization = NoiseNormalization::kPerAp;
    } else {
      throw std::invalid_argument("config: noise_normalization must be serving_concat or per_ap");
    }
  }
  static const char* known[] = {"num_aps",      "num_ues",      "tx_antennas", "rx_antennas",
                                "cluster_size", "power_budget", "rate_weights", "snr_db",
                                "rng_seed",     "d_lo_km",      "d_hi_km",     "noise_normalization"};
  for (const auto& [key, value] : kv) {
    if (std::find_if(std::begin(known), std::end(known),
                     [&](const char* k) { return key == k; }) == std::end(known)) {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

}  // namespace cfmimo
