#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cfmimo/channel_io.hpp"
#include "cfmimo/experiment.hpp"
#include "cfmimo/ezf.hpp"
#include "cfmimo/metrics.hpp"
#include "cfmimo/network.hpp"
#include "cfmimo/rwmmse.hpp"
#include "cfmimo/streams.hpp"
#include "cfmimo/wmmse.hpp"

namespace py = pybind11;
using namespace cfmimo;

namespace {

// Block grids cross the boundary as nested lists [ap][ue] of complex arrays.
using Blocks = std::vector<std::vector<CMat>>;

Blocks to_lists(const PairGrid<CMat>& g) {
  Blocks out(g.rows(), std::vector<CMat>(g.cols()));
  for (std::size_t i = 0; i < g.rows(); ++i) {
    for (std::size_t k = 0; k < g.cols(); ++k) out[i][k] = g(i, k);
  }
  return out;
}

PairGrid<CMat> from_lists(const Blocks& b) {
  if (b.empty()) throw std::invalid_argument("empty block grid");
  PairGrid<CMat> g(b.size(), b.front().size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i].size() != g.cols()) throw std::invalid_argument("ragged block grid");
    for (std::size_t k = 0; k < g.cols(); ++k) g(i, k) = b[i][k];
  }
  return g;
}

std::vector<std::vector<int>> counts_to_lists(const StreamCounts& d) {
  std::vector<std::vector<int>> out(d.rows(), std::vector<int>(d.cols()));
  for (std::size_t i = 0; i < d.rows(); ++i) {
    for (std::size_t k = 0; k < d.cols(); ++k) out[i][k] = d(i, k);
  }
  return out;
}

StreamCounts counts_from_lists(const std::vector<std::vector<int>>& d) {
  if (d.empty()) throw std::invalid_argument("empty stream grid");
  StreamCounts out(d.size(), d.front().size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i].size() != out.cols()) throw std::invalid_argument("ragged stream grid");
    for (std::size_t k = 0; k < out.cols(); ++k) out(i, k) = d[i][k];
  }
  return out;
}

SystemParams params_of(std::vector<double> weights, std::vector<double> budget) {
  return {std::move(weights), std::move(budget)};
}

py::dict trace_dict(const SolveTrace& t) {
  py::dict d;
  d["algorithm"] = std::string(to_string(t.algorithm));
  d["init_tag"] = t.init_tag;
  d["wsr_bits"] = t.wsr_bits;
  d["ap_power"] = t.ap_power;
  d["multipliers"] = t.multipliers;
  d["total_streams"] = t.total_streams;
  d["interaction"] = t.interaction;
  d["iterations"] = t.iterations();
  d["converged"] = t.converged;
  d["ascent_from"] = t.ascent_from;
  d["large_factorizations"] = t.large_factorizations;
  d["small_factorizations"] = t.small_factorizations;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Weighted sum-rate beamforming for user-centric cell-free MIMO";

  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<StateError>(m, "StateError", PyExc_RuntimeError);

  py::enum_<NoiseNormalization>(m, "NoiseNormalization")
      .value("SERVING_CONCAT", NoiseNormalization::kServingConcat)
      .value("PER_AP", NoiseNormalization::kPerAp);

  py::class_<NetworkConfig>(m, "NetworkConfig")
      .def(py::init<>())
      .def_static("uniform", &NetworkConfig::uniform, py::arg("aps"), py::arg("ues"),
                  py::arg("m"), py::arg("n"), py::arg("cluster"), py::arg("p_max") = 1.0,
                  py::arg("snr_db") = 0.0, py::arg("seed") = 1)
      .def_readwrite("num_aps", &NetworkConfig::num_aps)
      .def_readwrite("num_ues", &NetworkConfig::num_ues)
      .def_readwrite("tx_antennas", &NetworkConfig::tx_antennas)
      .def_readwrite("rx_antennas", &NetworkConfig::rx_antennas)
      .def_readwrite("cluster_size", &NetworkConfig::cluster_size)
      .def_readwrite("power_budget", &NetworkConfig::power_budget)
      .def_readwrite("rate_weights", &NetworkConfig::rate_weights)
      .def_readwrite("snr_db", &NetworkConfig::snr_db)
      .def_readwrite("rng_seed", &NetworkConfig::rng_seed)
      .def_readwrite("d_lo_km", &NetworkConfig::d_lo_km)
      .def_readwrite("d_hi_km", &NetworkConfig::d_hi_km)
      .def_readwrite("noise_normalization", &NetworkConfig::noise_normalization)
      .def("validate", &NetworkConfig::validate);

  m.def("default_config", &default_config);

  py::class_<ChannelSet>(m, "ChannelSet")
      .def(py::init([](const Blocks& h, std::vector<std::vector<int>> serving) {
             return ChannelSet(from_lists(h), std::move(serving));
           }),
           py::arg("channels"), py::arg("serving_sets"))
      .def_property_readonly("num_aps", &ChannelSet::num_aps)
      .def_property_readonly("num_ues", &ChannelSet::num_ues)
      .def_property_readonly("total_rx", &ChannelSet::total_rx)
      .def_property_readonly("tx_antennas", &ChannelSet::tx_antenna_counts)
      .def_property_readonly("rx_antennas", &ChannelSet::rx_antenna_counts)
      .def_property_readonly("serving_sets", &ChannelSet::serving_sets)
      .def("channel", &ChannelSet::channel, py::arg("i"), py::arg("k"))
      .def("stacked", &ChannelSet::stacked, py::arg("i"))
      .def("gram", &ChannelSet::gram, py::arg("i"))
      .def("served_ues", &ChannelSet::served_ues, py::arg("i"))
      .def_property_readonly("has_noise", &ChannelSet::has_noise)
      .def_property("noise_powers", &ChannelSet::noise_powers, &ChannelSet::set_noise_powers)
      .def("with_serving_sets", &ChannelSet::with_serving_sets);

  py::class_<Topology>(m, "Topology")
      .def_readonly("distances_km", &Topology::distances_km)
      .def_readonly("serving_sets", &Topology::serving_sets)
      .def_readonly("served_sets", &Topology::served_sets);

  py::class_<Scenario>(m, "Scenario")
      .def_readonly("topology", &Scenario::topology)
      .def_readonly("channels", &Scenario::channels);

  m.def("generate_scenario", &generate_scenario, py::arg("config"));
  m.def("pathloss_db", &pathloss_db, py::arg("d_km"));
  m.def("noise_power", &noise_power, py::arg("channels"), py::arg("snr_db"),
        py::arg("mode") = NoiseNormalization::kServingConcat);

  m.def(
      "weighted_sum_rate",
      [](const ChannelSet& ch, const Blocks& p, const std::vector<double>& w) {
        return weighted_sum_rate(ch, Beamformer{from_lists(p)}, w);
      },
      py::arg("channels"), py::arg("beamformer"), py::arg("weights"),
      "Weighted sum rate in bits/s/Hz of a full-dimension beamformer.");
  m.def(
      "ue_rate",
      [](int k, const ChannelSet& ch, const Blocks& p) {
        return ue_rate(k, ch, Beamformer{from_lists(p)});
      },
      py::arg("k"), py::arg("channels"), py::arg("beamformer"));
  m.def(
      "ap_powers", [](const Blocks& p) { return ap_powers(Beamformer{from_lists(p)}); },
      py::arg("beamformer"));
  m.def(
      "interaction_count",
      [](const std::string& algo, const std::vector<int>& m_i, const std::vector<int>& n_k,
         const std::vector<std::vector<int>>& d) {
        return interaction_count(parse_algorithm(algo), m_i, n_k, counts_from_lists(d));
      },
      py::arg("algorithm"), py::arg("tx_antennas"), py::arg("rx_antennas"), py::arg("streams"));

  m.def(
      "init_allocation",
      [](const ChannelSet& ch, const RMat& dist) {
        return counts_to_lists(init_allocation(ch, dist).counts());
      },
      py::arg("channels"), py::arg("distances_km"),
      "Per-pair stream counts of the deterministic initial allocation.");

  m.def(
      "ezf_beamformer",
      [](const ChannelSet& ch, const std::vector<std::vector<int>>& d,
         std::vector<double> weights, std::vector<double> budget) {
        return to_lists(
            ezf_beamformer(ch, counts_from_lists(d), params_of(weights, budget)).blocks);
      },
      py::arg("channels"), py::arg("streams"), py::arg("weights"), py::arg("power_budget"));

  py::class_<SolverOptions>(m, "SolverOptions")
      .def(py::init<>())
      .def_readwrite("max_iters", &SolverOptions::max_iters)
      .def_readwrite("rel_tol", &SolverOptions::rel_tol)
      .def_readwrite("bisect_tol", &SolverOptions::bisect_tol)
      .def_readwrite("ridge_eps", &SolverOptions::ridge_eps);

  m.def(
      "solve_wmmse",
      [](const ChannelSet& ch, const Blocks& init, std::vector<double> weights,
         std::vector<double> budget, const SolverOptions& opts) {
        auto [bf, trace] =
            solve_wmmse(ch, params_of(weights, budget), Beamformer{from_lists(init)}, opts);
        return py::make_tuple(to_lists(bf.blocks), trace_dict(trace));
      },
      py::arg("channels"), py::arg("init"), py::arg("weights"), py::arg("power_budget"),
      py::arg("options") = SolverOptions{},
      "Centralized WMMSE from a feasible start; returns (blocks, trace).");

  m.def(
      "solve_rwmmse",
      [](const ChannelSet& ch, const std::vector<std::vector<int>>& d,
         std::vector<double> weights, std::vector<double> budget, const SolverOptions& opts) {
        const SystemParams params = params_of(weights, budget);
        auto [x, trace] =
            solve_rwmmse(ch, params, ezf_lowdim(ch, counts_from_lists(d), params), opts);
        return py::make_tuple(to_lists(expand(ch, x).blocks), trace_dict(trace));
      },
      py::arg("channels"), py::arg("streams"), py::arg("weights"), py::arg("power_budget"),
      py::arg("options") = SolverOptions{},
      "Low-dimension WMMSE from local EZF; returns (full-dimension blocks, trace).");

  m.def(
      "solve_rwmmse_lsa",
      [](const ChannelSet& ch, std::vector<double> weights, std::vector<double> budget,
         const SolverOptions& opts, int warmup) {
        const SystemParams params = params_of(weights, budget);
        const StreamAllocation init = full_allocation(ch);
        LsaOptions lsa;
        lsa.warmup_sweeps = warmup;
        LsaResult r =
            solve_rwmmse_lsa(ch, params, init, ezf_lowdim(ch, init.counts(), params), opts, lsa);
        return py::make_tuple(to_lists(expand(ch, r.x).blocks),
                              counts_to_lists(r.alloc.counts()), trace_dict(r.trace));
      },
      py::arg("channels"), py::arg("weights"), py::arg("power_budget"),
      py::arg("options") = SolverOptions{}, py::arg("warmup_sweeps") = 100,
      "Joint beamforming and stream allocation; returns (blocks, streams, trace).");

  m.def(
      "solve_rwmmse_lus",
      [](const ChannelSet& ch, std::vector<double> weights, std::vector<double> budget,
         const SolverOptions& opts, int warmup) {
        LsaOptions lsa;
        lsa.warmup_sweeps = warmup;
        LusResult r = solve_rwmmse_lus(ch, params_of(weights, budget), opts, lsa);
        return py::make_tuple(to_lists(expand(r.channels, r.x).blocks),
                              counts_to_lists(r.alloc.counts()), r.serving_sets,
                              trace_dict(r.trace));
      },
      py::arg("channels"), py::arg("weights"), py::arg("power_budget"),
      py::arg("options") = SolverOptions{}, py::arg("warmup_sweeps") = 100,
      "User scheduling over all APs; returns (blocks, streams, serving_sets, trace).");

  m.def("dump_channels", &dump_channels, py::arg("channels"), py::arg("path"));
  m.def("load_channels", &load_channels, py::arg("path"));
}
