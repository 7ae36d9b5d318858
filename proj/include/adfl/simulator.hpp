#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "adfl/aggregation.hpp"
#include "adfl/allocation.hpp"
#include "adfl/bounds.hpp"
#include "adfl/config.hpp"
#include "adfl/cost_model.hpp"
#include "adfl/csv.hpp"
#include "adfl/error.hpp"
#include "adfl/learning/constants.hpp"
#include "adfl/learning/dataset.hpp"
#include "adfl/learning/model.hpp"
#include "adfl/rng.hpp"
#include "adfl/topology.hpp"

namespace adfl {

/// Graph, placement, channels and per-link costs for one configuration.
struct Network {
  TopologyGraph graph;
  std::vector<Position> positions;
  FadingModel fading;
  ChannelRealization channels;
  RadioProfile radio;
  LinkCosts links;
};

inline TopologyGraph build_graph(const SimulationConfig& c) {
  if (c.topology.kind != TopologyKind::custom) return build_topology(c.topology.kind, c.topology.nodes);
  std::ifstream in(c.topology.edge_list);
  if (!in) throw ConfigError("cannot open edge list " + c.topology.edge_list, "topology.edge_list");
  return parse_edge_list(in, c.topology.nodes);
}

inline Network build_network(const SimulationConfig& c, double payload_bits) {
  auto graph = build_graph(c);
  FadingModel fading{c.channel.fading, c.channel.pathloss_exponent, c.channel.reference_distance_m,
                     c.channel.area_side_m};
  auto positions =
      place_devices(graph.node_count(), fading.area_side_m, stream_seed(c.run.seed, "placement"));
  auto channels = draw_channels(graph, fading, positions, stream_seed(c.run.seed, "fading"));
  RadioProfile radio{c.radio.tx_power_w, c.radio.bandwidth_hz,
                     dbm_per_hz_to_w_per_hz(c.radio.noise_dbm_per_hz), payload_bits};
  radio.validate();
  auto links = link_costs(radio, channels);
  return Network{std::move(graph), std::move(positions), fading, std::move(channels), radio,
                 std::move(links)};
}

/// Aggregation plan for the configured scheme (or the automatic choice).
inline AggregationPlan select_plan(const SimulationConfig& c, const Network& net) {
  if (c.aggregation.scheme == "auto") {
    std::optional<EdgeMap<double>> known;
    if (c.channel.known) known = net.links.energy_j;
    return plan_for_case(net.graph, known, c.aggregation.epsilon);
  }
  const auto scheme = *parse_scheme(c.aggregation.scheme);
  if (net.graph.node_count() == 1) return make_mst_plan(net.graph, net.links.energy_j);
  return make_plan(net.graph, scheme, &net.links.energy_j, c.aggregation.epsilon);
}

inline Dataset load_dataset(const SimulationConfig& c) {
  const auto seed = stream_seed(c.run.seed, "data");
  switch (c.data.source) {
    case DataSource::synthetic_quadratic:
      return make_synthetic(SyntheticTask::quadratic, c.data.samples, c.data.features, seed,
                            {0, c.data.separation, c.data.noise});
    case DataSource::synthetic_blobs:
      return make_synthetic(SyntheticTask::blobs_classification, c.data.samples, c.data.features, seed,
                            {c.data.classes, c.data.separation, c.data.noise});
    case DataSource::csv: return load_csv(c.data.path, c.data.classes);
    case DataSource::idx:
      return load_idx(c.data.path, c.data.labels_path, static_cast<std::size_t>(c.data.samples));
  }
  throw ConfigError("unknown data source", "data.source");
}

inline ModelSpec model_spec(const SimulationConfig& c, int input_dim, int classes) {
  ModelSpec m{c.model.kind, c.model.l2, c.model.hidden, input_dim, classes};
  m.validate();
  return m;
}

/// Everything derived from a configuration before training starts.
struct SimulationSetup {
  SimulationConfig config;
  Dataset train;
  Dataset test;
  std::vector<Dataset> parts;
  ModelSpec model;
  Network net;
  AggregationPlan plan;
  std::vector<DeviceProfile> devices;
  double optimum_loss = std::nan("");
  bool optimum_exact = false;
};

namespace detail {

inline std::pair<double, bool> global_optimum(const ModelSpec& spec, const Dataset& train) {
  switch (spec.kind) {
    case ModelKind::quadratic: {
      const auto w = quadratic_optimum(spec, train);
      return {full_loss_and_grad(spec, w, train).loss, true};
    }
    case ModelKind::logistic_l2: {
      const double step = 1.0 / curvature(spec, train).M;
      Eigen::VectorXd w = Eigen::VectorXd::Zero(spec.parameter_count());
      for (int s = 0; s < 10000; ++s) w -= step * full_loss_and_grad(spec, w, train).grad;
      return {full_loss_and_grad(spec, w, train).loss, false};
    }
    case ModelKind::mlp_small: break;
  }
  return {std::nan(""), false};
}

}  // namespace detail

inline SimulationSetup prepare_simulation(const SimulationConfig& config, bool compute_optimum = true) {
  config.validate();
  const auto& c = config;
  auto full = load_dataset(c);
  auto [train, test] = train_test_split(full, c.data.test_fraction, stream_seed(c.run.seed, "split"));
  const auto graph_nodes = build_graph(c).node_count();
  if (graph_nodes > train.size())
    throw ConfigError("more devices than training samples", "topology.nodes");
  auto parts = partition(train, graph_nodes, c.data.partition, stream_seed(c.run.seed, "partition"),
                         c.data.dirichlet_alpha);
  const auto spec = model_spec(c, static_cast<int>(train.dim()), train.classes);
  const double payload = c.radio.payload_bits > 0 ? c.radio.payload_bits : 32.0 * spec.parameter_count();
  auto net = build_network(c, payload);
  auto plan = select_plan(c, net);

  std::vector<DeviceProfile> devices(graph_nodes);
  Rng dev_rng = make_stream(c.run.seed, "devices");
  Rng budget_rng = make_stream(c.run.seed, "budgets");
  std::uniform_real_distribution<double> cycles(c.devices.cycles_min, c.devices.cycles_max);
  std::uniform_real_distribution<double> spread(-1.0, 1.0);
  for (int i = 0; i < graph_nodes; ++i) {
    auto& d = devices[i];
    d.cycles_per_sample = c.devices.cycles_max > c.devices.cycles_min ? cycles(dev_rng) : c.devices.cycles_min;
    d.dataset_size = static_cast<double>(parts[i].size());
    d.cpu_freq_hz = c.devices.cpu_freq_hz;
    d.capacitance = c.devices.capacitance;
    d.energy_budget_j = c.devices.energy_budget_j * (1.0 + c.devices.energy_budget_spread * spread(budget_rng));
    d.validate();
  }

  SimulationSetup s{config,          std::move(train), std::move(test), std::move(parts), spec,
                    std::move(net),  std::move(plan),  std::move(devices)};
  if (compute_optimum) std::tie(s.optimum_loss, s.optimum_exact) = detail::global_optimum(spec, s.train);
  return s;
}

// ---------------------------------------------------------------------------
// Reports

struct IterationMetrics {
  int iteration = 0;
  double loss = 0.0;
  double gap = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
  double consensus_error = 0.0;
  double latency_s = 0.0;
  double energy_j = 0.0;  // cumulative, all devices
  double a1 = 0.0;
  double a2 = 0.0;
  double h = 0.0;

  double bound() const { return a1 + a2 + h; }
};

struct SimulationReport {
  Baseline baseline = Baseline::adaptive;
  AggregationPlan plan;
  AllocationSchedule schedule;
  CostLedger ledger{{}, 0.0};
  std::vector<IterationMetrics> metrics;  // iteration 0 is the initial state
  std::vector<IterationUsage> usage;
  ProblemConstants constants;
  bool bounds_available = false;
  bool truncated = false;
  double optimum_loss = std::nan("");
  bool optimum_exact = false;
  double wall_clock_s = 0.0;
  Eigen::MatrixXd final_params;  // one row per device

  double final_loss() const { return metrics.empty() ? std::nan("") : metrics.back().loss; }
  int iterations_run() const { return static_cast<int>(metrics.size()) - 1; }

  /// Per-iteration metrics. Contains nothing time- or host-dependent.
  void write_csv(std::ostream& os) const {
    os << "iteration,loss,optimality_gap,test_loss,test_accuracy,consensus_error,latency_s,"
          "energy_total_J,bound_A1,bound_A2,bound_h,bound_total\n";
    for (const auto& m : metrics) {
      os << m.iteration << ',' << csv::num(m.loss) << ',' << csv::num(m.gap) << ','
         << csv::num(m.test_loss) << ',' << csv::num(m.test_accuracy) << ','
         << csv::num(m.consensus_error) << ',' << csv::num(m.latency_s) << ','
         << csv::num(m.energy_j) << ',' << csv::num(m.a1) << ',' << csv::num(m.a2) << ','
         << csv::num(m.h) << ',' << csv::num(m.bound()) << '\n';
    }
  }
};

// ---------------------------------------------------------------------------
// Schedules

struct DeviceCosts {
  std::vector<double> comp_energy_j;
  std::vector<double> comp_latency_s;
  std::vector<double> comm_energy_j;  // per aggregation phase
  double comm_latency_s = 0.0;        // per aggregation phase, system-wide
};

inline DeviceCosts device_costs(const SimulationSetup& s, const AggregationPlan& plan, const LinkCosts& links) {
  DeviceCosts dc;
  const int n = static_cast<int>(s.devices.size());
  for (int i = 0; i < n; ++i) {
    dc.comp_energy_j.push_back(comp_energy(s.devices[i]));
    dc.comp_latency_s.push_back(comp_latency(s.devices[i]));
    dc.comm_energy_j.push_back(plan.rounds * incident_sum(i, plan.active_edges, links.energy_j));
    dc.comm_latency_s = std::max(dc.comm_latency_s, plan.rounds * incident_max(i, plan.active_edges, links.latency_s));
  }
  return dc;
}

/// Horizon and per-device schedule for the requested baseline.
inline AllocationSchedule plan_schedule(const SimulationSetup& s, Baseline baseline) {
  const auto& c = s.config;
  const auto dc = device_costs(s, s.plan, s.net.links);
  const int n = static_cast<int>(s.devices.size());
  std::vector<DeviceBudget> budgets(n);
  for (int i = 0; i < n; ++i) {
    budgets[i] = {s.devices[i].energy_budget_j, dc.comp_energy_j[i], dc.comm_energy_j[i],
                  tau_cap(c.devices.latency_budget_s, 1, dc.comm_latency_s, dc.comp_latency_s[i])};
  }
  const auto horizon = determine_horizon(budgets, c.run.zeta, c.run.iterations_cap);
  if (horizon.horizon < 2)
    throw InfeasibleError("energy budget allows no training iteration", horizon.limiting_device);

  AllocationSchedule sched;
  sched.horizon = horizon.horizon;
  sched.tau_total = horizon.tau_total;
  sched.zeta = c.run.zeta;
  for (int i = 0; i < n; ++i) {
    sched.tau_cap.push_back(budgets[i].tau_cap);
    sched.tau.push_back(closed_form_schedule(horizon.tau_total[i], budgets[i].tau_cap, horizon.horizon, c.run.zeta));
  }

  switch (baseline) {
    case Baseline::adaptive: break;
    case Baseline::inverse:
      for (auto& t : sched.tau) std::reverse(t.begin(), t.end());
      break;
    case Baseline::fixed: {
      long long equal_total = sched.device_sum(0);
      for (int i = 1; i < n; ++i) equal_total = std::min(equal_total, sched.device_sum(i));
      const int tau = c.run.fixed_tau;
      for (int i = 0; i < n; ++i)
        if (tau > std::floor(budgets[i].tau_cap))
          throw InfeasibleError("fixed rounds per iteration exceed device " + std::to_string(i + 1) +
                                    "'s latency cap",
                                i);
      const int iters = fixed_iterations(static_cast<double>(equal_total), tau);
      if (iters < 1) throw InfeasibleError("fixed baseline affords no iteration");
      sched.horizon = iters + 1;
      for (auto& t : sched.tau) t.assign(iters, tau);
      break;
    }
  }
  return sched;
}

// ---------------------------------------------------------------------------
// Runs

/// Runs training and aggregation under a given schedule, enforcing budgets
/// before every iteration.
inline SimulationReport run_schedule(const SimulationSetup& s, AllocationSchedule sched, Baseline label) {
  const auto start = std::chrono::steady_clock::now();
  const auto& c = s.config;
  const int n = static_cast<int>(s.devices.size());
  const int iterations = sched.iterations();

  SimulationReport rep;
  rep.baseline = label;
  rep.plan = s.plan;
  rep.optimum_loss = s.optimum_loss;
  rep.optimum_exact = s.optimum_exact;
  std::vector<double> budgets;
  for (const auto& d : s.devices) budgets.push_back(d.energy_budget_j);
  rep.ledger = CostLedger(budgets, c.devices.latency_budget_s);

  const Eigen::VectorXd w0 = initial_parameters(s.model, stream_seed(c.run.seed, "init"));
  Eigen::MatrixXd params(n, w0.size());
  for (int i = 0; i < n; ++i) params.row(i) = w0.transpose();

  std::vector<EpochSampler> samplers;
  for (int i = 0; i < n; ++i)
    samplers.emplace_back(static_cast<int>(s.parts[i].size()), c.model.batch_size,
                          make_stream(c.run.seed, "train", static_cast<std::uint64_t>(i)));

  // Bound ingredients at the starting point.
  std::vector<double> gaps(n, 0.0);
  if (s.model.kind != ModelKind::mlp_small) {
    Rng crng = make_stream(c.run.seed, "constants");
    rep.constants = estimate_constants(s.model, w0, s.parts, c.bounds.sample_budget, c.model.batch_size,
                                       c.model.learning_rate, crng);
    rep.bounds_available = rep.constants.m * c.model.learning_rate < 1;
    for (int i = 0; i < n; ++i) {
      const auto lg = full_loss_and_grad(s.model, w0, s.parts[i]);
      if (s.model.kind == ModelKind::quadratic) {
        const auto wi = quadratic_optimum(s.model, s.parts[i]);
        gaps[i] = std::max(0.0, lg.loss - full_loss_and_grad(s.model, wi, s.parts[i]).loss);
      } else {
        gaps[i] = lg.grad.squaredNorm() / (2.0 * s.model.l2);  // strong convexity caps the gap
      }
    }
  }
  const double h = rep.bounds_available ? bound_aggregation_term(rep.constants) : std::nan("");

  auto record_metrics = [&](int t, double consensus, double latency) {
    IterationMetrics m;
    m.iteration = t;
    const Eigen::VectorXd w = params.row(0).transpose();
    m.loss = full_loss_and_grad(s.model, w, s.train).loss;
    m.gap = m.loss - s.optimum_loss;
    if (s.test.size() > 0) {
      m.test_loss = full_loss_and_grad(s.model, w, s.test).loss;
      m.test_accuracy = accuracy(s.model, w, s.test);
    } else {
      m.test_loss = m.test_accuracy = std::nan("");
    }
    m.consensus_error = consensus;
    m.latency_s = latency;
    double e = 0.0;
    for (int i = 0; i < n; ++i) e += rep.ledger.total_energy(i);
    m.energy_j = e;
    if (rep.bounds_available) {
      std::vector<long long> sums(n, 0);
      std::vector<std::vector<int>> prefix(n);
      for (int i = 0; i < n; ++i) {
        prefix[i].assign(sched.tau[i].begin(), sched.tau[i].begin() + t);
        for (int x : prefix[i]) sums[i] += x;
      }
      m.a1 = bound_A1(rep.constants, gaps, sums);
      m.a2 = bound_A2(rep.constants, prefix);
      m.h = h;
    } else {
      m.a1 = m.a2 = m.h = std::nan("");
    }
    rep.metrics.push_back(m);
  };
  record_metrics(0, 0.0, 0.0);

  AggregationPlan plan = s.plan;
  LinkCosts links = s.net.links;
  for (int t = 1; t <= iterations; ++t) {
    if (c.channel.redraw_each_iteration) {
      auto ch = draw_channels(s.net.graph, s.net.fading, s.net.positions,
                              stream_seed(c.run.seed, "fading", static_cast<std::uint64_t>(t)));
      links = link_costs(s.net.radio, ch);
      if (plan.scheme == Scheme::mst && n > 1) plan = make_mst_plan(s.net.graph, links.energy_j);
    }
    const auto dc = device_costs(s, plan, links);
    std::vector<int> tau(n);
    std::vector<double> comp(n);
    for (int i = 0; i < n; ++i) {
      tau[i] = sched.tau[i][t - 1];
      comp[i] = tau[i] * dc.comp_energy_j[i];
    }
    const auto rounds = plan.rounds_per_device();
    const double latency =
        iteration_latency(tau, dc.comp_latency_s, rounds, plan.active_edges, links.latency_s);
    if (!rep.ledger.admits(comp, dc.comm_energy_j, latency)) {
      rep.truncated = true;
      break;
    }

    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd w = params.row(i).transpose();
      w = local_train(s.model, std::move(w), s.parts[i], tau[i], c.model.learning_rate, samplers[i]);
      params.row(i) = w.transpose();
    }
    auto agg = execute_aggregation(params, plan, &links);
    params = std::move(agg.params);

    rep.ledger.record(comp, agg.comm_energy_j, latency);
    rep.usage.push_back({tau, rounds, plan.active_edges, links.energy_j});
    record_metrics(t, agg.consensus_error, latency);
  }

  if (rep.truncated)
    for (auto& row : sched.tau) row.resize(static_cast<std::size_t>(rep.iterations_run()));
  sched.horizon = rep.iterations_run() + 1;
  rep.schedule = std::move(sched);
  rep.final_params = params;
  rep.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

inline SimulationReport run_adaptive(const SimulationSetup& s) {
  return run_schedule(s, plan_schedule(s, Baseline::adaptive), Baseline::adaptive);
}

/// Same pipeline with the fixed or inverse schedule.
inline SimulationReport run_baseline(const SimulationSetup& s, Baseline baseline) {
  return run_schedule(s, plan_schedule(s, baseline), baseline);
}

inline SimulationReport run_simulation(const SimulationConfig& c) {
  const auto setup = prepare_simulation(c);
  return run_baseline(setup, c.run.baseline);
}

// ---------------------------------------------------------------------------
// Energy comparison

struct SchemeChoice {
  Scheme scheme;
  double epsilon = 0.0;
  std::string label;
};

struct EnergyRow {
  int nodes;
  std::string label;
  int rounds;
  double total_j;
};

/// Aggregation energy of each scheme over `sweep.energy_iterations`
/// phases, for each device count. Channels are drawn once per count.
inline std::vector<EnergyRow> compare_energy_sweep(const SimulationConfig& base, std::span<const int> node_counts,
                                                   std::span<const SchemeChoice> schemes) {
  std::vector<EnergyRow> rows;
  for (int n : node_counts) {
    auto c = base;
    c.topology.nodes = n;
    c.validate();
    const int input_dim = c.data.features;
    const int classes = c.model.kind == ModelKind::quadratic ? 0 : c.data.classes;
    const auto spec = model_spec(c, input_dim, classes);
    const double payload = c.radio.payload_bits > 0 ? c.radio.payload_bits : 32.0 * spec.parameter_count();
    const auto net = build_network(c, payload);
    for (const auto& sc : schemes) {
      const auto plan = make_plan(net.graph, sc.scheme, &net.links.energy_j, sc.epsilon);
      rows.push_back({n, sc.label, plan.rounds,
                      c.sweep.energy_iterations * scheme_energy(plan, net.links.energy_j)});
    }
  }
  return rows;
}

}  // namespace adfl
