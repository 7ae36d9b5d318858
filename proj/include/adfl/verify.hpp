#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "adfl/aggregation.hpp"
#include "adfl/allocation.hpp"
#include "adfl/oracle.hpp"
#include "adfl/simulator.hpp"

namespace adfl::verify {

struct CaseResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

inline bool all_pass(const std::vector<CaseResult>& r) {
  return std::all_of(r.begin(), r.end(), [](const CaseResult& c) { return c.pass; });
}

inline std::string format_tau(std::span<const int> tau) {
  std::ostringstream os;
  os << '(';
  for (std::size_t k = 0; k < tau.size(); ++k) os << (k ? "," : "") << tau[k];
  os << ')';
  return os.str();
}

/// The six allocations of 5 rounds over 3 iterations, with the objective
/// written out term by term.
struct TableRow {
  std::array<int, 3> tau;
  double (*expected)(double a);
};

inline const std::array<TableRow, 6>& table1_rows() {
  static const std::array<TableRow, 6> rows{{
      {{3, 1, 1}, [](double a) { return std::pow(a, 5) + std::pow(a, 2) + a; }},
      {{1, 3, 1}, [](double a) { return std::pow(a, 5) + std::pow(a, 4) + a; }},
      {{1, 1, 3}, [](double a) { return std::pow(a, 5) + std::pow(a, 4) + std::pow(a, 3); }},
      {{2, 2, 1}, [](double a) { return std::pow(a, 5) + std::pow(a, 3) + a; }},
      {{2, 1, 2}, [](double a) { return std::pow(a, 5) + std::pow(a, 3) + std::pow(a, 2); }},
      {{1, 2, 2}, [](double a) { return std::pow(a, 5) + std::pow(a, 4) + std::pow(a, 2); }},
  }};
  return rows;
}

inline std::vector<CaseResult> table1(double a = 0.9) {
  std::vector<CaseResult> out;
  double best_other = std::numeric_limits<double>::infinity();
  double back_loaded = 0.0;
  for (const auto& row : table1_rows()) {
    const double got = allocation_objective(row.tau, a);
    const double want = row.expected(a);
    std::ostringstream d;
    d.precision(17);
    d << "objective " << got << " expected " << want;
    out.push_back({"table1 " + format_tau(row.tau), std::abs(got - want) <= 1e-12 * std::abs(want), d.str()});
    if (row.tau == std::array<int, 3>{1, 1, 3})
      back_loaded = got;
    else
      best_other = std::min(best_other, got);
  }
  out.push_back({"table1 (1,1,3) strictly minimal", back_loaded < best_other, ""});
  const auto bf = brute_force_schedule(5, 5, 4, a);
  out.push_back({"table1 brute force argmin", bf == std::vector<int>{1, 1, 3}, format_tau(bf)});
  return out;
}

inline std::vector<CaseResult> mst_oracle(int graphs = 50, std::uint64_t seed = 2024) {
  std::vector<CaseResult> out;
  Rng rng{seed};
  std::uniform_int_distribution<int> size(2, 8);
  std::uniform_real_distribution<double> density(0.1, 0.9);
  for (int k = 0; k < graphs; ++k) {
    const int n = size(rng);
    const auto g = oracle::random_connected_graph(n, density(rng), rng);
    const auto w = oracle::random_weights(g, 0.1, 10.0, rng);
    const auto tree = kruskal_mst(g, w);
    const double got = total_weight(tree, w);
    const double want = oracle::min_spanning_tree_weight(g, w);
    std::ostringstream d;
    d.precision(17);
    d << "N=" << n << " edges=" << g.edges().size() << " kruskal=" << got << " exhaustive=" << want;
    out.push_back({"mst graph " + std::to_string(k + 1), is_spanning_tree(n, tree) && got == want, d.str()});
  }
  return out;
}

struct AllocationSweepStats {
  int instances = 0;
  int non_monotone = 0;
  int budget_violations = 0;
  int ratio_violations = 0;
  double worst_ratio = 0.0;
  std::string worst_case;
};

/// Every feasible instance with horizon <= 7, total <= 14, cap in 2..6 and
/// contraction in {0.5, 0.9, 0.99}, compared against exhaustive search.
inline AllocationSweepStats allocation_sweep(double zeta = 400.0, double ratio_limit = 1.05) {
  AllocationSweepStats st;
  for (int horizon = 2; horizon <= 7; ++horizon) {
    const int len = horizon - 1;
    for (int cap = 2; cap <= 6; ++cap) {
      for (int total = len; total <= std::min(14, len * cap); ++total) {
        const auto tau = closed_form_schedule(total, cap, horizon, zeta);
        const bool mono = std::is_sorted(tau.begin(), tau.end());
        long long sum = 0;
        bool in_cap = true;
        for (int x : tau) {
          sum += x;
          in_cap = in_cap && x >= 1 && x <= cap;
        }
        for (double a : {0.5, 0.9, 0.99}) {
          ++st.instances;
          st.non_monotone += !mono;
          st.budget_violations += !(in_cap && sum <= total);
          const auto best = brute_force_schedule(total, cap, horizon, a);
          const double ratio = allocation_objective(tau, a) / allocation_objective(best, a);
          if (ratio > ratio_limit) ++st.ratio_violations;
          if (ratio > st.worst_ratio) {
            st.worst_ratio = ratio;
            std::ostringstream d;
            d << "T=" << horizon << " cap=" << cap << " total=" << total << " a=" << a
              << " closed=" << format_tau(tau) << " oracle=" << format_tau(best);
            st.worst_case = d.str();
          }
        }
      }
    }
  }
  return st;
}

inline std::vector<CaseResult> allocation_oracle() {
  std::vector<CaseResult> out;
  const auto st = allocation_sweep();
  const auto n = std::to_string(st.instances);
  out.push_back({"allocation non-decreasing", st.non_monotone == 0,
                 std::to_string(st.non_monotone) + "/" + n + " violations"});
  out.push_back({"allocation within budgets", st.budget_violations == 0,
                 std::to_string(st.budget_violations) + "/" + n + " violations"});
  std::ostringstream d;
  d << st.ratio_violations << "/" << n << " above 1.05; worst ratio " << st.worst_ratio << " at "
    << st.worst_case;
  out.push_back({"allocation objective within 1.05 of optimum", st.ratio_violations == 0, d.str()});
  // Fixture from the exhaustive search itself.
  const auto fx = brute_force_schedule(8, 3, 5, 0.5);
  out.push_back({"brute force fixture T=5 total=8 cap=3 a=0.5", fx == std::vector<int>{1, 1, 3, 3},
                 format_tau(fx)});
  return out;
}

/// Deterministic convex setting: quadratic loss, i.i.d. data, full-batch
/// gradients, exact averaging, ample budgets.
inline SimulationConfig bound_validity_config(std::uint64_t seed = 11) {
  SimulationConfig c;
  c.run.seed = seed;
  c.run.iterations_cap = 201;
  c.topology.kind = TopologyKind::ring;
  c.topology.nodes = 5;
  c.channel.fading = FadingKind::unit;
  c.channel.known = true;
  c.devices.energy_budget_j = 1e6;
  c.devices.latency_budget_s = 1.0;
  c.data.source = DataSource::synthetic_quadratic;
  c.data.samples = 2000;
  c.data.features = 5;
  c.data.noise = 0.5;
  c.data.partition = PartitionMode::iid;
  c.model.kind = ModelKind::quadratic;
  c.model.l2 = 0.0;
  c.model.learning_rate = 0.1;
  c.model.batch_size = 1 << 30;
  return c;
}

struct BoundValidityResult {
  int iterations = 0;
  int violations = 0;
  double min_slack = std::numeric_limits<double>::infinity();
  bool exact_constants = false;
  double sigma = 0.0;
  double delta_m = 0.0;
  double eta_times_M = 0.0;
};

inline BoundValidityResult bound_validity(std::uint64_t seed = 11) {
  const auto setup = prepare_simulation(bound_validity_config(seed));
  const auto rep = run_adaptive(setup);
  BoundValidityResult r;
  r.iterations = rep.iterations_run();
  r.exact_constants = rep.constants.m_exact && rep.constants.M_exact && setup.optimum_exact;
  r.sigma = rep.constants.sigma;
  r.delta_m = rep.constants.delta_m;
  r.eta_times_M = rep.constants.eta * rep.constants.M;
  for (const auto& m : rep.metrics) {
    if (m.iteration == 0) continue;
    const double slack = m.bound() - m.gap;
    r.min_slack = std::min(r.min_slack, slack);
    if (!(slack >= 0)) ++r.violations;
  }
  return r;
}

inline std::vector<CaseResult> bound_validity_suite() {
  const auto r = bound_validity();
  std::vector<CaseResult> out;
  std::ostringstream d;
  d << r.violations << " violations over " << r.iterations << " iterations; min slack " << r.min_slack;
  out.push_back({"bound holds every iteration", r.violations == 0 && r.iterations >= 200, d.str()});
  out.push_back({"constants exact", r.exact_constants, ""});
  out.push_back({"deterministic regime (sigma = 0)", r.sigma == 0.0, ""});
  out.push_back({"step size within 1/M", r.eta_times_M <= 1.0, ""});
  return out;
}

inline std::optional<std::vector<CaseResult>> run_suite(std::string_view name) {
  if (name == "table1") return table1();
  if (name == "mst_oracle") return mst_oracle();
  if (name == "allocation_oracle") return allocation_oracle();
  if (name == "bound_validity") return bound_validity_suite();
  return std::nullopt;
}

}  // namespace adfl::verify
