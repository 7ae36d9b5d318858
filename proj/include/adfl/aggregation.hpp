#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "adfl/cost_model.hpp"
#include "adfl/csv.hpp"
#include "adfl/error.hpp"
#include "adfl/topology.hpp"

namespace adfl {

enum class Scheme { mst, ring_allreduce, gossip };

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::mst: return "mst";
    case Scheme::ring_allreduce: return "ring";
    case Scheme::gossip: return "gossip";
  }
  return "?";
}

inline std::optional<Scheme> parse_scheme(std::string_view s) {
  if (s == "mst") return Scheme::mst;
  if (s == "ring" || s == "ring_allreduce") return Scheme::ring_allreduce;
  if (s == "gossip") return Scheme::gossip;
  return std::nullopt;
}

struct AggregationPlan {
  Scheme scheme = Scheme::mst;
  int node_count = 0;
  std::vector<Edge> active_edges;
  int rounds = 0;             // per device, uniform
  double target_error = 0.0;  // 0 for exact schemes
  Eigen::MatrixXd mixing;     // gossip only
  std::vector<int> ring_order;
  double slem = 0.0;          // gossip only

  std::vector<int> rounds_per_device() const { return std::vector<int>(node_count, rounds); }
};

// ---------------------------------------------------------------------------
// Spanning trees

class DisjointSets {
 public:
  explicit DisjointSets(int n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  int find(int x) {
    int root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) {
      int next = parent_[x];
      parent_[x] = root;
      x = next;
    }
    return root;
  }

  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[std::max(a, b)] = std::min(a, b);
    return true;
  }

 private:
  std::vector<int> parent_;
};

/// Minimum-weight spanning tree. Equal weights are taken in (u, v) order.
inline std::vector<Edge> kruskal_mst(const TopologyGraph& g, const EdgeMap<double>& weights) {
  std::vector<Edge> order(g.edges().begin(), g.edges().end());
  for (const auto& e : order) {
    auto it = weights.find(e);
    if (it == weights.end()) throw Error("missing weight for an edge");
    if (!std::isfinite(it->second) || !(it->second > 0))
      throw Error("edge weights must be positive and finite");
  }
  std::stable_sort(order.begin(), order.end(), [&](const Edge& a, const Edge& b) {
    return weights.at(a) < weights.at(b);
  });
  DisjointSets sets(g.node_count());
  std::vector<Edge> tree;
  for (const auto& e : order) {
    if (sets.unite(e.u, e.v)) tree.push_back(e);
    if (static_cast<int>(tree.size()) == g.node_count() - 1) break;
  }
  if (static_cast<int>(tree.size()) != g.node_count() - 1)
    throw Error("graph is disconnected; no spanning tree");
  std::sort(tree.begin(), tree.end());
  return tree;
}

inline bool is_spanning_tree(int n, std::span<const Edge> edges) {
  if (static_cast<int>(edges.size()) != n - 1) return false;
  DisjointSets sets(n);
  for (const auto& e : edges)
    if (!sets.unite(e.u, e.v)) return false;
  return true;
}

inline double total_weight(std::span<const Edge> edges, const EdgeMap<double>& weights) {
  double s = 0.0;
  for (const auto& e : edges) s += weights.at(e);
  return s;
}

// ---------------------------------------------------------------------------
// Gossip

/// W_ij = 1/(1 + max(deg_i, deg_j)) on edges, diagonal fills rows to 1.
inline Eigen::MatrixXd metropolis_weights(const TopologyGraph& g) {
  const int n = g.node_count();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : g.edges()) {
    const double x = 1.0 / (1.0 + std::max(g.degree(e.u), g.degree(e.v)));
    w(e.u, e.v) = x;
    w(e.v, e.u) = x;
  }
  for (int i = 0; i < n; ++i) w(i, i) = 1.0 - w.row(i).sum();
  return w;
}

/// Second-largest eigenvalue modulus of a symmetric stochastic matrix.
inline double second_largest_eigenvalue_modulus(const Eigen::MatrixXd& w) {
  const auto n = w.rows();
  if (n < 2) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(w, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error("eigendecomposition failed");
  const auto& ev = solver.eigenvalues();  // ascending; ev[n-1] is the unit eigenvalue
  return std::max(std::abs(ev[0]), std::abs(ev[n - 2]));
}

/// Synchronous rounds so that the deviation from the mean contracts by at
/// least `epsilon`.
inline int gossip_rounds(double slem, double epsilon) {
  if (!(epsilon > 0)) throw Error("gossip cannot reach zero consensus error; epsilon must be > 0");
  if (!(epsilon < 1)) throw Error("gossip epsilon must be < 1");
  if (!(slem < 1)) throw Error("mixing matrix does not contract (graph disconnected?)");
  if (slem <= 0) return 1;
  const double k = std::ceil(std::log(1.0 / epsilon) / std::log(1.0 / slem));
  return std::max(1, static_cast<int>(k));
}

// ---------------------------------------------------------------------------
// Plans

inline AggregationPlan make_mst_plan(const TopologyGraph& g, const EdgeMap<double>& weights) {
  AggregationPlan p;
  p.scheme = Scheme::mst;
  p.node_count = g.node_count();
  p.active_edges = g.node_count() > 1 ? kruskal_mst(g, weights) : std::vector<Edge>{};
  p.rounds = 2;
  return p;
}

inline AggregationPlan make_ring_plan(const TopologyGraph& g) {
  auto order = find_hamiltonian_ring(g);
  if (!order) throw Error("topology has no Hamiltonian ring");
  AggregationPlan p;
  p.scheme = Scheme::ring_allreduce;
  p.node_count = g.node_count();
  p.ring_order = *order;
  p.active_edges = ring_edges(p.ring_order);
  p.rounds = g.node_count() - 1;
  return p;
}

inline AggregationPlan make_gossip_plan(const TopologyGraph& g, double epsilon) {
  AggregationPlan p;
  p.scheme = Scheme::gossip;
  p.node_count = g.node_count();
  p.active_edges.assign(g.edges().begin(), g.edges().end());
  p.target_error = epsilon;
  p.mixing = metropolis_weights(g);
  p.slem = second_largest_eigenvalue_modulus(p.mixing);
  p.rounds = gossip_rounds(p.slem, epsilon);
  return p;
}

inline AggregationPlan make_plan(const TopologyGraph& g, Scheme scheme,
                                 const EdgeMap<double>* weights, double epsilon) {
  switch (scheme) {
    case Scheme::mst:
      if (!weights) throw Error("mst plan needs per-edge energies");
      return make_mst_plan(g, *weights);
    case Scheme::ring_allreduce: return make_ring_plan(g);
    case Scheme::gossip: return make_gossip_plan(g, epsilon);
  }
  throw Error("unknown scheme");
}

/// Scheme selection: known channels give the minimum-energy tree; otherwise a
/// ring if the graph has one, else gossip to `epsilon`.
inline AggregationPlan plan_for_case(const TopologyGraph& g,
                                     const std::optional<EdgeMap<double>>& known_energies,
                                     double epsilon) {
  if (known_energies || g.node_count() == 1) {
    EdgeMap<double> none;
    return make_mst_plan(g, known_energies ? *known_energies : none);
  }
  bool has_ring = false;
  try {
    has_ring = contains_hamiltonian_ring(g);
  } catch (const SearchBudgetExceeded&) {
    has_ring = false;
  }
  return has_ring ? make_ring_plan(g) : make_gossip_plan(g, epsilon);
}

/// System energy of one aggregation phase.
inline double scheme_energy(const AggregationPlan& plan, const EdgeMap<double>& energies) {
  const double per_round = total_weight(plan.active_edges, energies);
  switch (plan.scheme) {
    case Scheme::mst: return 2.0 * per_round;
    case Scheme::ring_allreduce: return (plan.node_count - 1) * per_round;
    case Scheme::gossip: return plan.rounds * per_round;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Execution

struct AggregationResult {
  Eigen::MatrixXd params;  // one row per device
  double consensus_error = 0.0;
  double spread_before = 0.0;  // Frobenius norm of deviation from the mean
  double spread_after = 0.0;
  std::vector<double> comm_energy_j;  // per device, empty without link costs
  double comm_latency_s = 0.0;
};

inline double deviation_norm(const Eigen::MatrixXd& x) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  return (x.rowwise() - mean).norm();
}

/// max_i ||x_i - mean|| / max(||mean||, 1)
inline double consensus_error(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& mean) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) worst = std::max(worst, (x.row(i) - mean).norm());
  return worst / std::max(mean.norm(), 1.0);
}

namespace detail {

inline Eigen::MatrixXd run_tree(const Eigen::MatrixXd& x, std::span<const Edge> tree) {
  const int n = static_cast<int>(x.rows());
  std::vector<std::vector<int>> adj(n);
  for (const auto& e : tree) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  // Order nodes root-first so children come after parents.
  std::vector<int> parent(n, -1), order;
  std::vector<bool> seen(n, false);
  order.push_back(0);
  seen[0] = true;
  for (std::size_t k = 0; k < order.size(); ++k) {
    for (int c : adj[order[k]]) {
      if (!seen[c]) {
        seen[c] = true;
        parent[c] = order[k];
        order.push_back(c);
      }
    }
  }
  if (static_cast<int>(order.size()) != n) throw Error("tree plan does not span every device");
  // Up-pass: each node forwards its subtree sum to its parent.
  Eigen::MatrixXd partial = x;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if (parent[*it] >= 0) partial.row(parent[*it]) += partial.row(*it);
  // Down-pass: the root's mean is broadcast to every node.
  const Eigen::RowVectorXd mean = partial.row(0) / n;
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (int v : order) out.row(v) = mean;
  return out;
}

inline Eigen::MatrixXd run_ring(const Eigen::MatrixXd& x, std::span<const int> ring) {
  const int n = static_cast<int>(x.rows());
  if (static_cast<int>(ring.size()) != n) throw Error("ring plan does not cover every device");
  Eigen::MatrixXd acc = x;
  Eigen::MatrixXd carry = x;
  for (int round = 0; round < n - 1; ++round) {
    Eigen::MatrixXd next(carry.rows(), carry.cols());
    for (int pos = 0; pos < n; ++pos) {
      const int from = ring[pos];
      const int to = ring[(pos + 1) % n];
      next.row(to) = carry.row(from);
    }
    carry = std::move(next);
    acc += carry;
  }
  return acc / n;
}

}  // namespace detail

/// Runs one aggregation phase on stacked parameters (row i = device i). With
/// link costs, also reports each device's communication energy and the
/// phase's communication latency.
inline AggregationResult execute_aggregation(const Eigen::MatrixXd& params,
                                             const AggregationPlan& plan,
                                             const LinkCosts* costs = nullptr) {
  if (params.rows() != plan.node_count)
    throw Error("parameter rows (" + std::to_string(params.rows()) + ") do not match plan nodes (" +
                std::to_string(plan.node_count) + ")");
  AggregationResult r;
  const Eigen::RowVectorXd mean = params.colwise().mean();
  r.spread_before = deviation_norm(params);
  if (plan.node_count == 1) {
    r.params = params;
  } else {
    switch (plan.scheme) {
      case Scheme::mst: r.params = detail::run_tree(params, plan.active_edges); break;
      case Scheme::ring_allreduce: r.params = detail::run_ring(params, plan.ring_order); break;
      case Scheme::gossip: {
        Eigen::MatrixXd x = params;
        for (int k = 0; k < plan.rounds; ++k) x = plan.mixing * x;
        r.params = std::move(x);
        break;
      }
    }
  }
  r.spread_after = deviation_norm(r.params);
  r.consensus_error = consensus_error(r.params, mean);
  if (costs) {
    r.comm_energy_j.resize(plan.node_count);
    for (int i = 0; i < plan.node_count; ++i) {
      r.comm_energy_j[i] = plan.rounds * incident_sum(i, plan.active_edges, costs->energy_j);
      r.comm_latency_s = std::max(r.comm_latency_s,
                                  plan.rounds * incident_max(i, plan.active_edges, costs->latency_s));
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Manifest

inline void write_manifest(std::ostream& os, const AggregationPlan& plan) {
  os << "scheme " << to_string(plan.scheme) << '\n'
     << "nodes " << plan.node_count << '\n'
     << "rounds " << plan.rounds << '\n'
     << "epsilon " << csv::num(plan.target_error) << '\n'
     << "edges " << plan.active_edges.size() << '\n';
  for (const auto& e : plan.active_edges) os << e.u + 1 << ' ' << e.v + 1 << '\n';
}

struct PlanManifest {
  Scheme scheme;
  int node_count;
  int rounds;
  double epsilon;
  std::vector<Edge> edges;
};

inline PlanManifest read_manifest(std::istream& in) {
  PlanManifest m{};
  std::string key, value;
  auto expect = [&](std::string_view k) {
    if (!(in >> key) || key != k) throw Error("plan manifest: expected `" + std::string(k) + "`");
  };
  expect("scheme");
  in >> value;
  auto s = parse_scheme(value);
  if (!s) throw Error("plan manifest: unknown scheme " + value);
  m.scheme = *s;
  expect("nodes");
  in >> m.node_count;
  expect("rounds");
  in >> m.rounds;
  expect("epsilon");
  in >> value;
  m.epsilon = std::stod(value);
  expect("edges");
  std::size_t count = 0;
  in >> count;
  for (std::size_t i = 0; i < count; ++i) {
    int a = 0, b = 0;
    if (!(in >> a >> b)) throw Error("plan manifest: truncated edge list");
    m.edges.push_back(make_edge(a - 1, b - 1));
  }
  return m;
}

}  // namespace adfl
