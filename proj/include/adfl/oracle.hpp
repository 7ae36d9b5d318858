#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "adfl/aggregation.hpp"
#include "adfl/error.hpp"
#include "adfl/rng.hpp"
#include "adfl/topology.hpp"

// Slow, independent reference implementations used to check the fast paths.
namespace adfl::oracle {

/// Minimum total weight over every spanning tree, by exhaustive enumeration.
inline double min_spanning_tree_weight(const TopologyGraph& g, const EdgeMap<double>& weights) {
  const int n = g.node_count();
  if (n > 8) throw SearchBudgetExceeded("spanning-tree enumeration is limited to 8 nodes");
  const std::vector<Edge> edges(g.edges().begin(), g.edges().end());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> chosen;
  std::function<void(std::size_t)> rec = [&](std::size_t next) {
    if (static_cast<int>(chosen.size()) == n - 1) {
      std::vector<Edge> tree;
      double w = 0.0;
      for (int k : chosen) {
        tree.push_back(edges[k]);
        w += weights.at(edges[k]);
      }
      if (is_spanning_tree(n, tree)) best = std::min(best, w);
      return;
    }
    if (edges.size() - next < static_cast<std::size_t>(n - 1) - chosen.size()) return;
    for (std::size_t k = next; k < edges.size(); ++k) {
      chosen.push_back(static_cast<int>(k));
      rec(k + 1);
      chosen.pop_back();
    }
  };
  rec(0);
  return n == 1 ? 0.0 : best;
}

/// Modulus of the largest non-unit eigenvalue, via the general (non-symmetric)
/// eigensolver on W minus the averaging projector.
inline double slem(const Eigen::MatrixXd& w) {
  const auto n = w.rows();
  if (n < 2) return 0.0;
  const Eigen::MatrixXd b = w - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  Eigen::EigenSolver<Eigen::MatrixXd> es(b, false);
  double r = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) r = std::max(r, std::abs(es.eigenvalues()[k]));
  return r;
}

/// Hamiltonian cycle by trying every ordering with node 0 first.
inline bool has_hamiltonian_cycle(const TopologyGraph& g) {
  const int n = g.node_count();
  if (n < 3) return n == 2 && g.has_edge(0, 1);
  if (n > 10) throw SearchBudgetExceeded("permutation search is limited to 10 nodes");
  std::vector<int> perm(n - 1);
  std::iota(perm.begin(), perm.end(), 1);
  do {
    bool ok = g.has_edge(0, perm.front()) && g.has_edge(perm.back(), 0);
    for (std::size_t k = 0; ok && k + 1 < perm.size(); ++k) ok = g.has_edge(perm[k], perm[k + 1]);
    if (ok) return true;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return false;
}

/// Connected random graph: a random spanning tree plus each remaining pair
/// with probability `extra`.
inline TopologyGraph random_connected_graph(int n, double extra, Rng& rng) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Edge> edges;
  for (int k = 1; k < n; ++k) {
    std::uniform_int_distribution<int> pick(0, k - 1);
    edges.push_back(make_edge(order[k], order[pick(rng)]));
  }
  std::bernoulli_distribution coin(extra);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (std::find(edges.begin(), edges.end(), Edge{a, b}) == edges.end() && coin(rng)) edges.push_back({a, b});
  return TopologyGraph(n, std::move(edges));
}

/// Connected random graph that contains the ring through a random ordering.
inline TopologyGraph random_graph_with_ring(int n, double extra, Rng& rng) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  auto edges = ring_edges(order);
  std::bernoulli_distribution coin(extra);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (std::find(edges.begin(), edges.end(), Edge{a, b}) == edges.end() && coin(rng)) edges.push_back({a, b});
  TopologyGraph g(n, std::move(edges));
  g.tag_ring(order);
  return g;
}

inline EdgeMap<double> random_weights(const TopologyGraph& g, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  EdgeMap<double> w;
  for (const auto& e : g.edges()) w[e] = u(rng);
  return w;
}

}  // namespace adfl::oracle
