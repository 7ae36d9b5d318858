#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "adfl/error.hpp"
#include "adfl/rng.hpp"

namespace adfl {

/// Undirected edge between 0-based nodes, stored with `u < v`.
struct Edge {
  int u = 0;
  int v = 0;

  auto operator<=>(const Edge&) const = default;

  bool touches(int node) const noexcept { return u == node || v == node; }
  int other(int node) const noexcept { return u == node ? v : u; }
};

inline Edge make_edge(int a, int b) {
  if (a == b) throw Error("self-loop on node " + std::to_string(a + 1));
  return a < b ? Edge{a, b} : Edge{b, a};
}

template <class T>
using EdgeMap = std::map<Edge, T>;

enum class TopologyKind { ring, quasi_ring, grid_2col, complete, custom };

inline std::string_view to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::ring: return "ring";
    case TopologyKind::quasi_ring: return "quasi_ring";
    case TopologyKind::grid_2col: return "grid_2col";
    case TopologyKind::complete: return "complete";
    case TopologyKind::custom: return "custom";
  }
  return "?";
}

inline std::optional<TopologyKind> parse_topology_kind(std::string_view s) {
  for (auto k : {TopologyKind::ring, TopologyKind::quasi_ring, TopologyKind::grid_2col,
                 TopologyKind::complete, TopologyKind::custom}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

inline bool is_connected(int n, std::span<const Edge> edges) {
  if (n <= 1) return n == 1;
  std::vector<std::vector<int>> adj(n);
  for (const auto& e : edges) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  std::vector<bool> seen(n, false);
  std::queue<int> q;
  q.push(0);
  seen[0] = true;
  int reached = 1;
  while (!q.empty()) {
    int x = q.front();
    q.pop();
    for (int y : adj[x]) {
      if (!seen[y]) {
        seen[y] = true;
        ++reached;
        q.push(y);
      }
    }
  }
  return reached == n;
}

/// Connected undirected device graph. Immutable after construction.
class TopologyGraph {
 public:
  TopologyGraph(int node_count, std::vector<Edge> edges,
                TopologyKind kind = TopologyKind::custom)
      : n_(node_count), edges_(std::move(edges)), kind_(kind) {
    if (n_ < 1) throw Error("graph needs at least one node");
    for (auto& e : edges_) {
      e = make_edge(e.u, e.v);
      if (e.u < 0 || e.v >= n_)
        throw Error("edge (" + std::to_string(e.u + 1) + "," + std::to_string(e.v + 1) +
                    ") out of range for " + std::to_string(n_) + " nodes");
    }
    std::sort(edges_.begin(), edges_.end());
    if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end())
      throw Error("duplicate edge in topology");
    if (!is_connected(n_, edges_)) throw Error("topology is not connected");
    adj_.assign(n_, {});
    for (const auto& e : edges_) {
      adj_[e.u].push_back(e.v);
      adj_[e.v].push_back(e.u);
    }
    for (auto& a : adj_) std::sort(a.begin(), a.end());
  }

  int node_count() const noexcept { return n_; }
  std::span<const Edge> edges() const noexcept { return edges_; }
  TopologyKind kind() const noexcept { return kind_; }
  const std::vector<int>& neighbors(int node) const { return adj_.at(node); }
  int degree(int node) const { return static_cast<int>(adj_.at(node).size()); }

  bool has_edge(int a, int b) const {
    if (a == b) return false;
    return std::binary_search(edges_.begin(), edges_.end(), make_edge(a, b));
  }

  /// Records a known Hamiltonian ring (visiting order) so that ring search is
  /// skipped for large custom graphs. Throws if `order` is not such a ring.
  void tag_ring(std::vector<int> order) {
    std::vector<int> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    for (int k = 0; k < n_; ++k)
      if (static_cast<int>(sorted.size()) != n_ || sorted[k] != k)
        throw Error("ring tag must visit every node exactly once");
    for (int k = 0; k < n_ && n_ > 1; ++k)
      if (!has_edge(order[k], order[(k + 1) % n_])) throw Error("ring tag uses a missing edge");
    ring_tag_ = std::move(order);
  }

  const std::optional<std::vector<int>>& ring_tag() const noexcept { return ring_tag_; }

 private:
  int n_;
  std::vector<Edge> edges_;
  TopologyKind kind_;
  std::vector<std::vector<int>> adj_;
  std::optional<std::vector<int>> ring_tag_;
};

namespace detail {

inline std::vector<Edge> cycle_edges(std::span<const int> order) {
  std::vector<Edge> out;
  const auto n = order.size();
  if (n < 2) return out;
  for (std::size_t i = 0; i + 1 < n; ++i) out.push_back(make_edge(order[i], order[i + 1]));
  // Two nodes: the closing edge coincides with the only edge.
  if (n > 2) out.push_back(make_edge(order[n - 1], order[0]));
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<int> identity_order(int n) {
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  return order;
}

// Down column 0 (even indices), back up column 1 (odd indices).
inline std::vector<int> ladder_order(int n) {
  std::vector<int> order;
  for (int r = 0; r < n / 2; ++r) order.push_back(2 * r);
  for (int r = n / 2 - 1; r >= 0; --r) order.push_back(2 * r + 1);
  return order;
}

inline bool extend_cycle(const TopologyGraph& g, std::vector<int>& path,
                         std::vector<bool>& used) {
  const int n = g.node_count();
  if (static_cast<int>(path.size()) == n) return n == 2 || g.has_edge(path.back(), path.front());
  for (int next : g.neighbors(path.back())) {
    if (used[next]) continue;
    used[next] = true;
    path.push_back(next);
    if (extend_cycle(g, path, used)) return true;
    path.pop_back();
    used[next] = false;
  }
  return false;
}

}  // namespace detail

/// Largest custom graph for which Hamiltonian-ring search is attempted.
inline constexpr int kHamiltonianSearchLimit = 12;

/// Builds one of the standard device topologies. Nodes are numbered so that
/// the grid's two columns hold even and odd indices respectively.
///
/// quasi_ring is a ring plus floor(n/4) chords (4j, 4j+2).
inline TopologyGraph build_topology(TopologyKind kind, int n, std::uint64_t seed = 0) {
  (void)seed;  // all built-in kinds are deterministic in (kind, n)
  if (n < 2) throw Error("topology needs n >= 2, got " + std::to_string(n));
  std::vector<Edge> edges;
  switch (kind) {
    case TopologyKind::ring:
      edges = detail::cycle_edges(detail::identity_order(n));
      break;
    case TopologyKind::quasi_ring: {
      edges = detail::cycle_edges(detail::identity_order(n));
      for (int j = 0; j < n / 4; ++j) edges.push_back(make_edge(4 * j, (4 * j + 2) % n));
      break;
    }
    case TopologyKind::grid_2col: {
      if (n % 2 != 0) throw Error("grid_2col needs an even node count, got " + std::to_string(n));
      const int rows = n / 2;
      for (int r = 0; r < rows; ++r) {
        edges.push_back(make_edge(2 * r, 2 * r + 1));
        if (r + 1 < rows) {
          edges.push_back(make_edge(2 * r, 2 * r + 2));
          edges.push_back(make_edge(2 * r + 1, 2 * r + 3));
        }
      }
      break;
    }
    case TopologyKind::complete:
      for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) edges.push_back({a, b});
      break;
    case TopologyKind::custom:
      throw Error("custom topologies are built from an edge list");
  }
  return TopologyGraph(n, std::move(edges), kind);
}

/// Visiting order of a cycle through every node, if one exists in `g`.
/// Built-in kinds are decided structurally; custom graphs use their ring tag
/// or exhaustive search up to kHamiltonianSearchLimit nodes.
inline std::optional<std::vector<int>> find_hamiltonian_ring(const TopologyGraph& g) {
  const int n = g.node_count();
  if (g.ring_tag()) return *g.ring_tag();
  switch (g.kind()) {
    case TopologyKind::ring:
    case TopologyKind::quasi_ring:
    case TopologyKind::complete:
      return detail::identity_order(n);
    case TopologyKind::grid_2col:
      return detail::ladder_order(n);
    case TopologyKind::custom:
      break;
  }
  if (n == 1) return std::nullopt;
  if (n > kHamiltonianSearchLimit)
    throw SearchBudgetExceeded("Hamiltonian ring search undecidable at configured search budget (" +
                               std::to_string(n) + " > " +
                               std::to_string(kHamiltonianSearchLimit) + " nodes)");
  for (int v = 0; v < n; ++v)
    if (g.degree(v) < (n > 2 ? 2 : 1)) return std::nullopt;
  std::vector<int> path{0};
  std::vector<bool> used(n, false);
  used[0] = true;
  if (detail::extend_cycle(g, path, used)) return path;
  return std::nullopt;
}

inline bool contains_hamiltonian_ring(const TopologyGraph& g) {
  return find_hamiltonian_ring(g).has_value();
}

inline std::vector<Edge> ring_edges(std::span<const int> order) {
  return detail::cycle_edges(order);
}

/// One `i j` line per edge, 1-indexed.
inline std::string to_edge_list(const TopologyGraph& g) {
  std::ostringstream os;
  for (const auto& e : g.edges()) os << e.u + 1 << ' ' << e.v + 1 << '\n';
  return os.str();
}

/// Parses the edge-list format. Blank lines and lines starting with '#' are
/// skipped. When `node_count` is 0 it is inferred from the largest index.
inline TopologyGraph parse_edge_list(std::istream& in, int node_count = 0) {
  std::vector<Edge> edges;
  std::string line;
  int max_node = 0;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    int a = 0, b = 0;
    std::string rest;
    if (!(ls >> a >> b) || (ls >> rest) || a < 1 || b < 1)
      throw Error("edge list line " + std::to_string(lineno) + ": expected `i j` with 1-based indices");
    edges.push_back(make_edge(a - 1, b - 1));
    max_node = std::max({max_node, a, b});
  }
  return TopologyGraph(node_count > 0 ? node_count : std::max(max_node, 1), std::move(edges));
}

// ---------------------------------------------------------------------------
// Channels

enum class Coherence { per_aggregation_phase, per_round };
enum class FadingKind { unit, rayleigh };

inline std::string_view to_string(FadingKind k) {
  return k == FadingKind::unit ? "unit" : "rayleigh";
}

inline std::optional<FadingKind> parse_fading_kind(std::string_view s) {
  if (s == "unit") return FadingKind::unit;
  if (s == "rayleigh") return FadingKind::rayleigh;
  return std::nullopt;
}

struct FadingModel {
  FadingKind kind = FadingKind::rayleigh;
  double pathloss_exponent = 3.0;
  double reference_distance_m = 1.0;
  double area_side_m = 500.0;
};

struct Position {
  double x = 0;
  double y = 0;
};

/// Uniform device placement in a square of side `side_m`.
inline std::vector<Position> place_devices(int n, double side_m, std::uint64_t seed) {
  Rng rng{seed};
  std::uniform_real_distribution<double> u(0.0, side_m);
  std::vector<Position> pos(n);
  for (auto& p : pos) {
    p.x = u(rng);
    p.y = u(rng);
  }
  return pos;
}

/// Per-edge power gains for one coherence block.
class ChannelRealization {
 public:
  ChannelRealization(EdgeMap<double> gains, Coherence coherence, std::uint64_t seed)
      : gains_(std::move(gains)), coherence_(coherence), seed_(seed) {
    for (const auto& [e, h] : gains_)
      if (!(h > 0.0) || !std::isfinite(h)) throw Error("channel gain must be positive and finite");
  }

  double gain(int a, int b) const { return gains_.at(make_edge(a, b)); }
  double gain(const Edge& e) const { return gains_.at(e); }
  const EdgeMap<double>& gains() const noexcept { return gains_; }
  Coherence coherence() const noexcept { return coherence_; }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  EdgeMap<double> gains_;
  Coherence coherence_;
  std::uint64_t seed_;
};

/// Gains for fixed device positions: pathloss (d/d0)^-alpha, times unit-mean
/// exponential fading for the Rayleigh model.
inline ChannelRealization draw_channels(const TopologyGraph& g, const FadingModel& model,
                                        std::span<const Position> positions,
                                        std::uint64_t fading_seed,
                                        Coherence coherence = Coherence::per_aggregation_phase) {
  EdgeMap<double> gains;
  if (model.kind == FadingKind::unit) {
    for (const auto& e : g.edges()) gains[e] = 1.0;
    return ChannelRealization(std::move(gains), coherence, fading_seed);
  }
  if (static_cast<int>(positions.size()) != g.node_count())
    throw Error("device positions do not match node count");
  if (!(model.reference_distance_m > 0) || !(model.pathloss_exponent > 0))
    throw Error("fading model needs positive reference distance and pathloss exponent");
  Rng rng{fading_seed};
  std::exponential_distribution<double> fade(1.0);
  for (const auto& e : g.edges()) {
    const double dx = positions[e.u].x - positions[e.v].x;
    const double dy = positions[e.u].y - positions[e.v].y;
    const double d = std::max(std::hypot(dx, dy), model.reference_distance_m);
    const double pathloss = std::pow(d / model.reference_distance_m, -model.pathloss_exponent);
    double f = 0.0;
    while (!(f > 0.0)) f = fade(rng);
    gains[e] = pathloss * f;
  }
  return ChannelRealization(std::move(gains), coherence, fading_seed);
}

/// Places devices and draws fading from one seed.
inline ChannelRealization draw_channels(const TopologyGraph& g, const FadingModel& model,
                                        std::uint64_t seed,
                                        Coherence coherence = Coherence::per_aggregation_phase) {
  const auto pos = place_devices(g.node_count(), model.area_side_m, stream_seed(seed, "placement"));
  return draw_channels(g, model, pos, stream_seed(seed, "fading"), coherence);
}

}  // namespace adfl
