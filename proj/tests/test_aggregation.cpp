#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "adfl/aggregation.hpp"
#include "adfl/oracle.hpp"

using namespace adfl;

namespace {

Eigen::MatrixXd random_params(int n, int k, Rng& rng) {
  std::normal_distribution<double> g(0.0, 3.0);
  Eigen::MatrixXd x(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) x(i, j) = g(rng);
  return x;
}

}  // namespace

TEST(Kruskal, Triangle) {
  const TopologyGraph g(3, {{0, 1}, {1, 2}, {0, 2}});
  const EdgeMap<double> w{{{0, 1}, 1.0}, {{1, 2}, 2.0}, {{0, 2}, 3.0}};
  const auto tree = kruskal_mst(g, w);
  EXPECT_EQ(tree, (std::vector<Edge>{{0, 1}, {1, 2}}));
  EXPECT_DOUBLE_EQ(total_weight(tree, w), 3.0);
}

TEST(Kruskal, TreeIsItsOwnMst) {
  const TopologyGraph g(5, {{0, 1}, {1, 2}, {1, 3}, {3, 4}});
  EdgeMap<double> w;
  for (const auto& e : g.edges()) w[e] = 1.0 + e.u;
  EXPECT_EQ(kruskal_mst(g, w), std::vector<Edge>(g.edges().begin(), g.edges().end()));
}

TEST(Kruskal, TieBreakIsLexicographic) {
  const TopologyGraph g(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}});
  EdgeMap<double> w;
  for (const auto& e : g.edges()) w[e] = 1.0;
  // All equal: (0,1), (0,3), (1,2) are taken before (2,3).
  EXPECT_EQ(kruskal_mst(g, w), (std::vector<Edge>{{0, 1}, {0, 3}, {1, 2}}));
}

TEST(Kruskal, MatchesExhaustiveEnumeration) {
  Rng rng{77};
  for (int k = 0; k < 30; ++k) {
    const auto g = oracle::random_connected_graph(8, 0.5, rng);
    const auto w = oracle::random_weights(g, 0.5, 5.0, rng);
    const auto tree = kruskal_mst(g, w);
    EXPECT_TRUE(is_spanning_tree(8, tree));
    EXPECT_DOUBLE_EQ(total_weight(tree, w), oracle::min_spanning_tree_weight(g, w));
  }
}

TEST(Kruskal, RejectsBadWeights) {
  const TopologyGraph g(2, {{0, 1}});
  EXPECT_THROW(kruskal_mst(g, EdgeMap<double>{}), Error);
  EXPECT_THROW(kruskal_mst(g, EdgeMap<double>{{{0, 1}, -1.0}}), Error);
}

TEST(Gossip, MetropolisIsSymmetricDoublyStochastic) {
  for (auto kind : {TopologyKind::ring, TopologyKind::grid_2col, TopologyKind::complete, TopologyKind::quasi_ring}) {
    const auto g = build_topology(kind, 10);
    const auto w = metropolis_weights(g);
    EXPECT_LT((w - w.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((w.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-14);
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j)
        if (i != j && !g.has_edge(i, j)) {
          EXPECT_EQ(w(i, j), 0.0);
        }
  }
}

TEST(Gossip, SlemMatchesGeneralEigensolver) {
  for (auto kind : {TopologyKind::ring, TopologyKind::grid_2col, TopologyKind::complete, TopologyKind::quasi_ring}) {
    for (int n : {4, 6, 10, 16}) {
      const auto w = metropolis_weights(build_topology(kind, n));
      EXPECT_NEAR(second_largest_eigenvalue_modulus(w), oracle::slem(w), 1e-10);
    }
  }
  const auto ring5 = metropolis_weights(build_topology(TopologyKind::ring, 5));
  EXPECT_NEAR(second_largest_eigenvalue_modulus(ring5), 0.53934466291663163, 1e-12);
}

TEST(Gossip, RoundsFromSpectrum) {
  EXPECT_EQ(gossip_rounds(0.5, 0.25), 2);
  EXPECT_EQ(gossip_rounds(0.0, 0.1), 1);
  EXPECT_THROW(gossip_rounds(0.5, 0.0), Error);
  EXPECT_THROW(gossip_rounds(1.0, 0.1), Error);
}

TEST(Plan, KnownChannelsGiveMst) {
  Rng rng{1};
  for (auto kind : {TopologyKind::ring, TopologyKind::grid_2col, TopologyKind::complete}) {
    const auto g = build_topology(kind, 8);
    const auto w = oracle::random_weights(g, 0.1, 1.0, rng);
    const auto p = plan_for_case(g, w, 0.05);
    EXPECT_EQ(p.scheme, Scheme::mst);
    EXPECT_EQ(p.rounds, 2);
    EXPECT_TRUE(is_spanning_tree(8, p.active_edges));
  }
}

TEST(Plan, UnknownChannelsRingGivesRingAllReduce) {
  const auto p = plan_for_case(build_topology(TopologyKind::ring, 7), std::nullopt, 0.05);
  EXPECT_EQ(p.scheme, Scheme::ring_allreduce);
  EXPECT_EQ(p.rounds, 6);
  EXPECT_EQ(p.active_edges.size(), 7u);
}

TEST(Plan, StarFallsBackToGossip) {
  const TopologyGraph star(4, {{0, 1}, {0, 2}, {0, 3}});
  const auto p = plan_for_case(star, std::nullopt, 0.05);
  EXPECT_EQ(p.scheme, Scheme::gossip);
  EXPECT_NEAR(p.slem, 0.75, 1e-12);
  EXPECT_EQ(p.rounds, 11);  // ceil(ln 20 / ln(4/3))
  EXPECT_THROW(plan_for_case(star, std::nullopt, 0.0), Error);
}

TEST(Plan, TwoNodeRingIsOneEdge) {
  const auto p = make_ring_plan(build_topology(TopologyKind::ring, 2));
  EXPECT_EQ(p.rounds, 1);
  EXPECT_EQ(p.active_edges.size(), 1u);
}

TEST(Execute, IdenticalInputsAreFixedPoints) {
  const auto g = build_topology(TopologyKind::grid_2col, 6);
  EdgeMap<double> w;
  for (const auto& e : g.edges()) w[e] = 1.0;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(6, 3);
  x.rowwise() += Eigen::RowVector3d(1.5, -2.0, 0.25);
  for (const auto& p : {make_mst_plan(g, w), make_ring_plan(g), make_gossip_plan(g, 0.05)}) {
    const auto r = execute_aggregation(x, p);
    EXPECT_LT((r.params - x).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT(r.consensus_error, 1e-14);
  }
}

TEST(Execute, TwoDeviceMean) {
  const TopologyGraph g(2, {{0, 1}});
  const auto p = make_mst_plan(g, EdgeMap<double>{{{0, 1}, 1.0}});
  Eigen::MatrixXd x(2, 1);
  x << 0.0, 2.0;
  const auto r = execute_aggregation(x, p);
  EXPECT_DOUBLE_EQ(r.params(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(r.params(1, 0), 1.0);
  EXPECT_THROW(execute_aggregation(Eigen::MatrixXd::Zero(3, 1), p), Error);
}

TEST(Execute, ExactSchemesReturnMean) {
  Rng rng{8};
  for (auto kind : {TopologyKind::ring, TopologyKind::grid_2col, TopologyKind::quasi_ring, TopologyKind::complete}) {
    const auto g = build_topology(kind, 12);
    const auto w = oracle::random_weights(g, 0.1, 1.0, rng);
    for (const auto& p : {make_mst_plan(g, w), make_ring_plan(g)}) {
      const auto x = random_params(12, 7, rng);
      const Eigen::RowVectorXd mean = x.colwise().mean();
      const auto r = execute_aggregation(x, p);
      for (int i = 0; i < 12; ++i)
        EXPECT_LE((r.params.row(i) - mean).cwiseAbs().maxCoeff(), 1e-10 * mean.cwiseAbs().maxCoeff());
    }
  }
}

TEST(Execute, GossipContractsAndPreservesMean) {
  Rng rng{12};
  const auto g = build_topology(TopologyKind::ring, 5);
  auto p = make_gossip_plan(g, 0.05);
  p.rounds = 30;
  const auto x = random_params(5, 4, rng);
  const auto r = execute_aggregation(x, p);
  const double lambda = oracle::slem(p.mixing);
  EXPECT_LE(r.spread_after, std::pow(lambda, 30) * r.spread_before * (1 + 1e-9));
  EXPECT_LT((r.params.colwise().mean() - x.colwise().mean()).norm(), 1e-10 * x.colwise().mean().norm());

  // One mixing step at a time keeps the mean.
  Eigen::MatrixXd y = x;
  for (int k = 0; k < 20; ++k) {
    const Eigen::RowVectorXd before = y.colwise().mean();
    y = p.mixing * y;
    EXPECT_LE((y.colwise().mean() - before).norm(), 1e-10 * std::max(1.0, before.norm()));
  }
}

TEST(Execute, MoreGossipRoundsNeverWorse) {
  Rng rng{13};
  const auto g = build_topology(TopologyKind::grid_2col, 10);
  const auto x = random_params(10, 3, rng);
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 40; ++k) {
    auto p = make_gossip_plan(g, 0.05);
    p.rounds = k;
    const double e = execute_aggregation(x, p).spread_after;
    EXPECT_LE(e, prev * (1 + 1e-12));
    prev = e;
  }
}

TEST(Execute, ReportsEnergyPerDevice) {
  const auto g = build_topology(TopologyKind::ring, 4);
  LinkCosts lc;
  for (const auto& e : g.edges()) lc.energy_j[e] = 1.0, lc.latency_s[e] = 0.5;
  const auto p = make_ring_plan(g);
  const auto r = execute_aggregation(Eigen::MatrixXd::Zero(4, 2), p, &lc);
  for (double e : r.comm_energy_j) EXPECT_DOUBLE_EQ(e, 3 * 2.0);  // K=3, two incident edges
  EXPECT_DOUBLE_EQ(r.comm_latency_s, 1.5);
}

TEST(SchemeEnergy, Examples) {
  const TopologyGraph tri(3, {{0, 1}, {1, 2}, {0, 2}});
  const EdgeMap<double> w{{{0, 1}, 1.0}, {{1, 2}, 2.0}, {{0, 2}, 3.0}};
  EXPECT_DOUBLE_EQ(scheme_energy(make_mst_plan(tri, w), w), 6.0);
  const auto ring3 = build_topology(TopologyKind::ring, 3);
  EdgeMap<double> ones;
  for (const auto& e : ring3.edges()) ones[e] = 1.0;
  EXPECT_DOUBLE_EQ(scheme_energy(make_ring_plan(ring3), ones), 6.0);
}

TEST(SchemeEnergy, TreeNeverCostsMoreThanRing) {
  Rng rng{21};
  std::uniform_int_distribution<int> size(4, 20);
  for (int k = 0; k < 100; ++k) {
    const auto g = oracle::random_graph_with_ring(size(rng), 0.2, rng);
    const auto w = oracle::random_weights(g, 1e-4, 1.0, rng);
    EXPECT_LE(scheme_energy(make_mst_plan(g, w), w), scheme_energy(make_ring_plan(g), w));
  }
}

TEST(Manifest, RoundTrip) {
  const auto g = build_topology(TopologyKind::grid_2col, 6);
  const auto p = make_gossip_plan(g, 0.06);
  std::stringstream ss;
  write_manifest(ss, p);
  const auto m = read_manifest(ss);
  EXPECT_EQ(m.scheme, Scheme::gossip);
  EXPECT_EQ(m.rounds, p.rounds);
  EXPECT_EQ(m.node_count, 6);
  EXPECT_DOUBLE_EQ(m.epsilon, 0.06);
  EXPECT_EQ(m.edges, p.active_edges);
}
