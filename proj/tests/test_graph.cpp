#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "privscore/evaluation.hpp"
#include "privscore/graph.hpp"

using namespace privscore;

namespace {

SocialGraph make(std::size_t n, std::vector<Edge> edges) { return SocialGraph(oracle::users(n), edges); }

SocialGraph cycle(std::size_t n) {
  std::vector<Edge> e;
  for (std::size_t u = 0; u < n; ++u) e.emplace_back(u, (u + 1) % n);
  return make(n, e);
}

SocialGraph complete(std::size_t n) {
  std::vector<Edge> e;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v) e.emplace_back(u, v);
  return make(n, e);
}

SocialGraph path(std::size_t n) {
  std::vector<Edge> e;
  for (std::size_t u = 0; u + 1 < n; ++u) e.emplace_back(u, u + 1);
  return make(n, e);
}

SocialGraph star(std::size_t leaves) {
  std::vector<Edge> e;
  for (std::size_t u = 1; u <= leaves; ++u) e.emplace_back(0, u);
  return make(leaves + 1, e);
}

}  // namespace

TEST(Graph, DropsDuplicatesAndSelfLoops) {
  GraphBuildReport rep;
  SocialGraph g(oracle::users(3), std::vector<Edge>{{0, 1}, {1, 0}, {2, 2}, {1, 2}}, &rep);
  EXPECT_EQ(g.edge_count(), 2u);
  EXPECT_EQ(rep.duplicates_dropped, 1u);
  EXPECT_EQ(rep.self_loops_dropped, 1u);
  EXPECT_TRUE(g.has_edge(1, 0));
  EXPECT_FALSE(g.has_edge(0, 2));
  EXPECT_EQ(g.degree(1), 2u);
  EXPECT_THROW(SocialGraph(oracle::users(2), std::vector<Edge>{{0, 5}}), ValidationError);
}

TEST(Graph, Components) {
  auto g = make(6, {{0, 1}, {1, 2}, {3, 4}});
  std::size_t count = 0;
  auto comp = connected_components(g, &count);
  EXPECT_EQ(count, 3u);
  EXPECT_EQ(comp[0], comp[2]);
  EXPECT_NE(comp[0], comp[3]);
  auto mask = largest_component(g);
  EXPECT_EQ(mask, (std::vector<bool>{true, true, true, false, false, false}));
}

TEST(PageRank, RegularGraphsAreUniform) {
  for (double d : {0.0, 0.5, 0.85}) {
    auto pr = pagerank(cycle(7), d);
    EXPECT_TRUE(pr.converged);
    for (double v : pr.scores.values()) EXPECT_NEAR(v, 1.0 / 7.0, 1e-12);
  }
}

TEST(PageRank, ZeroDampingIsUniform) {
  auto pr = pagerank(star(4), 0.0);
  for (double v : pr.scores.values()) EXPECT_NEAR(v, 0.2, 1e-15);
}

TEST(PageRank, StarMatchesLinearSolve) {
  auto g = star(3);
  auto pr = pagerank(g, 0.85).scores;
  auto ref = oracle::pagerank_solve(g, 0.85);
  for (std::size_t u = 0; u < 4; ++u) EXPECT_NEAR(pr[u], ref[u], 1e-9);
}

TEST(PageRank, RandomGraphsWithDanglingNodes) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng() % 11;
    auto g = make(n, oracle::random_edges(rng, n, 0.3));
    const double d = 0.05 + 0.9 * static_cast<double>(rng() % 100) / 100.0;
    auto pr = pagerank(g, d).scores;
    auto ref = oracle::pagerank_solve(g, d);
    double sum = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
      EXPECT_NEAR(pr[u], ref[u], 1e-9);
      EXPECT_GT(pr[u], 0.0);
      sum += pr[u];
    }
    EXPECT_NEAR(sum, 1.0, 1e-10);
  }
  EXPECT_THROW(pagerank(star(2), 1.0), ValidationError);
}

TEST(Eigenvector, SymmetricCases) {
  auto k4 = eigenvector_centrality(complete(4)).scores;
  for (double v : k4.values()) EXPECT_NEAR(v, 0.5, 1e-9);
  auto p3 = eigenvector_centrality(path(3)).scores;
  EXPECT_GT(p3[1], p3[0]);
  EXPECT_NEAR(p3[0], p3[2], 1e-12);
  EXPECT_THROW(eigenvector_centrality(make(3, {})), ValidationError);
}

TEST(Eigenvector, MatchesDenseSolve) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 6;
    auto edges = oracle::random_edges(rng, n, 0.5);
    if (edges.empty()) continue;
    auto g = make(n, edges);
    auto ev = eigenvector_centrality(g).scores;
    auto ref = oracle::principal_eigenvector(g, largest_component(g));
    for (std::size_t u = 0; u < n; ++u) EXPECT_NEAR(ev[u], ref[u], 1e-7) << "trial " << t;
  }
}

TEST(Eigenvector, BipartiteDoesNotOscillate) {
  auto r = eigenvector_centrality(star(5));
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.scores[0], std::sqrt(0.5), 1e-8);
}

TEST(Closeness, HandValues) {
  for (double v : closeness_centrality(complete(5)).values()) EXPECT_DOUBLE_EQ(v, 1.0);
  auto p3 = closeness_centrality(path(3));
  EXPECT_DOUBLE_EQ(p3[1], 1.0);
  EXPECT_DOUBLE_EQ(p3[0], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(closeness_centrality(star(6))[0], 1.0);
  EXPECT_EQ(closeness_centrality(make(3, {{0, 1}}))[2], 0.0);
}

TEST(Betweenness, HandValues) {
  for (double v : betweenness_centrality(complete(5)).values()) EXPECT_EQ(v, 0.0);
  EXPECT_DOUBLE_EQ(betweenness_centrality(path(5))[2], 4.0);
  auto norm = betweenness_centrality(path(5), true);
  EXPECT_DOUBLE_EQ(norm[2], 4.0 / 6.0);
}

TEST(Centrality, RandomGraphsMatchEnumeration) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng() % 12;
    const double p = 0.1 + 0.6 * static_cast<double>(rng() % 100) / 100.0;
    auto g = make(n, oracle::random_edges(rng, n, p));
    auto bc = betweenness_centrality(g);
    auto ref = oracle::betweenness(g);
    auto cc = closeness_centrality(g);
    auto frac = oracle::closeness_fraction(g);
    for (std::size_t u = 0; u < n; ++u) {
      EXPECT_NEAR(bc[u], ref[u], 1e-9);
      const double want = frac[u].second ? static_cast<double>(frac[u].first) / static_cast<double>(frac[u].second) : 0.0;
      EXPECT_NEAR(cc[u], want, 1e-12);
    }
  }
}

TEST(Centrality, RelabelingPermutesScores) {
  std::mt19937_64 rng(4);
  const std::size_t n = 10;
  auto edges = oracle::random_edges(rng, n, 0.35);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Edge> moved;
  for (auto [u, v] : edges) moved.emplace_back(perm[u], perm[v]);
  auto a = make(n, edges), b = make(n, moved);
  for (auto c : {Centrality::PageRank, Centrality::Closeness, Centrality::Betweenness}) {
    auto sa = score_psc(a, c).scores, sb = score_psc(b, c).scores;
    for (std::size_t u = 0; u < n; ++u) EXPECT_NEAR(sa[u], sb[perm[u]], 1e-10);
  }
}

TEST(Psc, MethodsAndLabels) {
  EXPECT_EQ(score_psc(cycle(5), Centrality::PageRank).scores.model(), ScoreModel::PSC_PRC);
  for (double v : score_psc(complete(4), Centrality::Betweenness).scores.values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(parse_centrality("evc"), Centrality::Eigenvector);
  EXPECT_THROW(parse_centrality("katz"), ValidationError);
}

TEST(Psna, ZeroDampingReturnsIntrinsic) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng() % 20;
    auto g = make(n, oracle::random_edges(rng, n, 0.3));
    std::vector<double> rho(n);
    for (auto& r : rho) r = u(rng);
    auto s = score_psna(g, rho, 0.0).scores;
    for (std::size_t v = 0; v < n; ++v) EXPECT_NEAR(s[v], rho[v], 1e-12);
  }
}

TEST(Psna, TwoNodeHandSolve) {
  // p1 = d p2 + (1-d) r1, p2 = d p1 + (1-d) r2 with r = rho / sum(rho).
  const double d = 0.5;
  std::vector<double> rho{1.0, 0.0};
  const double r1 = 1.0, r2 = 0.0;
  const double p1 = ((1 - d) * r1 + d * (1 - d) * r2) / (1 - d * d);
  const double p2 = ((1 - d) * r2 + d * (1 - d) * r1) / (1 - d * d);
  const double scale = 1.0 / (p1 - p2);
  auto s = score_psna(make(2, {{0, 1}}), rho, d).scores;
  EXPECT_NEAR(s[0], p1 * scale, 1e-12);
  EXPECT_NEAR(s[1], p2 * scale, 1e-12);
}

TEST(Psna, RegularGraphUniformRhoIsConstant) {
  std::vector<double> rho(6, 2.0);
  EXPECT_THROW(score_psna(cycle(6), rho, 0.85), NumericalError);  // zero range
  rho[0] = 2.5;
  auto s = score_psna(cycle(6), rho, 0.85).scores;
  EXPECT_GT(s[0], s[3]);
}

TEST(Psna, RaisingNeighbourNeverLowersPropagation) {
  auto g = make(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 0}, {1, 4}});
  std::vector<double> rho{1, 2, 3, 4, 5, 6};
  auto base = score_psna(g, rho, 0.85).propagated;
  for (std::size_t nb : g.neighbors(0)) {
    for (double bump : {0.5, 2.0, 10.0}) {
      auto r2 = rho;
      r2[nb] += bump;
      // Compare unnormalized mass: rescale by the restart totals.
      auto p = score_psna(g, r2, 0.85).propagated;
      const double before = base[0] * std::accumulate(rho.begin(), rho.end(), 0.0);
      const double after = p[0] * std::accumulate(r2.begin(), r2.end(), 0.0);
      EXPECT_GE(after, before - 1e-12);
    }
  }
}

TEST(Psna, InvalidIntrinsic) {
  EXPECT_THROW(score_psna(cycle(3), std::vector<double>{1, -1, 2}, 0.5), ValidationError);
  EXPECT_THROW(score_psna(cycle(3), std::vector<double>{1, 2}, 0.5), ValidationError);
}

TEST(GraphStats, HandCases) {
  auto tri = graph_stats(complete(3));
  EXPECT_DOUBLE_EQ(tri.average_clustering, 1.0);
  EXPECT_EQ(tri.diameter, 1u);
  EXPECT_DOUBLE_EQ(tri.average_path_length, 1.0);
  auto p4 = graph_stats(path(4));
  EXPECT_DOUBLE_EQ(p4.average_clustering, 0.0);
  EXPECT_EQ(p4.diameter, 3u);
  EXPECT_DOUBLE_EQ(p4.average_path_length, 5.0 / 3.0);
  auto empty = graph_stats(make(3, {}));
  EXPECT_EQ(empty.diameter, 0u);
  EXPECT_EQ(empty.edges, 0u);
}
