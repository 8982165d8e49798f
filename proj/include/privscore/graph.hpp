#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "privscore/core.hpp"

namespace privscore {

using Edge = std::pair<std::size_t, std::size_t>;

struct GraphBuildReport {
  std::size_t self_loops_dropped = 0;
  std::size_t duplicates_dropped = 0;
};

/// Undirected simple graph over the users of a registry.
class SocialGraph {
 public:
  SocialGraph() = default;

  /// Self-loops and repeated edges (in either orientation) are dropped and
  /// counted in `report`.
  SocialGraph(UserRegistry registry, std::span<const Edge> edges, GraphBuildReport* report = nullptr)
      : registry_(std::move(registry)), adjacency_(registry_.size()) {
    GraphBuildReport local;
    edges_.reserve(edges.size());
    for (auto [u, v] : edges) {
      if (u >= registry_.size() || v >= registry_.size())
        throw ValidationError("edge endpoint outside the user registry");
      if (u == v) {
        ++local.self_loops_dropped;
        continue;
      }
      edges_.emplace_back(std::min(u, v), std::max(u, v));
    }
    std::sort(edges_.begin(), edges_.end());
    const auto before = edges_.size();
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
    local.duplicates_dropped = before - edges_.size();
    for (auto [u, v] : edges_) {
      adjacency_[u].push_back(v);
      adjacency_[v].push_back(u);
    }
    for (auto& nb : adjacency_) std::sort(nb.begin(), nb.end());
    if (report) *report = local;
  }

  const UserRegistry& registry() const noexcept { return registry_; }
  std::size_t nodes() const noexcept { return adjacency_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  std::span<const std::size_t> neighbors(std::size_t u) const { return adjacency_.at(u); }
  std::size_t degree(std::size_t u) const { return adjacency_.at(u).size(); }

  bool has_edge(std::size_t u, std::size_t v) const {
    const auto& nb = adjacency_.at(u);
    return std::binary_search(nb.begin(), nb.end(), v);
  }

 private:
  UserRegistry registry_;
  std::vector<std::vector<std::size_t>> adjacency_;
  std::vector<Edge> edges_;
};

/// Component id per node, numbered in order of smallest member.
inline std::vector<std::size_t> connected_components(const SocialGraph& g, std::size_t* count = nullptr) {
  constexpr auto unset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> comp(g.nodes(), unset);
  std::size_t next = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < g.nodes(); ++s) {
    if (comp[s] != unset) continue;
    comp[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      for (auto v : g.neighbors(u))
        if (comp[v] == unset) {
          comp[v] = next;
          stack.push_back(v);
        }
    }
    ++next;
  }
  if (count) *count = next;
  return comp;
}

/// Membership mask of the largest connected component (ties go to the
/// component holding the smallest node index).
inline std::vector<bool> largest_component(const SocialGraph& g) {
  std::size_t count = 0;
  auto comp = connected_components(g, &count);
  std::vector<std::size_t> size(count, 0);
  for (auto c : comp) ++size[c];
  const auto best = static_cast<std::size_t>(std::max_element(size.begin(), size.end()) - size.begin());
  std::vector<bool> mask(g.nodes());
  for (std::size_t u = 0; u < g.nodes(); ++u) mask[u] = comp[u] == best;
  return mask;
}

namespace detail {

constexpr std::size_t unreachable = std::numeric_limits<std::size_t>::max();

inline void bfs_distances(const SocialGraph& g, std::size_t source, std::vector<std::size_t>& dist,
                          std::vector<std::size_t>& queue) {
  dist.assign(g.nodes(), unreachable);
  queue.clear();
  dist[source] = 0;
  queue.push_back(source);
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const auto u = queue[head];
    for (auto v : g.neighbors(u))
      if (dist[v] == unreachable) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
  }
}

}  // namespace detail

struct IterativeScores {
  ScoreVector scores;
  bool converged = false;
  int iterations = 0;
};

/// PageRank on the undirected graph. Degree-0 nodes spread their rank
/// uniformly; the teleport term is (1 - d) / |N|. Result sums to 1.
inline IterativeScores pagerank(const SocialGraph& g, double damping = 0.85, double tol = 1e-12,
                                int max_iter = 10000) {
  if (g.nodes() == 0) throw ValidationError("pagerank on an empty graph");
  if (!(damping >= 0.0 && damping < 1.0)) throw ValidationError("damping must lie in [0, 1)");
  const std::size_t n = g.nodes();
  const double nn = static_cast<double>(n);
  std::vector<double> rank(n, 1.0 / nn), next(n);
  IterativeScores out;
  for (int it = 1; it <= max_iter; ++it) {
    double dangling = 0.0;
    for (std::size_t u = 0; u < n; ++u)
      if (g.degree(u) == 0) dangling += rank[u];
    const double base = (1.0 - damping) / nn + damping * dangling / nn;
    double change = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
      double s = 0.0;
      for (auto v : g.neighbors(u)) s += rank[v] / static_cast<double>(g.degree(v));
      next[u] = base + damping * s;
      change = std::max(change, std::abs(next[u] - rank[u]));
    }
    rank.swap(next);
    out.iterations = it;
    if (change < tol) {
      out.converged = true;
      break;
    }
  }
  double total = 0.0;
  for (double r : rank) total += r;
  for (double& r : rank) r /= total;
  out.scores = ScoreVector(g.registry(), ScoreModel::PSC_PRC, std::move(rank));
  return out;
}

/// Principal eigenvector of the adjacency matrix on the largest connected
/// component (unit Euclidean norm, non-negative); other nodes score 0.
/// Iterates on A + I so bipartite components do not oscillate.
inline IterativeScores eigenvector_centrality(const SocialGraph& g, double tol = 1e-10,
                                              int max_iter = 100000) {
  if (g.edge_count() == 0) throw ValidationError("eigenvector centrality needs at least one edge");
  const std::size_t n = g.nodes();
  const auto mask = largest_component(g);
  std::size_t members = 0;
  for (bool b : mask) members += b;
  std::vector<double> x(n, 0.0), y(n, 0.0);
  for (std::size_t u = 0; u < n; ++u)
    if (mask[u]) x[u] = 1.0 / std::sqrt(static_cast<double>(members));
  IterativeScores out;
  for (int it = 1; it <= max_iter; ++it) {
    double norm = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
      if (!mask[u]) continue;
      double s = x[u];
      for (auto v : g.neighbors(u)) s += x[v];
      y[u] = s;
      norm += s * s;
    }
    norm = std::sqrt(norm);
    double change = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
      if (!mask[u]) continue;
      y[u] /= norm;
      change = std::max(change, std::abs(y[u] - x[u]));
    }
    x.swap(y);
    out.iterations = it;
    if (change < tol) {
      out.converged = true;
      break;
    }
  }
  out.scores = ScoreVector(g.registry(), ScoreModel::PSC_EVC, std::move(x));
  return out;
}

/// Closeness (|C| - 1) / sum of BFS distances, where C is the node's own
/// connected component. Isolated nodes score 0.
inline ScoreVector closeness_centrality(const SocialGraph& g) {
  std::vector<double> cc(g.nodes(), 0.0);
  std::vector<std::size_t> dist, queue;
  for (std::size_t s = 0; s < g.nodes(); ++s) {
    detail::bfs_distances(g, s, dist, queue);
    std::size_t total = 0;
    for (auto u : queue) total += dist[u];
    if (total > 0) cc[s] = static_cast<double>(queue.size() - 1) / static_cast<double>(total);
  }
  return ScoreVector(g.registry(), ScoreModel::PSC_CC, std::move(cc));
}

/// Betweenness over unordered node pairs by Brandes' dependency
/// accumulation. `normalized` divides by the number of pairs excluding the
/// node, (N-1)(N-2)/2.
inline ScoreVector betweenness_centrality(const SocialGraph& g, bool normalized = false) {
  const std::size_t n = g.nodes();
  std::vector<double> bc(n, 0.0);
  std::vector<double> sigma(n), delta(n);
  std::vector<std::size_t> dist(n), order;
  order.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(delta.begin(), delta.end(), 0.0);
    std::fill(dist.begin(), dist.end(), detail::unreachable);
    order.clear();
    sigma[s] = 1.0;
    dist[s] = 0;
    order.push_back(s);
    for (std::size_t head = 0; head < order.size(); ++head) {
      const auto v = order[head];
      for (auto w : g.neighbors(v)) {
        if (dist[w] == detail::unreachable) {
          dist[w] = dist[v] + 1;
          order.push_back(w);
        }
        if (dist[w] == dist[v] + 1) sigma[w] += sigma[v];
      }
    }
    for (std::size_t k = order.size(); k-- > 1;) {
      const auto w = order[k];
      for (auto v : g.neighbors(w))
        if (dist[v] + 1 == dist[w]) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
      bc[w] += delta[w];
    }
  }
  // Each unordered pair was accumulated from both endpoints.
  double scale = 0.5;
  if (normalized && n > 2) scale /= static_cast<double>((n - 1) * (n - 2)) / 2.0;
  for (double& b : bc) b *= scale;
  return ScoreVector(g.registry(), ScoreModel::PSC_BC, std::move(bc));
}

enum class Centrality { PageRank, Eigenvector, Closeness, Betweenness };

inline Centrality parse_centrality(std::string_view name) {
  if (name == "prc") return Centrality::PageRank;
  if (name == "evc") return Centrality::Eigenvector;
  if (name == "cc") return Centrality::Closeness;
  if (name == "bc") return Centrality::Betweenness;
  throw ValidationError("unknown centrality method '" + std::string(name) + "' (expected prc, evc, cc or bc)");
}

struct CentralityOptions {
  double damping = 0.85;
  bool normalized_betweenness = false;
};

/// Centrality-as-privacy-score.
inline IterativeScores score_psc(const SocialGraph& g, Centrality method, const CentralityOptions& opt = {}) {
  switch (method) {
    case Centrality::PageRank: return pagerank(g, opt.damping);
    case Centrality::Eigenvector: return eigenvector_centrality(g);
    case Centrality::Closeness: return {closeness_centrality(g), true, 1};
    case Centrality::Betweenness: return {betweenness_centrality(g, opt.normalized_betweenness), true, 1};
  }
  throw ValidationError("unknown centrality method");
}

struct PsnaResult {
  ScoreVector scores;
  /// Fixed point before range rescaling.
  std::vector<double> propagated;
  bool converged = false;
  int iterations = 0;
};

/// Network-aware score: personalized PageRank whose restart distribution is
/// the intrinsic score vector, then rescaled so its range matches rho's.
/// The walk matrix is column-stochastic (column j divided by degree k_j);
/// degree-0 columns spread uniformly.
inline PsnaResult score_psna(const SocialGraph& g, std::span<const double> rho, double damping = 0.85,
                             double tol = 1e-12, int max_iter = 100000) {
  const std::size_t n = g.nodes();
  if (rho.size() != n) throw ValidationError("intrinsic score vector does not match the graph");
  if (!(damping >= 0.0 && damping < 1.0)) throw ValidationError("damping must lie in [0, 1)");
  double total = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double r : rho) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw ValidationError("intrinsic scores must be finite and >= 0");
    total += r;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  if (!(hi - lo > 0.0)) throw NumericalError("intrinsic scores have zero range; PSNA normalization undefined");

  const double nn = static_cast<double>(n);
  std::vector<double> restart(n);
  for (std::size_t u = 0; u < n; ++u) restart[u] = (1.0 - damping) * rho[u] / total;
  std::vector<double> p(n, 1.0 / nn), next(n);
  PsnaResult out;
  for (int it = 1; it <= max_iter; ++it) {
    double dangling = 0.0;
    for (std::size_t u = 0; u < n; ++u)
      if (g.degree(u) == 0) dangling += p[u];
    double change = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
      double s = dangling / nn;
      for (auto v : g.neighbors(u)) s += p[v] / static_cast<double>(g.degree(v));
      next[u] = damping * s + restart[u];
      change = std::max(change, std::abs(next[u] - p[u]));
    }
    p.swap(next);
    out.iterations = it;
    // Tolerance applies on the output scale, after range rescaling.
    const auto [cmin, cmax] = std::minmax_element(p.begin(), p.end());
    if (*cmax > *cmin) change *= (hi - lo) / (*cmax - *cmin);
    if (change < tol) {
      out.converged = true;
      break;
    }
  }
  const auto [pmin, pmax] = std::minmax_element(p.begin(), p.end());
  const double prange = *pmax - *pmin;
  if (!(prange > 0.0)) throw NumericalError("propagated scores have zero range; PSNA normalization undefined");
  const double factor = (hi - lo) / prange;
  std::vector<double> scores(n);
  for (std::size_t u = 0; u < n; ++u) scores[u] = p[u] * factor;
  out.propagated = std::move(p);
  out.scores = ScoreVector(g.registry(), ScoreModel::PSNA, std::move(scores));
  return out;
}

struct GraphStats {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  double average_clustering = 0.0;
  std::size_t diameter = 0;
  double average_path_length = 0.0;
};

/// Local clustering of one node; 0 below degree 2.
inline double local_clustering(const SocialGraph& g, std::size_t u) {
  const auto nb = g.neighbors(u);
  if (nb.size() < 2) return 0.0;
  std::size_t links = 0;
  for (std::size_t a = 0; a < nb.size(); ++a)
    for (std::size_t b = a + 1; b < nb.size(); ++b) links += g.has_edge(nb[a], nb[b]);
  return 2.0 * static_cast<double>(links) / static_cast<double>(nb.size() * (nb.size() - 1));
}

/// Size, clustering and path statistics; path statistics are taken on the
/// largest connected component.
inline GraphStats graph_stats(const SocialGraph& g) {
  GraphStats s;
  s.nodes = g.nodes();
  s.edges = g.edge_count();
  if (g.nodes() == 0 || g.edge_count() == 0) return s;
  double cc = 0.0;
  for (std::size_t u = 0; u < g.nodes(); ++u) cc += local_clustering(g, u);
  s.average_clustering = cc / static_cast<double>(g.nodes());

  const auto mask = largest_component(g);
  std::vector<std::size_t> dist, queue;
  std::uint64_t total = 0, pairs = 0;
  for (std::size_t src = 0; src < g.nodes(); ++src) {
    if (!mask[src]) continue;
    detail::bfs_distances(g, src, dist, queue);
    for (auto u : queue) {
      if (u == src) continue;
      total += dist[u];
      ++pairs;
      s.diameter = std::max(s.diameter, dist[u]);
    }
  }
  if (pairs > 0) s.average_path_length = static_cast<double>(total) / static_cast<double>(pairs);
  return s;
}

}  // namespace privscore
