#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "privscore/core.hpp"
#include "privscore/graph.hpp"
#include "privscore/irt.hpp"

namespace privscore {

/// Reproducible random source: std::mt19937_64 (bit-exact by the C++
/// standard) with hand-rolled transforms so no library-specific
/// distribution code is involved.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi].
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(static_cast<std::uint64_t>(uniform() * static_cast<double>(span)) % span);
  }

  /// Uniform index in [0, n).
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(integer(0, static_cast<std::int64_t>(n) - 1)); }

  /// Standard normal by Box-Muller (one draw per call).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

/// Independent stream for one generation stage.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stage) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stage + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

enum class GraphMode { PreferentialAttachment, EgoSample };

struct ByteRange {
  std::int64_t lo = 1;
  std::int64_t hi = 1;
  bool operator==(const ByteRange&) const = default;
};

struct GenConfig {
  std::uint64_t seed = 1;
  std::size_t users = 200;
  std::size_t items = 12;
  int max_level = 3;

  GraphMode graph_mode = GraphMode::PreferentialAttachment;
  /// Mean edges added per arriving node; a fractional part is realized by
  /// a Bernoulli extra edge.
  double edges_per_node = 3.0;
  /// Ego-sample mode: node 0 is the seed, the next `first_hop` nodes are
  /// its connections and the rest are second-hop users linked only to
  /// first-hop users.
  std::size_t first_hop = 109;
  double second_hop_links = 7.0;
  double first_hop_density = 0.05;

  double discrimination_min = 0.5;
  double discrimination_max = 2.0;
  double threshold_min = -2.0;
  double threshold_max = 2.0;
  /// Minimum spacing between consecutive true thresholds of an item.
  double threshold_min_gap = 0.3;

  /// Attitude-degree coupling strength c >= 0.
  double coupling = 0.0;

  /// Byte range of levels 1..max_level, shared by every item unless
  /// `item_level_bytes` overrides it.
  std::vector<ByteRange> level_bytes = {{10, 80}, {120, 400}, {500, 1500}};
  std::vector<std::vector<ByteRange>> item_level_bytes;

  const std::vector<ByteRange>& bytes_for(std::size_t item) const {
    return item_level_bytes.empty() ? level_bytes : item_level_bytes.at(item);
  }

  void validate() const {
    if (users < 2) throw ValidationError("config: users must be >= 2");
    if (items < 1) throw ValidationError("config: items must be >= 1");
    if (max_level < 1) throw ValidationError("config: max_level must be >= 1");
    if (!(discrimination_min > 0 && discrimination_min <= discrimination_max))
      throw ValidationError("config: invalid discrimination range");
    if (!(threshold_min <= threshold_max)) throw ValidationError("config: invalid threshold range");
    if (threshold_min_gap < 0) throw ValidationError("config: threshold_min_gap must be >= 0");
    if ((max_level - 1) * threshold_min_gap > threshold_max - threshold_min)
      throw ValidationError("config: threshold range cannot fit the required gaps");
    if (coupling < 0) throw ValidationError("config: coupling must be >= 0");
    if (!item_level_bytes.empty() && item_level_bytes.size() != items)
      throw ValidationError("config: item_level_bytes must list every item");
    for (std::size_t i = 0; i < items; ++i) {
      const auto& r = bytes_for(i);
      if (r.size() != static_cast<std::size_t>(max_level))
        throw ValidationError("config: need one byte range per nonzero level");
      for (std::size_t k = 0; k < r.size(); ++k) {
        if (r[k].lo < 1 || r[k].hi < r[k].lo) throw ValidationError("config: byte range must satisfy 1 <= lo <= hi");
        if (k > 0 && r[k].lo <= r[k - 1].hi)
          throw ValidationError("config: byte ranges must be increasing and non-overlapping");
      }
    }
    if (graph_mode == GraphMode::PreferentialAttachment) {
      if (!(edges_per_node >= 1.0)) throw ValidationError("config: edges_per_node must be >= 1");
      if (edges_per_node + 1.0 >= static_cast<double>(users))
        throw ValidationError("config: edges_per_node must be smaller than users - 1");
    } else {
      if (first_hop < 1 || first_hop + 1 >= users) throw ValidationError("config: first_hop must be in [1, users - 2]");
      if (!(second_hop_links >= 1.0)) throw ValidationError("config: second_hop_links must be >= 1");
      if (!(first_hop_density >= 0.0 && first_hop_density <= 1.0))
        throw ValidationError("config: first_hop_density must be in [0, 1]");
    }
  }
};

inline UserRegistry synthetic_users(std::size_t n) {
  const auto width = std::to_string(n).size();
  std::vector<std::string> ids(n);
  for (std::size_t j = 0; j < n; ++j) {
    auto num = std::to_string(j + 1);
    ids[j] = "u" + std::string(width - num.size(), '0') + num;
  }
  return UserRegistry(std::move(ids));
}

inline ItemCatalog synthetic_items(std::size_t n) {
  const auto width = std::max<std::size_t>(2, std::to_string(n).size());
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto num = std::to_string(i + 1);
    ids[i] = "item" + std::string(width - num.size(), '0') + num;
  }
  return ItemCatalog(std::move(ids));
}

/// Synthetic social graph: preferential attachment or a two-hop ego sample.
inline SocialGraph generate_graph(const GenConfig& cfg) {
  cfg.validate();
  Rng rng(stream_seed(cfg.seed, 1));
  const std::size_t n = cfg.users;
  std::vector<Edge> edges;

  if (cfg.graph_mode == GraphMode::PreferentialAttachment) {
    const auto whole = static_cast<std::size_t>(std::floor(cfg.edges_per_node));
    const double frac = cfg.edges_per_node - static_cast<double>(whole);
    const std::size_t core = static_cast<std::size_t>(std::ceil(cfg.edges_per_node)) + 1;
    // Every endpoint appears once per incident edge: sampling from it is
    // degree-proportional.
    std::vector<std::size_t> endpoints;
    for (std::size_t u = 0; u < core; ++u)
      for (std::size_t v = u + 1; v < core; ++v) {
        edges.emplace_back(u, v);
        endpoints.push_back(u);
        endpoints.push_back(v);
      }
    std::vector<std::size_t> targets;
    for (std::size_t t = core; t < n; ++t) {
      std::size_t want = whole + (rng.bernoulli(frac) ? 1 : 0);
      want = std::min(want, t);
      targets.clear();
      while (targets.size() < want) {
        const auto cand = endpoints[rng.index(endpoints.size())];
        if (std::find(targets.begin(), targets.end(), cand) == targets.end()) targets.push_back(cand);
      }
      for (auto v : targets) {
        edges.emplace_back(v, t);
        endpoints.push_back(v);
        endpoints.push_back(t);
      }
    }
  } else {
    const std::size_t h1 = cfg.first_hop;
    for (std::size_t u = 1; u <= h1; ++u) edges.emplace_back(0, u);
    for (std::size_t u = 1; u <= h1; ++u)
      for (std::size_t v = u + 1; v <= h1; ++v)
        if (rng.bernoulli(cfg.first_hop_density)) edges.emplace_back(u, v);
    std::vector<std::size_t> targets;
    for (std::size_t t = h1 + 1; t < n; ++t) {
      // 1 + exponential with mean (second_hop_links - 1), floored.
      double u = rng.uniform();
      while (u <= 0.0) u = rng.uniform();
      auto want = 1 + static_cast<std::size_t>(std::floor(-std::log(u) * (cfg.second_hop_links - 1.0)));
      want = std::min(want, h1);
      targets.clear();
      while (targets.size() < want) {
        const auto cand = 1 + rng.index(h1);
        if (std::find(targets.begin(), targets.end(), cand) == targets.end()) targets.push_back(cand);
      }
      for (auto v : targets) edges.emplace_back(v, t);
    }
  }
  return SocialGraph(synthetic_users(n), edges);
}

/// Ground-truth attitudes: standard normal plus c times standardized degree.
inline std::vector<double> generate_attitudes(const SocialGraph& g, const GenConfig& cfg) {
  Rng rng(stream_seed(cfg.seed, 2));
  const std::size_t n = g.nodes();
  std::vector<double> theta(n);
  for (auto& t : theta) t = rng.normal();
  if (cfg.coupling > 0.0) {
    double mean = 0.0;
    for (std::size_t u = 0; u < n; ++u) mean += static_cast<double>(g.degree(u));
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t u = 0; u < n; ++u) var += std::pow(static_cast<double>(g.degree(u)) - mean, 2);
    const double sd = std::sqrt(var / static_cast<double>(n));
    if (sd > 0.0)
      for (std::size_t u = 0; u < n; ++u) theta[u] += cfg.coupling * (static_cast<double>(g.degree(u)) - mean) / sd;
  }
  return theta;
}

/// True item parameters drawn from the configured ranges, thresholds sorted
/// and separated by at least `threshold_min_gap`.
inline GradedItemParams generate_item_params(const GenConfig& cfg) {
  cfg.validate();
  Rng rng(stream_seed(cfg.seed, 3));
  GradedItemParams p;
  p.catalog = synthetic_items(cfg.items);
  p.max_level = cfg.max_level;
  p.items.resize(cfg.items);
  for (auto& item : p.items) {
    item.discrimination = rng.uniform(cfg.discrimination_min, cfg.discrimination_max);
    item.base_level = 0;
    for (int k = 1; k <= cfg.max_level; ++k) item.levels.push_back(k);
    for (int attempt = 0;; ++attempt) {
      item.thresholds.clear();
      for (int k = 0; k < cfg.max_level; ++k) item.thresholds.push_back(rng.uniform(cfg.threshold_min, cfg.threshold_max));
      std::sort(item.thresholds.begin(), item.thresholds.end());
      bool ok = true;
      for (std::size_t m = 1; m < item.thresholds.size(); ++m)
        ok = ok && item.thresholds[m] - item.thresholds[m - 1] >= cfg.threshold_min_gap;
      if (ok) break;
      if (attempt > 100000) throw ValidationError("config: could not draw separated thresholds");
    }
  }
  return p;
}

struct SyntheticGranularity {
  GranularityMatrix bytes;
  GranularityLevelMatrix levels;
  GradedItemParams truth;
};

/// Samples a level per (item, user) from the true graded model, then a byte
/// count uniformly from that level's range (level 0 is 0 bytes).
inline SyntheticGranularity generate_granularity(std::span<const double> theta, const UserRegistry& users,
                                                 const GenConfig& cfg) {
  cfg.validate();
  if (theta.size() != users.size()) throw ValidationError("attitude vector does not match registry");
  auto truth = generate_item_params(cfg);
  Rng level_rng(stream_seed(cfg.seed, 4));
  Rng byte_rng(stream_seed(cfg.seed, 5));
  SyntheticGranularity out{GranularityMatrix(truth.catalog, users),
                           GranularityLevelMatrix(truth.catalog, users, cfg.max_level), truth};
  for (std::size_t i = 0; i < cfg.items; ++i) {
    const auto& ranges = cfg.bytes_for(i);
    for (std::size_t j = 0; j < users.size(); ++j) {
      const auto probs = level_probabilities(truth.items[i], cfg.max_level, theta[j]);
      const double u = level_rng.uniform();
      int level = 0;
      double acc = 0.0;
      for (int k = 0; k <= cfg.max_level; ++k) {
        acc += probs[static_cast<std::size_t>(k)];
        level = k;
        if (u < acc) break;
      }
      out.levels(i, j) = level;
      if (level > 0) {
        const auto& r = ranges[static_cast<std::size_t>(level - 1)];
        out.bytes(i, j) = byte_rng.integer(r.lo, r.hi);
      }
    }
  }
  return out;
}

struct SyntheticDataset {
  SocialGraph graph;
  std::vector<double> theta;
  SyntheticGranularity granularity;
};

inline SyntheticDataset generate_dataset(const GenConfig& cfg) {
  SyntheticDataset d;
  d.graph = generate_graph(cfg);
  d.theta = generate_attitudes(d.graph, cfg);
  d.granularity = generate_granularity(d.theta, d.graph.registry(), cfg);
  return d;
}

}  // namespace privscore
