#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "privscore/core.hpp"

namespace privscore {

namespace detail {

inline bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

}  // namespace detail

/// Collapses ASCII whitespace runs to one space and trims both ends.
inline std::string normalize_payload(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (detail::is_ascii_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

/// Granularity of one shared profile entry: UTF-8 byte length after
/// whitespace normalization. Empty or whitespace-only text measures 0.
inline std::int64_t measure_bytes(std::string_view text) {
  return static_cast<std::int64_t>(normalize_payload(text).size());
}

/// Granularity of a list-valued item (e.g. several education entries).
/// Non-empty entries are joined with a one-byte separator.
inline std::int64_t measure_bytes(std::span<const std::string> entries) {
  std::int64_t total = 0;
  std::int64_t parts = 0;
  for (const auto& e : entries) {
    auto b = measure_bytes(e);
    if (b == 0) continue;
    total += b;
    ++parts;
  }
  return parts == 0 ? 0 : total + (parts - 1);
}

struct Ckmeans1dResult {
  /// Cluster index per input value (same order as the input), numbered by
  /// increasing cluster mean.
  std::vector<int> cluster;
  std::vector<double> centers;
  std::vector<std::size_t> sizes;
  /// Smallest value of each cluster.
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> within_ss;
  double total_ss = 0.0;
  std::size_t requested_k = 0;
  std::size_t k = 0;
  bool reduced() const noexcept { return k < requested_k; }
};

/// Optimal one-dimensional k-means by dynamic programming over the sorted
/// distinct values (Wang & Song). Equal values are never split across
/// clusters. If k exceeds the number of distinct values it is reduced to
/// that count; `reduced()` reports it.
inline Ckmeans1dResult ckmeans_1d(std::span<const double> values, std::size_t k) {
  if (values.empty()) throw ValidationError("ckmeans_1d: values must be non-empty");
  if (k < 1) throw ValidationError("ckmeans_1d: k must be >= 1");
  for (double v : values)
    if (!std::isfinite(v)) throw ValidationError("ckmeans_1d: values must be finite");

  std::map<double, std::size_t> counts;
  for (double v : values) ++counts[v];
  std::vector<double> x;
  std::vector<double> w;
  x.reserve(counts.size());
  w.reserve(counts.size());
  for (auto [v, c] : counts) {
    x.push_back(v);
    w.push_back(static_cast<double>(c));
  }
  const std::size_t m = x.size();

  Ckmeans1dResult res;
  res.requested_k = k;
  res.k = std::min(k, m);
  const std::size_t kk = res.k;

  // Weighted prefix sums, shifted by the median to limit cancellation.
  const double shift = x[m / 2];
  std::vector<double> sw(m + 1, 0.0), s1(m + 1, 0.0), s2(m + 1, 0.0);
  for (std::size_t t = 0; t < m; ++t) {
    const double d = x[t] - shift;
    sw[t + 1] = sw[t] + w[t];
    s1[t + 1] = s1[t] + w[t] * d;
    s2[t + 1] = s2[t] + w[t] * d * d;
  }
  auto cost = [&](std::size_t a, std::size_t b) {  // inclusive [a, b]
    const double ww = sw[b + 1] - sw[a];
    const double m1 = s1[b + 1] - s1[a];
    const double c = (s2[b + 1] - s2[a]) - m1 * m1 / ww;
    return c > 0.0 ? c : 0.0;
  };

  const double inf = std::numeric_limits<double>::infinity();
  // dp[c][t]: best SSE of x[0..t] in c+1 clusters; start[c][t]: first index of the last cluster.
  std::vector<std::vector<double>> dp(kk, std::vector<double>(m, inf));
  std::vector<std::vector<std::size_t>> start(kk, std::vector<std::size_t>(m, 0));
  for (std::size_t t = 0; t < m; ++t) dp[0][t] = cost(0, t);
  for (std::size_t c = 1; c < kk; ++c) {
    for (std::size_t t = c; t < m; ++t) {
      double best = inf;
      std::size_t arg = t;
      for (std::size_t s = t + 1; s-- > c;) {
        const double cand = dp[c - 1][s - 1] + cost(s, t);
        if (cand < best) {
          best = cand;
          arg = s;
        }
      }
      dp[c][t] = best;
      start[c][t] = arg;
    }
  }

  std::vector<std::size_t> first(kk);
  std::size_t end = m - 1;
  for (std::size_t c = kk; c-- > 0;) {
    first[c] = c == 0 ? 0 : start[c][end];
    if (c > 0) end = first[c] - 1;
  }

  std::vector<int> distinct_cluster(m);
  for (std::size_t c = 0; c < kk; ++c) {
    const std::size_t last = c + 1 < kk ? first[c + 1] - 1 : m - 1;
    for (std::size_t t = first[c]; t <= last; ++t) distinct_cluster[t] = static_cast<int>(c);
  }

  res.cluster.resize(values.size());
  for (std::size_t q = 0; q < values.size(); ++q) {
    auto pos = std::lower_bound(x.begin(), x.end(), values[q]) - x.begin();
    res.cluster[q] = distinct_cluster[static_cast<std::size_t>(pos)];
  }

  // Report statistics directly from the partition (two-pass).
  res.centers.assign(kk, 0.0);
  res.sizes.assign(kk, 0);
  res.lower.assign(kk, inf);
  res.upper.assign(kk, -inf);
  res.within_ss.assign(kk, 0.0);
  for (std::size_t q = 0; q < values.size(); ++q) {
    auto c = static_cast<std::size_t>(res.cluster[q]);
    res.centers[c] += values[q];
    res.sizes[c] += 1;
    res.lower[c] = std::min(res.lower[c], values[q]);
    res.upper[c] = std::max(res.upper[c], values[q]);
  }
  for (std::size_t c = 0; c < kk; ++c) res.centers[c] /= static_cast<double>(res.sizes[c]);
  for (std::size_t q = 0; q < values.size(); ++q) {
    auto c = static_cast<std::size_t>(res.cluster[q]);
    const double d = values[q] - res.centers[c];
    res.within_ss[c] += d * d;
  }
  res.total_ss = 0.0;
  for (double s : res.within_ss) res.total_ss += s;
  return res;
}

/// Per-item map from nonzero byte counts to levels 1..level_count.
struct LevelAssignment {
  std::size_t item = 0;
  /// boundaries[k-1] is the smallest byte count that maps to level k+1.
  std::vector<std::int64_t> boundaries;
  std::vector<double> cluster_means;

  int level_count() const noexcept { return static_cast<int>(cluster_means.size()); }

  int level_of(std::int64_t bytes) const {
    if (bytes <= 0) return 0;
    if (cluster_means.empty()) return 1;
    auto it = std::upper_bound(boundaries.begin(), boundaries.end(), bytes);
    return 1 + static_cast<int>(it - boundaries.begin());
  }
};

struct LevelBuild {
  GranularityLevelMatrix levels;
  std::vector<LevelAssignment> assignments;
};

/// Clusters each item's nonzero byte counts into at most `max_level` levels.
/// Zero bytes always maps to level 0. Items are processed independently.
inline LevelBuild assign_levels(const GranularityMatrix& gm, int max_level = 3) {
  if (max_level < 1) throw ValidationError("max level must be >= 1");
  LevelBuild out{GranularityLevelMatrix(gm.catalog(), gm.registry(), max_level), {}};
  out.assignments.reserve(gm.items());
  for (std::size_t i = 0; i < gm.items(); ++i) {
    LevelAssignment a;
    a.item = i;
    std::vector<double> nonzero;
    for (auto b : gm.row(i))
      if (b > 0) nonzero.push_back(static_cast<double>(b));
    if (!nonzero.empty()) {
      auto km = ckmeans_1d(nonzero, static_cast<std::size_t>(max_level));
      a.cluster_means = km.centers;
      for (std::size_t c = 1; c < km.k; ++c)
        a.boundaries.push_back(static_cast<std::int64_t>(km.lower[c]));
      for (std::size_t j = 0; j < gm.users(); ++j) out.levels(i, j) = a.level_of(gm(i, j));
    }
    out.assignments.push_back(std::move(a));
  }
  return out;
}

inline GranularityLevelMatrix build_level_matrix(const GranularityMatrix& gm, int max_level = 3) {
  return assign_levels(gm, max_level).levels;
}

}  // namespace privscore
