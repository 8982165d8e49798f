#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "privscore/core.hpp"
#include "privscore/irt.hpp"
#include "privscore/quadrature.hpp"

namespace privscore {

// ---------------------------------------------------------------------------
// Chi-square distribution
// ---------------------------------------------------------------------------

namespace detail {

/// Regularized lower incomplete gamma P(a, x) by its power series.
inline double gamma_p_series(double a, double x) {
  if (x <= 0) return 0.0;
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < 100000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-17) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

/// Regularized upper incomplete gamma Q(a, x) by Lentz's continued fraction.
inline double gamma_q_continued_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 100000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

/// Regularized upper incomplete gamma Q(a, x).
inline double regularized_gamma_q(double a, double x) {
  if (!(a > 0)) throw std::invalid_argument("gamma shape must be positive");
  if (x <= 0) return 1.0;
  if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
  return detail::gamma_q_continued_fraction(a, x);
}

/// Survival function of the chi-square distribution.
inline double chi_square_sf(double x, double df) {
  if (!(df > 0)) throw std::invalid_argument("chi-square degrees of freedom must be positive");
  return std::clamp(regularized_gamma_q(df / 2.0, x / 2.0), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Grouping
// ---------------------------------------------------------------------------

/// Equal-frequency split of users into K groups ordered by attitude.
/// Groups are 0-based here; the first N mod K groups hold one extra user.
struct GroupPartition {
  std::size_t groups = 0;
  std::vector<std::size_t> assignment;
  std::vector<std::vector<std::size_t>> members;

  std::size_t size(std::size_t g) const { return members.at(g).size(); }
};

inline GroupPartition partition_by_attitude(std::span<const double> attitude, std::size_t k) {
  const std::size_t n = attitude.size();
  if (k < 2) throw ValidationError("need at least 2 groups");
  if (k > n) throw ValidationError("more groups than users");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return attitude[a] < attitude[b]; });
  GroupPartition p;
  p.groups = k;
  p.assignment.assign(n, 0);
  p.members.assign(k, {});
  const std::size_t base = n / k, extra = n % k;
  std::size_t pos = 0;
  for (std::size_t g = 0; g < k; ++g) {
    const std::size_t len = base + (g < extra ? 1 : 0);
    for (std::size_t t = 0; t < len; ++t, ++pos) {
      p.assignment[order[pos]] = g;
      p.members[g].push_back(order[pos]);
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Goodness of fit
// ---------------------------------------------------------------------------

struct GofResult {
  std::size_t item = 0;
  double chi_square = 0.0;
  std::size_t degrees_of_freedom = 0;
  double p_value = 1.0;
  bool accepted = true;
  /// Terms whose expected count fell below the guard and were clamped.
  std::size_t guarded_terms = 0;
};

inline constexpr double kExpectedCountFloor = 1e-9;

/// Pearson statistic over groups x categories for one item:
/// sum (f_g o_gc - f_g e_gc)^2 / (f_g e_gc). With two categories this is
/// the usual share/hide statistic.
inline GofResult chi_square_item(std::size_t item, std::span<const double> group_sizes,
                                 std::span<const std::vector<double>> observed,
                                 std::span<const std::vector<double>> expected, std::size_t df,
                                 double alpha) {
  if (df < 1) throw ValidationError("goodness of fit needs at least one degree of freedom");
  GofResult res;
  res.item = item;
  res.degrees_of_freedom = df;
  for (std::size_t g = 0; g < group_sizes.size(); ++g) {
    const double f = group_sizes[g];
    for (std::size_t c = 0; c < observed[g].size(); ++c) {
      const double obs = f * observed[g][c];
      double exp = f * expected[g][c];
      if (obs == 0.0 && exp == 0.0) continue;
      if (exp < kExpectedCountFloor) {
        exp = kExpectedCountFloor;
        ++res.guarded_terms;
      }
      res.chi_square += (obs - exp) * (obs - exp) / exp;
    }
  }
  res.p_value = chi_square_sf(res.chi_square, static_cast<double>(df));
  res.accepted = res.p_value >= alpha;
  return res;
}

/// Binary goodness of fit of every item against per-user expected share
/// probabilities. `items` selects the items to test (all when empty).
inline std::vector<GofResult> goodness_of_fit(const ResponseMatrix& r, const GroupPartition& part,
                                              const VisibilityMatrix& expected, std::size_t df,
                                              double alpha = 0.05, std::span<const std::size_t> items = {}) {
  if (part.assignment.size() != r.users()) throw ValidationError("partition does not cover the registry");
  std::vector<std::size_t> all;
  if (items.empty()) {
    all.resize(r.items());
    std::iota(all.begin(), all.end(), std::size_t{0});
    items = all;
  }
  std::vector<double> sizes(part.groups);
  for (std::size_t g = 0; g < part.groups; ++g) sizes[g] = static_cast<double>(part.size(g));
  std::vector<GofResult> out;
  for (auto i : items) {
    std::vector<std::vector<double>> obs(part.groups, std::vector<double>(2, 0.0));
    std::vector<std::vector<double>> exp(part.groups, std::vector<double>(2, 0.0));
    for (std::size_t g = 0; g < part.groups; ++g) {
      double o = 0.0, e = 0.0;
      for (auto j : part.members[g]) {
        o += r(i, j);
        e += expected(i, j);
      }
      o /= sizes[g];
      e /= sizes[g];
      obs[g] = {o, 1.0 - o};
      exp[g] = {e, 1.0 - e};
    }
    out.push_back(chi_square_item(i, sizes, obs, exp, df, alpha));
  }
  return out;
}

/// Items with both shared and hidden responses.
inline std::vector<std::size_t> informative_items(const ResponseMatrix& r) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < r.items(); ++i) {
    const auto c = row_share_count(r, i);
    if (c > 0 && c < r.users()) out.push_back(i);
  }
  return out;
}

/// Naive model test: users grouped by share count, expected share rate
/// |R_i|/N in every group, K-1 degrees of freedom.
inline std::vector<GofResult> goodness_of_fit_naive(const ResponseMatrix& r, std::size_t k, double alpha = 0.05) {
  const auto counts = column_share_counts(r);
  std::vector<double> attitude(counts.begin(), counts.end());
  const auto part = partition_by_attitude(attitude, k);
  VisibilityMatrix expected(r.catalog(), r.registry(), 0.0);
  for (std::size_t i = 0; i < r.items(); ++i) {
    const double p = static_cast<double>(row_share_count(r, i)) / static_cast<double>(r.users());
    for (std::size_t j = 0; j < r.users(); ++j) expected(i, j) = p;
  }
  const auto items = informative_items(r);
  return goodness_of_fit(r, part, expected, k - 1, alpha, items);
}

/// How the IRT tests form groups and expected share rates.
/// RestPosterior: for each tested item, users are grouped by their EAP
/// attitude given their other responses, and the expected rate is the mean
/// posterior predictive probability under that same posterior. The tested
/// response then never influences its own group or expectation.
/// PlugIn: users are grouped by the full-data EAP attitude and the expected
/// rate is the group mean of the model probability at that point estimate.
/// Shrinkage makes this reject well-specified items once N is large.
enum class IrtExpectation { RestPosterior, PlugIn };

inline std::string_view to_string(IrtExpectation e) { return e == IrtExpectation::RestPosterior ? "rest" : "plugin"; }

inline IrtExpectation parse_irt_expectation(std::string_view s) {
  if (s == "rest") return IrtExpectation::RestPosterior;
  if (s == "plugin") return IrtExpectation::PlugIn;
  throw ValidationError("unknown IRT expectation '" + std::string(s) + "' (expected rest or plugin)");
}

namespace detail {

/// Leave-one-item-out posterior summaries for one item.
struct RestPosterior {
  std::vector<double> attitude;
  /// expected[j][c]: posterior predictive probability of category c.
  std::vector<std::vector<double>> expected;
};

/// prob[t][q][c] is the category probability of model item t at node q and
/// observed[t][j] the category user j gave. Returns one entry per item.
inline std::vector<RestPosterior> rest_posteriors(const std::vector<std::vector<std::vector<double>>>& prob,
                                                  const std::vector<std::vector<int>>& observed,
                                                  std::size_t users, const QuadratureRule& rule) {
  const std::size_t items = prob.size(), nq = rule.size();
  auto safe_log = [](double p) { return std::log(std::max(p, 1e-300)); };
  std::vector<RestPosterior> out(items);
  for (auto& r : out) {
    r.attitude.assign(users, 0.0);
    r.expected.assign(users, {});
  }
  std::vector<double> logw(nq), lw(nq);
  for (std::size_t q = 0; q < nq; ++q) logw[q] = std::log(rule.weights[q]);
  for (std::size_t j = 0; j < users; ++j) {
    for (std::size_t i = 0; i < items; ++i) {
      // Summed afresh rather than subtracted from a full total, so users
      // with equal other responses get bit-identical attitudes whatever
      // their response to item i.
      for (std::size_t q = 0; q < nq; ++q) {
        lw[q] = logw[q];
        for (std::size_t t = 0; t < items; ++t)
          if (t != i) lw[q] += safe_log(prob[t][q][static_cast<std::size_t>(observed[t][j])]);
      }
      const double top = *std::max_element(lw.begin(), lw.end());
      double z = 0.0;
      for (std::size_t q = 0; q < nq; ++q) z += lw[q] = std::exp(lw[q] - top);
      const std::size_t cats = prob[i][0].size();
      auto& e = out[i].expected[j];
      e.assign(cats, 0.0);
      double mean = 0.0;
      for (std::size_t q = 0; q < nq; ++q) {
        const double w = lw[q] / z;
        mean += w * rule.nodes[q];
        for (std::size_t k = 0; k < cats; ++k) e[k] += w * prob[i][q][k];
      }
      out[i].attitude[j] = mean;
    }
  }
  return out;
}

}  // namespace detail

/// IRT model test with K-2 degrees of freedom over the fitted items.
/// `theta` is used only by the plug-in variant.
inline std::vector<GofResult> goodness_of_fit_irt(const ResponseMatrix& r, const ItemParams& params,
                                                  const AbilityVector& theta, std::size_t k, double alpha = 0.05,
                                                  IrtExpectation mode = IrtExpectation::RestPosterior,
                                                  std::size_t quadrature_nodes = 21) {
  std::vector<std::size_t> items;
  for (std::size_t i = 0; i < params.items(); ++i)
    if (params.fitted(i)) items.push_back(i);
  if (k < 3) throw ValidationError("IRT goodness of fit needs at least 3 groups");
  if (mode == IrtExpectation::PlugIn) {
    const auto part = partition_by_attitude(theta.theta, k);
    const auto expected = irt_visibility(params, theta);
    return goodness_of_fit(r, part, expected, k - 2, alpha, items);
  }
  const auto rule = gauss_hermite_normal(quadrature_nodes);
  std::vector<std::vector<std::vector<double>>> prob;
  std::vector<std::vector<int>> observed;
  for (auto i : items) {
    auto& table = prob.emplace_back(rule.size());
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double p = logistic(params.discrimination[i] * (rule.nodes[q] - params.sensitivity[i]));
      table[q] = {1.0 - p, p};
    }
    auto row = r.row(i);
    observed.emplace_back(row.begin(), row.end());
  }
  const auto rest = detail::rest_posteriors(prob, observed, r.users(), rule);
  std::vector<GofResult> out;
  VisibilityMatrix expected(r.catalog(), r.registry(), 0.0);
  for (std::size_t t = 0; t < items.size(); ++t) {
    const auto part = partition_by_attitude(rest[t].attitude, k);
    for (std::size_t j = 0; j < r.users(); ++j) expected(items[t], j) = rest[t].expected[j][1];
    const std::size_t one[] = {items[t]};
    out.push_back(goodness_of_fit(r, part, expected, k - 2, alpha, one).front());
  }
  return out;
}

/// Graded goodness of fit: observed level fractions per group against the
/// group mean of per-user expected level probabilities.
template <typename ExpectedFn>
std::vector<GofResult> graded_goodness_of_fit(const GranularityLevelMatrix& glm, const GroupPartition& part,
                                              ExpectedFn&& expected, std::size_t df, double alpha,
                                              std::span<const std::size_t> items) {
  const auto levels = static_cast<std::size_t>(glm.max_level() + 1);
  std::vector<double> sizes(part.groups);
  for (std::size_t g = 0; g < part.groups; ++g) sizes[g] = static_cast<double>(part.size(g));
  std::vector<GofResult> out;
  for (auto i : items) {
    std::vector<std::vector<double>> obs(part.groups, std::vector<double>(levels, 0.0));
    std::vector<std::vector<double>> exp(part.groups, std::vector<double>(levels, 0.0));
    for (std::size_t g = 0; g < part.groups; ++g) {
      for (auto j : part.members[g]) {
        obs[g][static_cast<std::size_t>(glm(i, j))] += 1.0;
        for (std::size_t k = 0; k < levels; ++k) exp[g][k] += expected(i, j, static_cast<int>(k));
      }
      for (std::size_t k = 0; k < levels; ++k) {
        obs[g][k] /= sizes[g];
        exp[g][k] /= sizes[g];
      }
    }
    out.push_back(chi_square_item(i, sizes, obs, exp, df, alpha));
  }
  return out;
}

inline std::vector<std::size_t> multi_level_items(const GranularityLevelMatrix& glm) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < glm.items(); ++i) {
    auto row = glm.row(i);
    if (std::adjacent_find(row.begin(), row.end(), std::not_equal_to<>()) != row.end()) out.push_back(i);
  }
  return out;
}

/// Naive granularity test: users grouped by their summed level, expected
/// level fractions equal to the item's overall level fractions, K-1 df.
inline std::vector<GofResult> goodness_of_fit_graded_naive(const GranularityLevelMatrix& glm, std::size_t k,
                                                           double alpha = 0.05) {
  std::vector<double> attitude(glm.users(), 0.0);
  for (std::size_t i = 0; i < glm.items(); ++i)
    for (std::size_t j = 0; j < glm.users(); ++j) attitude[j] += glm(i, j);
  const auto part = partition_by_attitude(attitude, k);
  const auto levels = static_cast<std::size_t>(glm.max_level() + 1);
  std::vector<double> frac(glm.items() * levels, 0.0);
  for (std::size_t i = 0; i < glm.items(); ++i)
    for (int v : glm.row(i)) frac[i * levels + static_cast<std::size_t>(v)] += 1.0 / static_cast<double>(glm.users());
  const auto items = multi_level_items(glm);
  return graded_goodness_of_fit(
      glm, part, [&](std::size_t i, std::size_t, int lv) { return frac[i * levels + static_cast<std::size_t>(lv)]; },
      k - 1, alpha, items);
}

/// GRM granularity test with K-2 degrees of freedom; groups and expected
/// level fractions follow `mode` as in the binary IRT test.
inline std::vector<GofResult> goodness_of_fit_graded_irt(const GranularityLevelMatrix& glm,
                                                         const GradedItemParams& params,
                                                         const AbilityVector& theta, std::size_t k,
                                                         double alpha = 0.05,
                                                         IrtExpectation mode = IrtExpectation::RestPosterior,
                                                         std::size_t quadrature_nodes = 21) {
  std::vector<std::size_t> items;
  for (std::size_t i = 0; i < params.items.size(); ++i)
    if (params.fitted(i)) items.push_back(i);
  if (k < 3) throw ValidationError("IRT goodness of fit needs at least 3 groups");
  if (mode == IrtExpectation::PlugIn) {
    const auto part = partition_by_attitude(theta.theta, k);
    const auto prob = grm_level_probability(params, theta);
    return graded_goodness_of_fit(
        glm, part, [&](std::size_t i, std::size_t j, int lv) { return prob(i, j, lv); }, k - 2, alpha, items);
  }
  const auto rule = gauss_hermite_normal(quadrature_nodes);
  std::vector<std::vector<std::vector<double>>> prob;
  std::vector<std::vector<int>> observed;
  for (auto i : items) {
    auto& table = prob.emplace_back(rule.size());
    for (std::size_t q = 0; q < rule.size(); ++q)
      table[q] = level_probabilities(params.items[i], params.max_level, rule.nodes[q]);
    auto row = glm.row(i);
    observed.emplace_back(row.begin(), row.end());
  }
  const auto rest = detail::rest_posteriors(prob, observed, glm.users(), rule);
  std::vector<GofResult> out;
  for (std::size_t t = 0; t < items.size(); ++t) {
    const auto part = partition_by_attitude(rest[t].attitude, k);
    const std::size_t one[] = {items[t]};
    out.push_back(graded_goodness_of_fit(
                      glm, part,
                      [&](std::size_t, std::size_t j, int lv) { return rest[t].expected[j][static_cast<std::size_t>(lv)]; },
                      k - 2, alpha, one)
                      .front());
  }
  return out;
}

inline std::size_t accepted_count(std::span<const GofResult> results) {
  return static_cast<std::size_t>(
      std::count_if(results.begin(), results.end(), [](const GofResult& r) { return r.accepted; }));
}

// ---------------------------------------------------------------------------
// Correlation
// ---------------------------------------------------------------------------

/// Sample Pearson correlation.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("correlation inputs differ in length");
  if (x.size() < 2) throw NumericalError("correlation needs at least two observations");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double dx = x[t] - mx, dy = y[t] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw NumericalError("correlation undefined for a zero-variance input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double pearson(const ScoreVector& x, const ScoreVector& y) {
  if (!(x.registry() == y.registry())) throw ValidationError("score vectors cover different users");
  return pearson(x.values(), y.values());
}

/// Ranks starting at 1 with ties sharing their average rank.
inline std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t s = 0; s < order.size();) {
    std::size_t e = s;
    while (e + 1 < order.size() && x[order[e + 1]] == x[order[s]]) ++e;
    const double avg = (static_cast<double>(s) + static_cast<double>(e)) / 2.0 + 1.0;
    for (std::size_t t = s; t <= e; ++t) ranks[order[t]] = avg;
    s = e + 1;
  }
  return ranks;
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

enum class CorrelationMethod { Pearson, Spearman };

/// Labeled symmetric correlation matrix; undefined cells are empty.
struct CorrelationMatrix {
  std::vector<std::string> labels;
  std::vector<std::optional<double>> values;

  std::size_t size() const noexcept { return labels.size(); }
  std::optional<double> operator()(std::size_t a, std::size_t b) const { return values[a * size() + b]; }
};

inline CorrelationMatrix correlation_matrix(std::span<const ScoreVector> scores,
                                            CorrelationMethod method = CorrelationMethod::Pearson) {
  CorrelationMatrix m;
  const std::size_t n = scores.size();
  for (const auto& s : scores) {
    if (!(s.registry() == scores.front().registry()))
      throw ValidationError("score vectors cover different users");
    m.labels.emplace_back(s.label());
  }
  m.values.assign(n * n, std::nullopt);
  for (std::size_t a = 0; a < n; ++a) {
    m.values[a * n + a] = 1.0;
    for (std::size_t b = a + 1; b < n; ++b) {
      try {
        const double r = method == CorrelationMethod::Pearson ? pearson(scores[a].values(), scores[b].values())
                                                              : spearman(scores[a].values(), scores[b].values());
        m.values[a * n + b] = r;
        m.values[b * n + a] = r;
      } catch (const NumericalError&) {
      }
    }
  }
  return m;
}

}  // namespace privscore
