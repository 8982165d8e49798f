#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "privscore/core.hpp"
#include "privscore/quadrature.hpp"

namespace privscore {

/// Estimation settings shared by the 2PL and graded response fits.
struct FitConfig {
  std::size_t quadrature_nodes = 21;
  /// Convergence when the largest change of any discrimination or
  /// threshold between EM cycles falls below this value.
  double tolerance = 1e-4;
  int max_iterations = 500;
  double min_discrimination = 0.05;
  double max_discrimination = 10.0;
  /// 0 keeps the deterministic start; any other value jitters the starting
  /// discriminations reproducibly.
  std::uint64_t seed = 0;
};

enum class ItemFitStatus { Fitted, Constant };

struct ExcludedItem {
  std::size_t item = 0;
  int constant_level = 0;
};

/// Dichotomous 2PL parameters. Excluded items carry NaN parameters and the
/// constant response they were observed at.
struct ItemParams {
  ItemCatalog catalog;
  std::vector<double> discrimination;
  std::vector<double> sensitivity;
  std::vector<ItemFitStatus> status;
  std::vector<int> constant_response;

  std::size_t items() const noexcept { return discrimination.size(); }
  bool fitted(std::size_t i) const { return status.at(i) == ItemFitStatus::Fitted; }
};

/// One item of a graded response model. Category curves are cumulative:
/// P(level >= levels[m] | theta) = logistic(a_m * (theta - thresholds[m])).
/// The lowest observed level (base_level) has no threshold.
struct GradedItem {
  ItemFitStatus status = ItemFitStatus::Fitted;
  double discrimination = 1.0;
  int base_level = 0;
  std::vector<int> levels;
  std::vector<double> thresholds;
  /// Optional per-level slopes. When non-empty each cumulative curve uses
  /// its own slope; curves may then cross and category probabilities can
  /// become negative. Estimation never produces this form.
  std::vector<double> level_discrimination;

  double slope(std::size_t m) const {
    return level_discrimination.empty() ? discrimination : level_discrimination.at(m);
  }

  std::optional<std::size_t> threshold_index(int level) const {
    auto it = std::find(levels.begin(), levels.end(), level);
    if (it == levels.end()) return std::nullopt;
    return static_cast<std::size_t>(it - levels.begin());
  }
};

struct GradedItemParams {
  ItemCatalog catalog;
  int max_level = 3;
  std::vector<GradedItem> items;

  bool fitted(std::size_t i) const { return items.at(i).status == ItemFitStatus::Fitted; }
};

/// Per-user latent attitude estimates.
struct AbilityVector {
  UserRegistry registry;
  std::vector<double> theta;
  std::vector<double> posterior_sd;
  std::string method = "EAP";

  std::size_t size() const noexcept { return theta.size(); }
  double operator[](std::size_t j) const { return theta[j]; }
};

template <typename Params>
struct FitResult {
  Params params;
  AbilityVector abilities;
  double log_likelihood = 0.0;
  /// Marginal log-likelihood at the start of every EM cycle.
  std::vector<double> log_likelihood_trace;
  bool converged = false;
  int iterations = 0;
  std::vector<ExcludedItem> excluded;
};

inline double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace detail {

/// Ordinal responses of the items entering the fit; category 0 is the
/// lowest observed level.
struct CategoricalData {
  std::size_t users = 0;
  std::vector<std::vector<int>> category;
  std::vector<int> category_count;
};

/// Slope-intercept state: P(cat >= m | x) = logistic(a x + intercept[m-1]),
/// intercepts strictly decreasing.
struct SlopeIntercept {
  double a = 1.0;
  std::vector<double> intercept;
};

/// p(cat = c | x) computed from whichever tail is better conditioned.
inline double category_probability(const SlopeIntercept& s, double x, int c) {
  const int k = static_cast<int>(s.intercept.size());
  const double hi = c == 0 ? std::numeric_limits<double>::infinity()
                           : s.a * x + s.intercept[static_cast<std::size_t>(c - 1)];
  const double lo = c == k ? -std::numeric_limits<double>::infinity()
                           : s.a * x + s.intercept[static_cast<std::size_t>(c)];
  double p;
  if (lo > 0)
    p = logistic(-lo) - (std::isinf(hi) ? 0.0 : logistic(-hi));
  else
    p = (std::isinf(hi) ? 1.0 : logistic(hi)) - (std::isinf(lo) ? 0.0 : logistic(lo));
  return std::max(p, 1e-300);
}

/// Expected complete-data log-likelihood of one item.
inline double item_objective(const SlopeIntercept& s, const std::vector<double>& counts,
                             const QuadratureRule& rule, int categories) {
  double f = 0.0;
  for (std::size_t q = 0; q < rule.size(); ++q)
    for (int c = 0; c < categories; ++c) {
      const double r = counts[q * static_cast<std::size_t>(categories) + static_cast<std::size_t>(c)];
      if (r > 0) f += r * std::log(category_probability(s, rule.nodes[q], c));
    }
  return f;
}

/// Gradient and Hessian with respect to (a, intercept_1..intercept_K).
inline void item_derivatives(const SlopeIntercept& s, const std::vector<double>& counts,
                             const QuadratureRule& rule, int categories, std::vector<double>& grad,
                             std::vector<double>& hess) {
  const std::size_t dim = static_cast<std::size_t>(categories);
  const std::size_t k = dim - 1;
  grad.assign(dim, 0.0);
  hess.assign(dim * dim, 0.0);
  std::vector<double> cum(k), d1(k), d2(k), dp(dim), d2p(dim * dim);
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const double x = rule.nodes[q];
    for (std::size_t m = 0; m < k; ++m) {
      cum[m] = logistic(s.a * x + s.intercept[m]);
      d1[m] = cum[m] * (1.0 - cum[m]);
      d2[m] = d1[m] * (1.0 - 2.0 * cum[m]);
    }
    for (int c = 0; c < categories; ++c) {
      const double r = counts[q * dim + static_cast<std::size_t>(c)];
      if (r <= 0) continue;
      const double p = category_probability(s, x, c);
      std::fill(dp.begin(), dp.end(), 0.0);
      std::fill(d2p.begin(), d2p.end(), 0.0);
      // p_c = cum_{c} - cum_{c+1} with cum_0 = 1 and cum_K+1 = 0 (1-based).
      auto add = [&](std::size_t m, double sign) {
        const std::size_t idx = m + 1;  // parameter slot of intercept m
        dp[idx] += sign * d1[m];
        dp[0] += sign * d1[m] * x;
        d2p[idx * dim + idx] += sign * d2[m];
        d2p[idx * dim + 0] += sign * d2[m] * x;
        d2p[0 * dim + idx] += sign * d2[m] * x;
        d2p[0] += sign * d2[m] * x * x;
      };
      if (c >= 1) add(static_cast<std::size_t>(c - 1), 1.0);
      if (static_cast<std::size_t>(c) < k) add(static_cast<std::size_t>(c), -1.0);
      for (std::size_t u = 0; u < dim; ++u) {
        grad[u] += r * dp[u] / p;
        for (std::size_t v = 0; v < dim; ++v)
          hess[u * dim + v] += r * (d2p[u * dim + v] / p - dp[u] * dp[v] / (p * p));
      }
    }
  }
}

/// Solves a small dense system by Gaussian elimination with partial pivoting.
inline bool solve_dense(std::vector<double> a, std::vector<double> b, std::vector<double>& x) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    if (std::abs(a[piv * n + col]) < 1e-300) return false;
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
      std::swap(b[col], b[piv]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / a[col * n + col];
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t c = r + 1; c < n; ++c) s -= a[r * n + c] * x[c];
    x[r] = s / a[r * n + r];
  }
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

inline bool feasible(const SlopeIntercept& s, const FitConfig& cfg) {
  if (!(s.a >= cfg.min_discrimination && s.a <= cfg.max_discrimination)) return false;
  for (std::size_t m = 0; m + 1 < s.intercept.size(); ++m)
    if (!(s.intercept[m] > s.intercept[m + 1])) return false;
  return std::all_of(s.intercept.begin(), s.intercept.end(), [](double v) { return std::isfinite(v); });
}

/// Generalized M-step: damped Newton ascent that only accepts steps keeping
/// the intercepts ordered, the slope inside its bounds and the objective
/// non-decreasing.
inline void maximize_item(SlopeIntercept& s, const std::vector<double>& counts,
                          const QuadratureRule& rule, int categories, const FitConfig& cfg) {
  double f = item_objective(s, counts, rule, categories);
  std::vector<double> grad, hess, step;
  for (int it = 0; it < 50; ++it) {
    item_derivatives(s, counts, rule, categories, grad, hess);
    std::vector<double> rhs(grad.size());
    for (std::size_t u = 0; u < grad.size(); ++u) rhs[u] = -grad[u];
    bool ok = solve_dense(hess, rhs, step);
    double ascent = 0.0;
    if (ok)
      for (std::size_t u = 0; u < grad.size(); ++u) ascent += grad[u] * step[u];
    if (!ok || !(ascent > 0)) {
      double gmax = 0.0;
      for (double g : grad) gmax = std::max(gmax, std::abs(g));
      if (gmax == 0.0) return;
      step = grad;
      for (auto& v : step) v *= 0.1 / gmax;
    }

    double scale = 1.0;
    bool accepted = false;
    double max_move = 0.0;
    for (int h = 0; h < 40; ++h, scale *= 0.5) {
      SlopeIntercept trial = s;
      trial.a = std::clamp(s.a + scale * step[0], cfg.min_discrimination, cfg.max_discrimination);
      for (std::size_t m = 0; m < trial.intercept.size(); ++m)
        trial.intercept[m] += scale * step[m + 1];
      if (!feasible(trial, cfg)) continue;
      const double ft = item_objective(trial, counts, rule, categories);
      if (ft >= f) {
        max_move = std::abs(trial.a - s.a);
        for (std::size_t m = 0; m < trial.intercept.size(); ++m)
          max_move = std::max(max_move, std::abs(trial.intercept[m] - s.intercept[m]));
        s = std::move(trial);
        f = ft;
        accepted = true;
        break;
      }
    }
    if (!accepted || max_move < 1e-10) return;
  }
}

struct EmOutput {
  std::vector<SlopeIntercept> states;
  std::vector<double> theta;
  std::vector<double> posterior_sd;
  double log_likelihood = 0.0;
  std::vector<double> trace;
  bool converged = false;
  int iterations = 0;
};

/// One E-step: posterior over quadrature nodes per user. Fills the expected
/// category counts per item and returns the marginal log-likelihood.
inline double e_step(const CategoricalData& data, const std::vector<SlopeIntercept>& states,
                     const QuadratureRule& rule, std::vector<std::vector<double>>* counts,
                     std::vector<double>* theta, std::vector<double>* sd) {
  const std::size_t items = states.size();
  const std::size_t nq = rule.size();
  std::vector<std::vector<double>> logp(items);
  for (std::size_t i = 0; i < items; ++i) {
    const int cats = data.category_count[i];
    logp[i].resize(nq * static_cast<std::size_t>(cats));
    for (std::size_t q = 0; q < nq; ++q)
      for (int c = 0; c < cats; ++c)
        logp[i][q * static_cast<std::size_t>(cats) + static_cast<std::size_t>(c)] =
            std::log(category_probability(states[i], rule.nodes[q], c));
  }
  if (counts) {
    counts->resize(items);
    for (std::size_t i = 0; i < items; ++i)
      (*counts)[i].assign(nq * static_cast<std::size_t>(data.category_count[i]), 0.0);
  }
  if (theta) theta->assign(data.users, 0.0);
  if (sd) sd->assign(data.users, 0.0);

  std::vector<double> logw(nq);
  for (std::size_t q = 0; q < nq; ++q) logw[q] = std::log(rule.weights[q]);
  std::vector<double> post(nq);
  double ll = 0.0;
  for (std::size_t j = 0; j < data.users; ++j) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < nq; ++q) {
      double s = logw[q];
      for (std::size_t i = 0; i < items; ++i) {
        const auto cats = static_cast<std::size_t>(data.category_count[i]);
        s += logp[i][q * cats + static_cast<std::size_t>(data.category[i][j])];
      }
      post[q] = s;
      top = std::max(top, s);
    }
    double z = 0.0;
    for (std::size_t q = 0; q < nq; ++q) {
      post[q] = std::exp(post[q] - top);
      z += post[q];
    }
    ll += top + std::log(z);
    double mean = 0.0;
    for (std::size_t q = 0; q < nq; ++q) {
      post[q] /= z;
      mean += post[q] * rule.nodes[q];
    }
    if (theta) (*theta)[j] = mean;
    if (sd) {
      double var = 0.0;
      for (std::size_t q = 0; q < nq; ++q) var += post[q] * (rule.nodes[q] - mean) * (rule.nodes[q] - mean);
      (*sd)[j] = std::sqrt(var);
    }
    if (counts)
      for (std::size_t i = 0; i < items; ++i) {
        const auto cats = static_cast<std::size_t>(data.category_count[i]);
        const auto c = static_cast<std::size_t>(data.category[i][j]);
        auto& row = (*counts)[i];
        for (std::size_t q = 0; q < nq; ++q) row[q * cats + c] += post[q];
      }
  }
  return ll;
}

inline double threshold_of(const SlopeIntercept& s, std::size_t m) { return -s.intercept[m] / s.a; }

/// Marginal maximum likelihood by EM over a fixed Gauss-Hermite grid.
inline EmOutput run_graded_em(const CategoricalData& data, const FitConfig& cfg) {
  if (cfg.quadrature_nodes < 2) throw ValidationError("need at least 2 quadrature nodes");
  if (!(cfg.min_discrimination > 0 && cfg.min_discrimination < cfg.max_discrimination))
    throw ValidationError("invalid discrimination bounds");
  const auto rule = gauss_hermite_normal(cfg.quadrature_nodes);
  const std::size_t items = data.category.size();

  EmOutput out;
  out.states.resize(items);
  std::mt19937_64 rng(cfg.seed);
  for (std::size_t i = 0; i < items; ++i) {
    const int cats = data.category_count[i];
    std::vector<double> at_least(static_cast<std::size_t>(cats), 0.0);
    for (int c : data.category[i])
      for (int m = 0; m <= c; ++m) at_least[static_cast<std::size_t>(m)] += 1.0;
    auto& s = out.states[i];
    s.a = 1.0;
    if (cfg.seed != 0) s.a *= 0.8 + 0.4 * static_cast<double>(rng() >> 11) * 0x1.0p-53;
    s.a = std::clamp(s.a, cfg.min_discrimination, cfg.max_discrimination);
    s.intercept.resize(static_cast<std::size_t>(cats - 1));
    for (int m = 1; m < cats; ++m) {
      double p = at_least[static_cast<std::size_t>(m)] / static_cast<double>(data.users);
      p = std::clamp(p, 1e-4, 1.0 - 1e-4);
      s.intercept[static_cast<std::size_t>(m - 1)] = std::log(p / (1.0 - p));
    }
  }

  std::vector<std::vector<double>> counts;
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    const double ll = e_step(data, out.states, rule, &counts, nullptr, nullptr);
    out.trace.push_back(ll);
    double change = 0.0;
    for (std::size_t i = 0; i < items; ++i) {
      const auto before = out.states[i];
      maximize_item(out.states[i], counts[i], rule, data.category_count[i], cfg);
      change = std::max(change, std::abs(out.states[i].a - before.a));
      for (std::size_t m = 0; m < before.intercept.size(); ++m)
        change = std::max(change, std::abs(threshold_of(out.states[i], m) - threshold_of(before, m)));
    }
    out.iterations = iter + 1;
    if (change < cfg.tolerance) {
      out.converged = true;
      break;
    }
  }
  out.log_likelihood = e_step(data, out.states, rule, nullptr, &out.theta, &out.posterior_sd);
  return out;
}

}  // namespace detail

/// Fits the two-parameter logistic model to a share/hide matrix. Items that
/// every user shares (or nobody shares) are excluded and reported.
inline FitResult<ItemParams> fit_2pl(const ResponseMatrix& r, const FitConfig& cfg = {}) {
  if (r.users() < 30) throw ValidationError("2PL fit needs at least 30 users");
  FitResult<ItemParams> res;
  auto& p = res.params;
  p.catalog = r.catalog();
  const auto nan = std::numeric_limits<double>::quiet_NaN();
  p.discrimination.assign(r.items(), nan);
  p.sensitivity.assign(r.items(), nan);
  p.status.assign(r.items(), ItemFitStatus::Fitted);
  p.constant_response.assign(r.items(), -1);

  detail::CategoricalData data;
  data.users = r.users();
  std::vector<std::size_t> fitted;
  for (std::size_t i = 0; i < r.items(); ++i) {
    const auto shared = row_share_count(r, i);
    if (shared == 0 || shared == r.users()) {
      p.status[i] = ItemFitStatus::Constant;
      p.constant_response[i] = shared == 0 ? 0 : 1;
      res.excluded.push_back({i, p.constant_response[i]});
      continue;
    }
    auto row = r.row(i);
    data.category.emplace_back(row.begin(), row.end());
    data.category_count.push_back(2);
    fitted.push_back(i);
  }
  if (fitted.empty()) throw ValidationError("no item has both shared and hidden responses");

  auto em = detail::run_graded_em(data, cfg);
  for (std::size_t f = 0; f < fitted.size(); ++f) {
    p.discrimination[fitted[f]] = em.states[f].a;
    p.sensitivity[fitted[f]] = detail::threshold_of(em.states[f], 0);
  }
  res.abilities = AbilityVector{r.registry(), std::move(em.theta), std::move(em.posterior_sd), "EAP"};
  res.log_likelihood = em.log_likelihood;
  res.log_likelihood_trace = std::move(em.trace);
  res.converged = em.converged;
  res.iterations = em.iterations;
  return res;
}

/// Fits Samejima's graded response model (one slope per item, ordered
/// thresholds) to a level matrix. Levels never observed for an item are
/// collapsed; items observed at a single level are excluded and reported.
inline FitResult<GradedItemParams> fit_grm(const GranularityLevelMatrix& glm, const FitConfig& cfg = {}) {
  if (glm.users() < 30) throw ValidationError("GRM fit needs at least 30 users");
  FitResult<GradedItemParams> res;
  auto& p = res.params;
  p.catalog = glm.catalog();
  p.max_level = glm.max_level();
  p.items.resize(glm.items());

  detail::CategoricalData data;
  data.users = glm.users();
  std::vector<std::size_t> fitted;
  for (std::size_t i = 0; i < glm.items(); ++i) {
    auto row = glm.row(i);
    std::vector<int> observed(row.begin(), row.end());
    std::sort(observed.begin(), observed.end());
    observed.erase(std::unique(observed.begin(), observed.end()), observed.end());
    auto& item = p.items[i];
    item.base_level = observed.front();
    if (observed.size() < 2) {
      item.status = ItemFitStatus::Constant;
      item.discrimination = std::numeric_limits<double>::quiet_NaN();
      res.excluded.push_back({i, observed.front()});
      continue;
    }
    item.levels.assign(observed.begin() + 1, observed.end());
    std::vector<int> cat(row.size());
    for (std::size_t j = 0; j < row.size(); ++j)
      cat[j] = static_cast<int>(std::lower_bound(observed.begin(), observed.end(), row[j]) - observed.begin());
    data.category.push_back(std::move(cat));
    data.category_count.push_back(static_cast<int>(observed.size()));
    fitted.push_back(i);
  }
  if (fitted.empty()) throw ValidationError("no item is observed at two or more levels");

  auto em = detail::run_graded_em(data, cfg);
  for (std::size_t f = 0; f < fitted.size(); ++f) {
    auto& item = p.items[fitted[f]];
    item.discrimination = em.states[f].a;
    item.thresholds.resize(em.states[f].intercept.size());
    for (std::size_t m = 0; m < item.thresholds.size(); ++m)
      item.thresholds[m] = detail::threshold_of(em.states[f], m);
  }
  res.abilities = AbilityVector{glm.registry(), std::move(em.theta), std::move(em.posterior_sd), "EAP"};
  res.log_likelihood = em.log_likelihood;
  res.log_likelihood_trace = std::move(em.trace);
  res.converged = em.converged;
  res.iterations = em.iterations;
  return res;
}

using VisibilityMatrix = ItemUserMatrix<double>;

/// 2PL share probabilities. Excluded items keep their constant response.
inline VisibilityMatrix irt_visibility(const ItemParams& params, const AbilityVector& theta) {
  VisibilityMatrix v(params.catalog, theta.registry, 0.0);
  for (std::size_t i = 0; i < params.items(); ++i)
    for (std::size_t j = 0; j < theta.size(); ++j)
      v(i, j) = params.fitted(i)
                    ? logistic(params.discrimination[i] * (theta[j] - params.sensitivity[i]))
                    : static_cast<double>(params.constant_response[i]);
  return v;
}

/// IRT policy-based score: sum over fitted items of sensitivity x visibility.
inline ScoreVector score_psi(const ItemParams& params, const AbilityVector& theta) {
  const auto v = irt_visibility(params, theta);
  std::vector<double> scores(theta.size(), 0.0);
  for (std::size_t j = 0; j < theta.size(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < params.items(); ++i)
      if (params.fitted(i)) s += params.sensitivity[i] * v(i, j);
    scores[j] = s;
  }
  return ScoreVector(theta.registry, ScoreModel::PSI, std::move(scores));
}

/// Category probabilities P(level = k | theta) for every (item, user, k).
struct GradedProbability {
  std::size_t items = 0;
  std::size_t users = 0;
  int max_level = 0;
  std::vector<double> values;

  double operator()(std::size_t i, std::size_t j, int k) const {
    return values[(i * users + j) * static_cast<std::size_t>(max_level + 1) + static_cast<std::size_t>(k)];
  }
};

/// Probability of each level for one item at one attitude, as differences
/// of adjacent cumulative curves.
inline std::vector<double> level_probabilities(const GradedItem& item, int max_level, double theta) {
  std::vector<double> out(static_cast<std::size_t>(max_level + 1), 0.0);
  if (item.status == ItemFitStatus::Constant) {
    out[static_cast<std::size_t>(item.base_level)] = 1.0;
    return out;
  }
  double above = 1.0;  // P(level >= current category)
  int level = item.base_level;
  for (std::size_t m = 0; m <= item.levels.size(); ++m) {
    const double next = m < item.levels.size()
                            ? logistic(item.slope(m) * (theta - item.thresholds[m]))
                            : 0.0;
    out[static_cast<std::size_t>(level)] = above - next;
    above = next;
    if (m < item.levels.size()) level = item.levels[m];
  }
  return out;
}

inline GradedProbability grm_level_probability(const GradedItemParams& params, const AbilityVector& theta) {
  const auto stride = static_cast<std::size_t>(params.max_level + 1);
  GradedProbability p{params.items.size(), theta.size(), params.max_level,
                      std::vector<double>(params.items.size() * theta.size() * stride, 0.0)};
  for (std::size_t i = 0; i < params.items.size(); ++i)
    for (std::size_t j = 0; j < theta.size(); ++j) {
      auto probs = level_probabilities(params.items[i], params.max_level, theta[j]);
      std::copy(probs.begin(), probs.end(), p.values.begin() + static_cast<std::ptrdiff_t>((i * theta.size() + j) * stride));
    }
  return p;
}

/// Per-level IRT sensitivity: the threshold of level k, or 0 for a level
/// without a threshold (the item's lowest observed level or unobserved levels).
inline double graded_sensitivity(const GradedItem& item, int level) {
  auto m = item.threshold_index(level);
  return m ? item.thresholds[*m] : 0.0;
}

/// IRT granularity-based score: sum over fitted items and levels k >= 1 of
/// threshold_k x P(level = k | theta) x k.
inline ScoreVector score_psgi(const GradedItemParams& params, const AbilityVector& theta) {
  std::vector<double> scores(theta.size(), 0.0);
  for (std::size_t j = 0; j < theta.size(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < params.items.size(); ++i) {
      const auto& item = params.items[i];
      if (item.status != ItemFitStatus::Fitted) continue;
      const auto probs = level_probabilities(item, params.max_level, theta[j]);
      for (int k = 1; k <= params.max_level; ++k)
        s += graded_sensitivity(item, k) * probs[static_cast<std::size_t>(k)] * k;
    }
    scores[j] = s;
  }
  return ScoreVector(theta.registry, ScoreModel::PSGI, std::move(scores));
}

/// P(level >= k | theta) over a grid for one fitted item.
inline std::vector<double> item_characteristic_curve(const GradedItemParams& params, std::size_t item,
                                                     int level, std::span<const double> grid) {
  if (item >= params.items.size()) throw std::out_of_range("unknown item index");
  const auto& it = params.items[item];
  auto m = it.threshold_index(level);
  if (it.status != ItemFitStatus::Fitted || !m)
    throw std::out_of_range("item " + params.catalog.id(item) + " has no curve for level " + std::to_string(level));
  std::vector<double> out;
  out.reserve(grid.size());
  for (double t : grid) out.push_back(logistic(it.slope(*m) * (t - it.thresholds[*m])));
  return out;
}

inline std::vector<double> item_characteristic_curve(const ItemParams& params, std::size_t item,
                                                     std::span<const double> grid) {
  if (item >= params.items()) throw std::out_of_range("unknown item index");
  if (!params.fitted(item)) throw std::out_of_range("item " + params.catalog.id(item) + " was not fitted");
  std::vector<double> out;
  out.reserve(grid.size());
  for (double t : grid)
    out.push_back(logistic(params.discrimination[item] * (t - params.sensitivity[item])));
  return out;
}

}  // namespace privscore
