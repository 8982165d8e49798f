#pragma once

#include <cstddef>
#include <vector>

#include "privscore/core.hpp"

namespace privscore {

/// Frequency-based item sensitivity: the fraction of users hiding the item.
inline std::vector<double> naive_sensitivity(const ResponseMatrix& r) {
  const auto n_users = static_cast<double>(r.users());
  std::vector<double> beta(r.items());
  for (std::size_t i = 0; i < r.items(); ++i)
    beta[i] = (n_users - static_cast<double>(row_share_count(r, i))) / n_users;
  return beta;
}

/// Visibility probabilities of the naive model. The default divides the
/// item share count by N and the user share count by n so that both factors
/// are probabilities. `literal_denominators` swaps them (|R_i|/n x |R^j|/N).
struct NaiveVisibility {
  std::vector<double> item;  ///< P_i per item
  std::vector<double> user;  ///< P^j per user

  double operator()(std::size_t i, std::size_t j) const { return item[i] * user[j]; }
};

inline NaiveVisibility naive_visibility(const ResponseMatrix& r, bool literal_denominators = false) {
  const auto n_items = static_cast<double>(r.items());
  const auto n_users = static_cast<double>(r.users());
  const double item_den = literal_denominators ? n_items : n_users;
  const double user_den = literal_denominators ? n_users : n_items;
  NaiveVisibility v;
  for (auto c : row_share_counts(r)) v.item.push_back(static_cast<double>(c) / item_den);
  for (auto c : column_share_counts(r)) v.user.push_back(static_cast<double>(c) / user_den);
  return v;
}

/// Naive policy-based score: sum over items of sensitivity x visibility.
inline ScoreVector score_psn(const ResponseMatrix& r, bool literal_denominators = false) {
  const auto beta = naive_sensitivity(r);
  const auto vis = naive_visibility(r, literal_denominators);
  std::vector<double> scores(r.users(), 0.0);
  for (std::size_t j = 0; j < r.users(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < r.items(); ++i) s += beta[i] * vis(i, j);
    scores[j] = s;
  }
  return ScoreVector(r.registry(), ScoreModel::PSN, std::move(scores));
}

/// Per-level naive sensitivities; row i holds beta_ik for k = 0..l, where
/// beta_ik is the fraction of users below level k on item i.
struct NaiveGradedSensitivity {
  std::size_t items = 0;
  int max_level = 0;
  std::vector<double> values;

  double operator()(std::size_t i, int k) const {
    return values[i * static_cast<std::size_t>(max_level + 1) + static_cast<std::size_t>(k)];
  }
};

inline NaiveGradedSensitivity naive_graded_sensitivity(const GranularityLevelMatrix& glm) {
  const int l = glm.max_level();
  const auto stride = static_cast<std::size_t>(l + 1);
  const auto n_users = static_cast<double>(glm.users());
  NaiveGradedSensitivity out{glm.items(), l, std::vector<double>(glm.items() * stride, 0.0)};
  for (std::size_t i = 0; i < glm.items(); ++i) {
    std::vector<std::size_t> at_least(stride, 0);
    for (int level : glm.row(i))
      for (int k = 0; k <= level; ++k) ++at_least[static_cast<std::size_t>(k)];
    for (std::size_t k = 0; k < stride; ++k)
      out.values[i * stride + k] = (n_users - static_cast<double>(at_least[k])) / n_users;
  }
  return out;
}

/// Level-share fractions of the naive graded model. P_ijk is the product of
/// the item's fraction of users at level k and the user's fraction of items
/// at level k.
struct NaiveGradedProbability {
  int max_level = 0;
  std::vector<double> item_level;  ///< items x (l+1)
  std::vector<double> user_level;  ///< users x (l+1)

  double operator()(std::size_t i, std::size_t j, int k) const {
    const auto stride = static_cast<std::size_t>(max_level + 1);
    const auto kk = static_cast<std::size_t>(k);
    return item_level[i * stride + kk] * user_level[j * stride + kk];
  }
};

inline NaiveGradedProbability naive_graded_probability(const GranularityLevelMatrix& glm) {
  const int l = glm.max_level();
  const auto stride = static_cast<std::size_t>(l + 1);
  NaiveGradedProbability p{l, std::vector<double>(glm.items() * stride, 0.0),
                           std::vector<double>(glm.users() * stride, 0.0)};
  for (std::size_t i = 0; i < glm.items(); ++i)
    for (std::size_t j = 0; j < glm.users(); ++j) {
      const auto k = static_cast<std::size_t>(glm(i, j));
      p.item_level[i * stride + k] += 1.0;
      p.user_level[j * stride + k] += 1.0;
    }
  for (auto& v : p.item_level) v /= static_cast<double>(glm.users());
  for (auto& v : p.user_level) v /= static_cast<double>(glm.items());
  return p;
}

/// Naive granularity-based score: sum over items and levels k >= 1 of
/// beta_ik x P_ijk x k.
inline ScoreVector score_psgn(const GranularityLevelMatrix& glm) {
  const auto beta = naive_graded_sensitivity(glm);
  const auto prob = naive_graded_probability(glm);
  std::vector<double> scores(glm.users(), 0.0);
  for (std::size_t j = 0; j < glm.users(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < glm.items(); ++i)
      for (int k = 1; k <= glm.max_level(); ++k) s += beta(i, k) * prob(i, j, k) * k;
    scores[j] = s;
  }
  return ScoreVector(glm.registry(), ScoreModel::PSGN, std::move(scores));
}

}  // namespace privscore
