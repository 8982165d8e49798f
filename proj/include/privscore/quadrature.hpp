#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace privscore {

/// Quadrature rule for expectations under the standard normal density:
/// E[f(Z)] ~= sum_q weights[q] * f(nodes[q]).
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const noexcept { return nodes.size(); }
};

/// Gauss-Hermite rule with `count` nodes, rescaled from the physicists'
/// weight exp(-t^2) to the standard normal. Nodes are ascending.
inline QuadratureRule gauss_hermite_normal(std::size_t count) {
  if (count < 1) throw std::invalid_argument("quadrature needs at least one node");
  const auto n = static_cast<int>(count);
  std::vector<double> t(count), w(count);
  const double pim4 = 1.0 / std::pow(std::numbers::pi, 0.25);
  double z = 0.0;
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Asymptotic starting guesses for the i-th largest root.
    if (i == 0)
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
    else if (i == 1)
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    else if (i == 2)
      z = 1.86 * z - 0.86 * t[0];
    else if (i == 3)
      z = 1.91 * z - 0.91 * t[1];
    else
      z = 2.0 * z - t[static_cast<std::size_t>(i - 2)];

    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      // Orthonormal Hermite recurrence.
      double p1 = pim4;
      double p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    t[static_cast<std::size_t>(i)] = z;
    t[count - 1 - static_cast<std::size_t>(i)] = -z;
    w[static_cast<std::size_t>(i)] = 2.0 / (pp * pp);
    w[count - 1 - static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(i)];
  }

  QuadratureRule rule;
  rule.nodes.resize(count);
  rule.weights.resize(count);
  const double inv_sqrt_pi = 1.0 / std::sqrt(std::numbers::pi);
  for (std::size_t q = 0; q < count; ++q) {
    // t is descending; emit ascending.
    rule.nodes[q] = std::numbers::sqrt2 * t[count - 1 - q];
    rule.weights[q] = w[count - 1 - q] * inv_sqrt_pi;
  }
  if (count % 2 == 1) rule.nodes[count / 2] = 0.0;
  return rule;
}

}  // namespace privscore
