#include <random>

#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "privscore/evaluation.hpp"
#include "privscore/quadrature.hpp"
#include "sim.hpp"

using namespace privscore;

namespace {

ItemCatalog items(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("i" + std::to_string(i));
  return ItemCatalog(ids);
}

}  // namespace

TEST(ChiSquare, SurvivalMatchesReference) {
  for (int df = 1; df <= 20; ++df)
    for (double x : {0.5, 1.0, 5.0, 10.0, 30.0}) {
      const double ref = boost::math::gamma_q(df / 2.0, x / 2.0);
      EXPECT_NEAR(chi_square_sf(x, df), ref, 1e-8) << "df=" << df << " x=" << x;
    }
}

TEST(ChiSquare, SeriesAndFractionAgree) {
  // Both algorithms converge near the switch point x = a + 1.
  for (double a : {0.5, 1.0, 3.5, 10.0})
    for (double x : {a + 0.9, a + 1.0, a + 1.1, a + 3.0}) {
      const double q1 = 1.0 - detail::gamma_p_series(a, x);
      const double q2 = detail::gamma_q_continued_fraction(a, x);
      EXPECT_NEAR(q1, q2, 1e-10) << a << " " << x;
    }
}

TEST(ChiSquare, EdgeValues) {
  EXPECT_DOUBLE_EQ(chi_square_sf(0.0, 3), 1.0);
  EXPECT_NEAR(chi_square_sf(2.0, 2), std::exp(-1.0), 1e-14);
}

TEST(Partition, EqualFrequency) {
  std::vector<double> a(10);
  std::iota(a.begin(), a.end(), 0.0);
  auto p = partition_by_attitude(a, 5);
  for (std::size_t g = 0; g < 5; ++g) EXPECT_EQ(p.size(g), 2u);

  auto p7 = partition_by_attitude(std::vector<double>{3, 1, 2, 7, 5, 4, 6}, 3);
  EXPECT_EQ(p7.size(0), 3u);
  EXPECT_EQ(p7.size(1), 2u);
  EXPECT_EQ(p7.size(2), 2u);
  EXPECT_EQ(p7.members[0], (std::vector<std::size_t>{1, 2, 0}));

  auto ties = partition_by_attitude(std::vector<double>(6, 1.0), 3);
  EXPECT_EQ(ties.members[0], (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(ties.members[2], (std::vector<std::size_t>{4, 5}));

  EXPECT_THROW(partition_by_attitude(std::vector<double>(2, 0.0), 3), ValidationError);
  EXPECT_THROW(partition_by_attitude(std::vector<double>(5, 0.0), 1), ValidationError);
}

TEST(Gof, PerfectFitIsZero) {
  std::vector<double> f{10, 10}, o{0.3, 0.6};
  std::vector<std::vector<double>> obs{{0.3, 0.7}, {0.6, 0.4}};
  auto r = chi_square_item(0, f, obs, obs, 1, 0.05);
  EXPECT_EQ(r.chi_square, 0.0);
  EXPECT_TRUE(r.accepted);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0);
}

TEST(Gof, HandExample) {
  std::vector<double> f{10, 10, 10}, obs_p{0.2, 0.5, 0.8}, exp_p{0.3, 0.5, 0.7};
  std::vector<std::vector<double>> obs, exp;
  for (std::size_t g = 0; g < 3; ++g) {
    obs.push_back({obs_p[g], 1 - obs_p[g]});
    exp.push_back({exp_p[g], 1 - exp_p[g]});
  }
  auto r = chi_square_item(0, f, obs, exp, 2, 0.05);
  const double want = oracle::chi_square_binary(f, obs_p, exp_p);
  EXPECT_NEAR(r.chi_square, want, 1e-12);
  // Written out: 2 x (1/3 + 1/7) for the outer groups, 0 for the middle.
  EXPECT_NEAR(r.chi_square, 2 * (1.0 / 3 + 1.0 / 7), 1e-12);
  EXPECT_NEAR(r.p_value, boost::math::gamma_q(1.0, r.chi_square / 2), 1e-12);
  EXPECT_EQ(r.accepted, r.p_value >= 0.05);
}

TEST(Gof, GuardClampsTinyExpectations) {
  std::vector<double> f{10, 10};
  std::vector<std::vector<double>> obs{{0.1, 0.9}, {0.5, 0.5}}, exp{{0.0, 1.0}, {0.5, 0.5}};
  auto r = chi_square_item(0, f, obs, exp, 1, 0.05);
  EXPECT_EQ(r.guarded_terms, 1u);
  EXPECT_TRUE(std::isfinite(r.chi_square));
  EXPECT_FALSE(r.accepted);
}

TEST(Gof, InvariantUnderRelabelingWithinGroups) {
  auto s = sim::simulate(120, 4, 1, 3);
  auto r = build_response_matrix(s.data.levels);
  auto a = goodness_of_fit_naive(r, 4);
  // Reorder users by share count, keeping tied users in their original
  // order, so every group keeps the same members.
  const auto counts = column_share_counts(r);
  std::vector<std::size_t> perm(120);
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(), [&](std::size_t x, std::size_t y) { return counts[x] < counts[y]; });
  auto b = goodness_of_fit_naive(permute_users(r, perm), 4);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t t = 0; t < a.size(); ++t) EXPECT_NEAR(a[t].chi_square, b[t].chi_square, 1e-9);
}

TEST(Gof, NaiveSkipsConstantItems) {
  std::vector<std::uint8_t> cells(3 * 12);
  for (std::size_t j = 0; j < 12; ++j) {
    cells[j] = 1;
    cells[24 + j] = j % 2;
  }
  ResponseMatrix r(items(3), oracle::users(12), cells);
  auto res = goodness_of_fit_naive(r, 3);
  ASSERT_EQ(res.size(), 1u);
  EXPECT_EQ(res[0].item, 2u);
  EXPECT_EQ(res[0].degrees_of_freedom, 2u);
}

TEST(Gof, IrtUsesKMinusTwo) {
  auto s = sim::simulate(300, 5, 1, 9);
  auto r = build_response_matrix(s.data.levels);
  auto f = fit_2pl(r);
  auto res = goodness_of_fit_irt(r, f.params, f.abilities, 6);
  ASSERT_EQ(res.size(), 5u);
  for (const auto& g : res) EXPECT_EQ(g.degrees_of_freedom, 4u);
}

TEST(Gof, GradedVariants) {
  auto s = sim::simulate(400, 4, 3, 10);
  auto f = fit_grm(s.data.levels);
  auto naive = goodness_of_fit_graded_naive(s.data.levels, 5);
  auto irt = goodness_of_fit_graded_irt(s.data.levels, f.params, f.abilities, 5);
  EXPECT_EQ(naive.size(), 4u);
  EXPECT_EQ(irt.size(), 4u);
  EXPECT_EQ(naive[0].degrees_of_freedom, 4u);
  EXPECT_EQ(irt[0].degrees_of_freedom, 3u);
  EXPECT_GE(accepted_count(irt), accepted_count(naive));
}

TEST(Pearson, Cases) {
  std::vector<double> x{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(pearson(x, x), 1.0);
  std::vector<double> y;
  for (double v : x) y.push_back(-2 * v + 7);
  EXPECT_DOUBLE_EQ(pearson(x, y), -1.0);
  EXPECT_NEAR(pearson(x, std::vector<double>{1, 3, 2, 4}), 0.8, 1e-15);
  EXPECT_THROW(pearson(x, std::vector<double>(4, 2.0)), NumericalError);
  EXPECT_THROW(pearson(x, std::vector<double>{1, 2}), ValidationError);
}

TEST(Pearson, AffineInvariance) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z;
  std::vector<double> x(40), y(40);
  for (std::size_t t = 0; t < 40; ++t) {
    x[t] = z(rng);
    y[t] = x[t] + z(rng);
  }
  const double base = pearson(x, y);
  for (auto [a, c] : {std::pair{2.0, 3.0}, {-1.5, 0.5}, {0.1, -4.0}}) {
    std::vector<double> xx, yy;
    for (std::size_t t = 0; t < 40; ++t) {
      xx.push_back(a * x[t] + 1.0);
      yy.push_back(c * y[t] - 2.0);
    }
    EXPECT_NEAR(pearson(xx, yy), (a * c > 0 ? 1 : -1) * base, 1e-12);
  }
}

TEST(Spearman, UsesAverageRanks) {
  EXPECT_EQ(average_ranks(std::vector<double>{10, 20, 20, 5}), (std::vector<double>{2, 3.5, 3.5, 1}));
  EXPECT_DOUBLE_EQ(spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 4, 9, 16}), 1.0);
}

TEST(CorrelationMatrix, Structure) {
  UserRegistry u = oracle::users(4);
  ScoreVector a(u, ScoreModel::PSN, {1, 2, 3, 4}), b(u, ScoreModel::PSI, {1, 3, 2, 4}),
      flat(u, ScoreModel::PSGN, {1, 1, 1, 1});
  auto single = correlation_matrix(std::vector<ScoreVector>{a});
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single(0, 0), 1.0);

  auto m = correlation_matrix(std::vector<ScoreVector>{a, b, flat});
  EXPECT_EQ(m.labels, (std::vector<std::string>{"PSN", "PSI", "PSGN"}));
  EXPECT_NEAR(*m(0, 1), 0.8, 1e-15);
  EXPECT_EQ(m(0, 1), m(1, 0));
  EXPECT_FALSE(m(0, 2).has_value());
  for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(m(k, k), 1.0);

  auto same = correlation_matrix(std::vector<ScoreVector>{a, a});
  EXPECT_DOUBLE_EQ(*same(0, 1), 1.0);
}

TEST(Gof, RestPosteriorHoldsNominalLevelOnModelData) {
  // Well-specified 2PL data: about 95% of items should pass at alpha 0.05,
  // while the plug-in expectation is biased by attitude shrinkage.
  std::size_t rest = 0, plug = 0, tested = 0;
  for (std::uint64_t seed : {41, 42, 43}) {
    auto s = sim::simulate(2000, 10, 1, seed);
    auto r = build_response_matrix(s.data.levels);
    auto f = fit_2pl(r);
    rest += accepted_count(goodness_of_fit_irt(r, f.params, f.abilities, 10));
    plug += accepted_count(goodness_of_fit_irt(r, f.params, f.abilities, 10, 0.05, IrtExpectation::PlugIn));
    tested += 10;
  }
  EXPECT_GE(rest, tested * 8 / 10);
  EXPECT_LT(plug, rest);
}

TEST(Gof, RestPosteriorGradedHoldsNominalLevel) {
  // Each group contributes L free level fractions, so on well-specified GRM
  // data the statistic follows roughly K*L-2 df. The reused K-2 df rejects.
  std::size_t rest = 0, plug = 0, reused = 0;
  for (std::uint64_t seed : {44, 45}) {
    auto s = sim::simulate(2000, 8, 3, seed);
    auto f = fit_grm(s.data.levels);
    const auto r = goodness_of_fit_graded_irt(s.data.levels, f.params, f.abilities, 10);
    const auto p = goodness_of_fit_graded_irt(s.data.levels, f.params, f.abilities, 10, 0.05, IrtExpectation::PlugIn);
    for (std::size_t t = 0; t < r.size(); ++t) {
      rest += chi_square_sf(r[t].chi_square, 28.0) >= 0.05;
      plug += chi_square_sf(p[t].chi_square, 28.0) >= 0.05;
    }
    reused += accepted_count(r);
  }
  EXPECT_GE(rest, 13u);
  EXPECT_LT(plug, rest);
  EXPECT_LT(reused, rest);
}

TEST(Gof, RestPosteriorMatchesDirectSum) {
  // Single-user check of the leave-item-out posterior against a direct sum.
  const auto rule = gauss_hermite_normal(21);
  std::vector<std::vector<std::vector<double>>> prob(2, std::vector<std::vector<double>>(rule.size()));
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const double p0 = 1 / (1 + std::exp(-(rule.nodes[q] - 0.5)));
    const double p1 = 1 / (1 + std::exp(-2 * (rule.nodes[q] + 0.3)));
    prob[0][q] = {1 - p0, p0};
    prob[1][q] = {1 - p1, p1};
  }
  const auto rest = detail::rest_posteriors(prob, {{1}, {0}}, 1, rule);
  // Item 0 is judged from item 1 only: posterior weight w_q (1 - p1(x_q)).
  double z = 0, m = 0, e = 0;
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const double w = rule.weights[q] * prob[1][q][0];
    z += w;
    m += w * rule.nodes[q];
    e += w * prob[0][q][1];
  }
  EXPECT_NEAR(rest[0].attitude[0], m / z, 1e-14);
  EXPECT_NEAR(rest[0].expected[0][1], e / z, 1e-14);
  EXPECT_NEAR(rest[0].expected[0][0] + rest[0].expected[0][1], 1.0, 1e-14);
}

TEST(Gof, IrtExpectationNames) {
  EXPECT_EQ(parse_irt_expectation("rest"), IrtExpectation::RestPosterior);
  EXPECT_EQ(parse_irt_expectation("plugin"), IrtExpectation::PlugIn);
  EXPECT_THROW(parse_irt_expectation("mean"), ValidationError);
}
