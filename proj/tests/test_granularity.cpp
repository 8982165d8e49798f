#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "privscore/granularity.hpp"

using namespace privscore;

TEST(MeasureBytes, EmptyIsZero) {
  EXPECT_EQ(measure_bytes(""), 0);
  EXPECT_EQ(measure_bytes("  \t\n "), 0);
}

TEST(MeasureBytes, CountsNormalizedBytes) {
  EXPECT_EQ(measure_bytes("July 20"), 7);
  EXPECT_EQ(measure_bytes("  July \t\n 20 "), 7);
  EXPECT_EQ(measure_bytes("caf\xc3\xa9"), 5);  // UTF-8 e-acute is two bytes
}

TEST(MeasureBytes, ListEntriesJoinWithOneByte) {
  std::vector<std::string> entries{std::string(40, 'a'), std::string(60, 'b')};
  EXPECT_EQ(measure_bytes(entries), 101);
  entries.push_back("   ");
  EXPECT_EQ(measure_bytes(entries), 101);
  EXPECT_EQ(measure_bytes(std::vector<std::string>{}), 0);
}

TEST(Ckmeans, TwoObviousClusters) {
  std::vector<double> v{10, 1, 11, 2};
  auto r = ckmeans_1d(v, 2);
  EXPECT_EQ(r.cluster, (std::vector<int>{1, 0, 1, 0}));
  EXPECT_DOUBLE_EQ(r.centers[0], 1.5);
  EXPECT_DOUBLE_EQ(r.centers[1], 10.5);
  EXPECT_EQ(r.sizes, (std::vector<std::size_t>{2, 2}));
  EXPECT_DOUBLE_EQ(r.total_ss, 1.0);
}

TEST(Ckmeans, ConstantInput) {
  std::vector<double> v{5, 5, 5};
  auto r = ckmeans_1d(v, 1);
  EXPECT_EQ(r.k, 1u);
  EXPECT_DOUBLE_EQ(r.total_ss, 0.0);
}

TEST(Ckmeans, ReducesKToDistinctCount) {
  std::vector<double> v{5, 5, 7};
  auto r = ckmeans_1d(v, 3);
  EXPECT_EQ(r.k, 2u);
  EXPECT_EQ(r.requested_k, 3u);
  EXPECT_TRUE(r.reduced());
  EXPECT_EQ(r.cluster[0], r.cluster[1]);
}

TEST(Ckmeans, SquaresMatchExhaustive) {
  std::vector<double> v{1, 4, 9, 16, 25, 36};
  auto r = ckmeans_1d(v, 3);
  EXPECT_NEAR(r.total_ss, oracle::min_partition_sse(v, 3), 1e-12);
}

TEST(Ckmeans, InvalidInput) {
  EXPECT_THROW(ckmeans_1d(std::vector<double>{}, 1), ValidationError);
  EXPECT_THROW(ckmeans_1d(std::vector<double>{1.0}, 0), ValidationError);
  EXPECT_THROW(ckmeans_1d(std::vector<double>{std::nan("")}, 1), ValidationError);
}

TEST(Ckmeans, RandomMatchesExhaustiveAndIsContiguous) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng() % 10, k = 1 + rng() % 4;
    std::vector<double> v(n);
    for (auto& x : v) x = static_cast<double>(rng() % 20);  // frequent ties
    auto r = ckmeans_1d(v, k);
    EXPECT_NEAR(r.total_ss, oracle::min_partition_sse(v, k), 1e-9) << "trial " << trial;
    // Contiguity: a larger value never sits in a lower cluster.
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        if (v[a] < v[b]) {
          EXPECT_LE(r.cluster[a], r.cluster[b]);
        } else if (v[a] == v[b]) {
          EXPECT_EQ(r.cluster[a], r.cluster[b]);
        }
  }
}

TEST(Levels, SpecRowExample) {
  GranularityMatrix gm(ItemCatalog({"i"}), oracle::users(6), {0, 12, 15, 300, 310, 900});
  auto build = assign_levels(gm, 3);
  EXPECT_EQ(build.levels.cells(), (std::vector<int>{0, 1, 1, 2, 2, 3}));
  EXPECT_EQ(build.assignments[0].boundaries, (std::vector<std::int64_t>{300, 900}));
}

TEST(Levels, SingleValueAndEmptyRows) {
  GranularityMatrix gm(ItemCatalog({"one", "none"}), oracle::users(3), {0, 50, 0, 0, 0, 0});
  auto build = assign_levels(gm, 3);
  EXPECT_EQ(build.levels.cells(), (std::vector<int>{0, 1, 0, 0, 0, 0}));
  EXPECT_EQ(build.assignments[0].level_count(), 1);
  EXPECT_EQ(build.assignments[1].level_count(), 0);
}

TEST(Levels, PerItemAndMonotone) {
  std::mt19937_64 rng(3);
  const std::size_t n = 4, users = 25;
  std::vector<std::int64_t> cells(n * users);
  for (auto& c : cells) c = rng() % 3 == 0 ? 0 : static_cast<std::int64_t>(rng() % 500);
  GranularityMatrix gm(ItemCatalog({"a", "b", "c", "d"}), oracle::users(users), cells);
  auto glm = build_level_matrix(gm, 3);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < users; ++a)
      for (std::size_t b = 0; b < users; ++b)
        if (gm(i, a) < gm(i, b)) {
          EXPECT_LE(glm(i, a), glm(i, b));
        }

  // Changing another item's row leaves item 0 untouched.
  auto cells2 = cells;
  for (std::size_t j = 0; j < users; ++j) cells2[users + j] = 7;
  auto glm2 = build_level_matrix(GranularityMatrix(gm.catalog(), gm.registry(), cells2), 3);
  for (std::size_t j = 0; j < users; ++j) EXPECT_EQ(glm(0, j), glm2(0, j));

  // Permuting users permutes columns.
  std::vector<std::size_t> perm(users);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto glm3 = build_level_matrix(permute_users(gm, perm), 3);
  EXPECT_EQ(glm3, permute_users(glm, perm));
}
