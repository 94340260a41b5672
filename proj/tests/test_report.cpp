#include <gtest/gtest.h>

#include <random>

#include "floorline/report.hpp"
#include "oracles.hpp"

using namespace floorline;
using namespace floorline::report;

namespace {

// H from ranks counted pairwise, with the tie correction written out.
double naive_h(const std::vector<std::vector<double>>& groups) {
  std::vector<double> all;
  for (const auto& g : groups) all.insert(all.end(), g.begin(), g.end());
  const double n = double(all.size());
  auto rank = [&](double x) {
    double less = 0, equal = 0;
    for (double y : all) {
      less += y < x;
      equal += y == x;
    }
    return less + (equal + 1) / 2;
  };
  double s = 0;
  for (const auto& g : groups) {
    double r = 0;
    for (double x : g) r += rank(x);
    s += r * r / double(g.size());
  }
  double h = 12.0 / (n * (n + 1)) * s - 3 * (n + 1);
  double t = 0;
  for (double x : all) {
    double e = 0;
    for (double y : all) e += y == x;
    t += (e * e * e - e) / e;
  }
  return h / (1 - t / (n * n * n - n));
}

std::vector<EvaluationRow> rows_from(const std::vector<double>& errors) {
  std::vector<EvaluationRow> r;
  for (std::size_t i = 0; i < errors.size(); ++i) r.push_back(make_row("h" + std::to_string(i), 10.0 + errors[i], 10.0));
  return r;
}

}  // namespace

TEST(KruskalWallis, FrozenUntiedFixture) {
  const auto r = kruskal_wallis({{2.9, 3.0, 2.5, 2.6, 3.2}, {3.8, 2.7, 4.0, 2.4}, {2.8, 3.4, 3.7, 2.2, 2.0}});
  EXPECT_NEAR(r.h, 27.0 / 35.0, 1e-12);
  EXPECT_NEAR(r.p, 0.67996477357889382, 1e-9);
  EXPECT_EQ(r.df, 2);
  EXPECT_FALSE(r.p_exact);  // 14 values is past the enumeration limit
}

TEST(KruskalWallis, FrozenTiedFixtureWithExactP) {
  const auto r = kruskal_wallis({{1, 2, 2, 3}, {2, 3, 3, 4}, {4, 4, 5}});
  EXPECT_NEAR(r.h, 6.7868589743589745, 1e-9);
  EXPECT_NEAR(r.p, 0.033593271428210716, 1e-9);
  ASSERT_TRUE(r.p_exact);
  EXPECT_NEAR(*r.p_exact, 41.0 / 1925.0, 1e-12);
}

TEST(KruskalWallis, MatchesPairwiseRankOracle) {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> size(2, 15), k(2, 4), v(0, 9);
  for (int t = 0; t < 500; ++t) {
    std::vector<std::vector<double>> g(k(rng));
    for (auto& x : g) {
      x.resize(size(rng));
      for (auto& y : x) y = v(rng) * 0.5;
    }
    bool all_same = true;
    for (const auto& x : g)
      for (double y : x) all_same &= y == g[0][0];
    if (all_same) continue;
    ASSERT_NEAR(kruskal_wallis(g).h, std::max(0.0, naive_h(g)), 1e-9);
  }
}

TEST(KruskalWallis, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(43);
  std::normal_distribution<double> n(0, 1);
  for (int t = 0; t < 100; ++t) {
    std::vector<std::vector<double>> g(3), e(3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 8 + i; ++j) {
        g[i].push_back(n(rng));
        e[i].push_back(std::exp(3 * g[i].back()) + 7);
      }
    const auto a = kruskal_wallis(g), b = kruskal_wallis(e);
    ASSERT_NEAR(a.h, b.h, 1e-9);
    ASSERT_NEAR(a.p, b.p, 1e-12);
  }
}

TEST(KruskalWallis, NullGroupsRarelyRejectAtTenPercent) {
  std::mt19937_64 rng(47);
  std::normal_distribution<double> n(0.3, 0.2);
  int above = 0;
  const int trials = 2000;
  for (int t = 0; t < trials; ++t) {
    std::vector<std::vector<double>> g(3);
    for (auto& x : g)
      for (int j = 0; j < 20; ++j) x.push_back(n(rng));
    above += kruskal_wallis(g).p > 0.1;
  }
  const double share = double(above) / trials;
  EXPECT_GT(share, 0.86);
  EXPECT_LT(share, 0.94);
}

TEST(KruskalWallis, DegenerateInputs) {
  for (const auto& g : std::vector<std::vector<std::vector<double>>>{{{1, 2, 3}}, {{1, 2}, {}}, {{2, 2}, {2, 2}}}) {
    try {
      kruskal_wallis(g);
      ADD_FAILURE();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::DegenerateGroups);
    }
  }
}

TEST(PairedT, FrozenFixture) {
  const std::vector<double> a{0.7, -1.6, -0.2, -1.2, -0.1, 3.4, 3.7, 0.8, 0.0, 2.0};
  const std::vector<double> b{1.9, 0.8, 1.1, 0.1, -0.1, 4.4, 5.5, 1.6, 4.6, 3.4};
  const auto r = paired_t_test(a, b);
  EXPECT_NEAR(r.t, -4.0621276833820361, 1e-9);
  EXPECT_EQ(r.df, 9);
  EXPECT_NEAR(r.p, 0.00283289019738427, 1e-9);
  EXPECT_NEAR(r.mean_difference, -1.58, 1e-12);
}

TEST(PairedT, DegenerateInputs) {
  EXPECT_THROW(paired_t_test({1, 2}, {1}), Error);
  EXPECT_THROW(paired_t_test({1}, {1}), Error);
  EXPECT_THROW(paired_t_test({1, 2, 3}, {0, 1, 2}), Error);
}

TEST(Mae, Examples) {
  const auto m = mae({make_row("a", 12.0, 10.0), make_row("b", 9.0, 10.0), make_row("c", 20.0, 20.0)});
  EXPECT_DOUBLE_EQ(m.meters, 1.0);
  EXPECT_NEAR(m.percent_per_house, 100.0 * (0.2 + 0.1) / 3, 1e-12);
  EXPECT_NEAR(m.percent_of_mean_truth, 100.0 * 3.0 / 40.0, 1e-12);
  EXPECT_EQ(m.n, 3u);
  try {
    mae({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoTruth);
  }
}

TEST(Outliers, SingleLargeError) {
  std::vector<double> e(9, 0.1);
  e.push_back(5.0);
  const auto r = flag_outliers(rows_from(e));
  for (int i = 0; i < 9; ++i) EXPECT_FALSE(r[i].outlier);
  EXPECT_TRUE(r[9].outlier);
  EXPECT_THROW(flag_outliers(rows_from({1, 2, 3})), Error);
}

TEST(Outliers, MatchesRecomputedFence) {
  std::mt19937_64 rng(53);
  std::exponential_distribution<double> ex(3.0);
  std::uniform_int_distribution<int> n(4, 80);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> e(n(rng));
    for (auto& x : e) x = ex(rng) * (rng() % 2 ? 1 : -1);
    const auto r = flag_outliers(rows_from(e));
    std::vector<double> abs;
    for (const auto& row : r) abs.push_back(row.abs_error);
    const double q1 = oracle::type7(abs, 0.25), q3 = oracle::type7(abs, 0.75);
    const double fence = q3 + 1.5 * (q3 - q1);
    for (const auto& row : r) ASSERT_EQ(row.outlier, row.abs_error > fence);
  }
}

TEST(Distribution, SummaryAndThresholds) {
  const auto d = hdsl_distribution({0.9, 0.2, 0.6, 0.305, 1.4});
  EXPECT_DOUBLE_EQ(d.min, 0.2);
  EXPECT_DOUBLE_EQ(d.max, 1.4);
  EXPECT_DOUBLE_EQ(d.median, 0.6);
  EXPECT_NEAR(d.mean, 3.405 / 5, 1e-12);
  EXPECT_DOUBLE_EQ(d.fraction_below(0.305), 0.2);
  EXPECT_DOUBLE_EQ(d.fraction_below(0.536), 0.4);
  EXPECT_DOUBLE_EQ(d.percentile(50), 0.6);
  EXPECT_DOUBLE_EQ(d.percentile(100), 1.4);
}

TEST(Funnel, MonotoneAndRecounted) {
  std::mt19937_64 rng(59);
  for (int t = 0; t < 200; ++t) {
    std::vector<FunnelFlags> f(rng() % 50);
    for (auto& h : f) h = {rng() % 4 != 0, rng() % 3 != 0, rng() % 2 != 0, rng() % 5 != 0, rng() % 4 != 0};
    const auto c = funnel(f);
    for (int i = 1; i < 5; ++i) ASSERT_LE(c[i], c[i - 1]);
    std::size_t all = 0;
    for (const auto& h : f) all += h.has_truth && h.has_image && h.door_visible && h.matched && h.bottom_detected;
    ASSERT_EQ(c[4], all);
    ASSERT_LE(c[0], f.size());
  }
}

TEST(Histogram, CountsEveryValue) {
  const auto h = histogram({0.0, 0.1, 0.5, 0.9, 1.0}, 4);
  ASSERT_EQ(h.edges.size(), 5u);
  std::size_t total = 0;
  for (auto c : h.counts) total += c;
  EXPECT_EQ(total, 5u);
  EXPECT_EQ(h.counts.front(), 2u);
  EXPECT_EQ(h.counts.back(), 2u);
}
