// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "support/stats_fixtures.hpp"
#include "support/test_util.hpp"
#include "uala/calibration.hpp"

namespace uala {
namespace {

using testing::expect_error;

void expect_matches(const testing::StatsFixture& f) {
  const auto s = compare_groups(f.correct, f.incorrect);
  EXPECT_NEAR(s.mean_diff, f.mean_diff, 1e-9);
  ASSERT_TRUE(s.t_statistic && s.p_value && s.cohens_d && s.degrees_of_freedom);
  EXPECT_NEAR(*s.t_statistic, f.t, 1e-6);
  EXPECT_NEAR(*s.p_value, f.p, 1e-6);
  EXPECT_NEAR(*s.cohens_d, f.d, 1e-6);
  EXPECT_NEAR(*s.degrees_of_freedom, f.df, 1e-6);
}

TEST(GroupStats, ReferenceFixtures) {
  for (const auto& f : testing::stats_fixtures()) {
    SCOPED_TRACE(f.name);
    expect_matches(f);
  }
}

TEST(GroupStats, IdenticalGroupsHaveNoEffect) {
  const std::vector<double> g{0.1, 0.7, 0.3, 0.9};
  const auto s = compare_groups(g, g);
  EXPECT_EQ(s.mean_diff, 0.0);
  ASSERT_TRUE(s.cohens_d);
  EXPECT_EQ(*s.cohens_d, 0.0);
  EXPECT_NEAR(*s.p_value, 1.0, 1e-12);

  const std::vector<double> flat{0.4, 0.4, 0.4};
  const auto c = compare_groups(flat, flat);
  EXPECT_TRUE(c.degenerate_variance);
  ASSERT_TRUE(c.cohens_d);
  EXPECT_EQ(*c.cohens_d, 0.0);
}

TEST(GroupStats, ZeroVarianceIsDegenerate) {
  const std::vector<double> a{0, 0, 0, 0}, b{1, 1, 1, 1};
  const auto s = compare_groups(a, b);
  EXPECT_EQ(s.mean_diff, 1.0);
  EXPECT_TRUE(s.degenerate_variance);
  EXPECT_FALSE(s.t_statistic);
  EXPECT_FALSE(s.p_value);
  EXPECT_FALSE(s.cohens_d);
}

TEST(GroupStats, TooFewValues) {
  const std::vector<double> one{1.0}, two{1.0, 2.0};
  expect_error(ErrorCode::InsufficientData, [&] { compare_groups(one, two); });
  expect_error(ErrorCode::InsufficientData, [&] { compare_groups(two, one); });
}

TEST(Summary, BoxPlotValues) {
  const std::vector<double> v{4, 1, 3, 2, 5};
  const auto s = summarize(v);
  EXPECT_EQ(s.n, 5u);
  EXPECT_DOUBLE_EQ(s.mean, 3.0);
  EXPECT_DOUBLE_EQ(s.min, 1.0);
  EXPECT_DOUBLE_EQ(s.q1, 2.0);
  EXPECT_DOUBLE_EQ(s.median, 3.0);
  EXPECT_DOUBLE_EQ(s.q3, 4.0);
  EXPECT_DOUBLE_EQ(s.max, 5.0);
  EXPECT_NEAR(s.sd, 1.5811388300841898, 1e-12);
  expect_error(ErrorCode::InsufficientData, [] { summarize(std::vector<double>{}); });
}

}  // namespace
}  // namespace uala
