#include <gtest/gtest.h>

#include <algorithm>

#include "cep/error.hpp"
#include "cep/random.hpp"
#include "cep/remap.hpp"

namespace cep {
namespace {

NumericRemap gap_40_60() {
  std::vector<double> values;
  for (int x = 0; x <= 40; ++x) values.push_back(x);
  for (int x = 60; x <= 100; ++x) values.push_back(x);
  return build_numeric_remap(0.0, 100.0, values, 1.0 / 64);
}

TEST(RemapTest, DetectsGap) {
  const auto m = gap_40_60();
  ASSERT_EQ(m.subranges.size(), 2U);
  EXPECT_EQ(m.subranges[0].lo, 0.0);
  EXPECT_EQ(m.subranges[0].hi, 40.0);
  EXPECT_EQ(m.subranges[1].lo, 60.0);
  EXPECT_EQ(m.subranges[1].hi, 100.0);
  EXPECT_EQ(m.retained_length(), 80.0);
  EXPECT_FALSE(m.identity());
}

TEST(RemapTest, HandValues) {
  const auto m = gap_40_60();
  EXPECT_NEAR(m.apply(70.0), (70.0 - 60.0 + 40.0) / 80.0 * 100.0, 1e-12);
  EXPECT_NEAR(m.apply(70.0), 62.5, 1e-12);
  EXPECT_NEAR(m.apply(20.0), 25.0, 1e-12);
  EXPECT_NEAR(m.apply(40.0), 50.0, 1e-12);
  EXPECT_NEAR(m.apply(60.0), 50.0, 1e-12);
  EXPECT_EQ(m.apply(0.0), 0.0);
  EXPECT_NEAR(m.apply(100.0), 100.0, 1e-12);
}

TEST(RemapTest, GapValueThrows) {
  EXPECT_THROW(gap_40_60().apply(50.0), GapError);
}

TEST(RemapTest, NoGapIsIdentity) {
  std::vector<double> values;
  for (int x = 0; x <= 100; ++x) values.push_back(x);
  const auto m = build_numeric_remap(0.0, 100.0, values, 1.0 / 64);
  EXPECT_TRUE(m.identity());
  for (const double x : {0.0, 13.25, 50.0, 99.5}) EXPECT_NEAR(m.apply(x), x, 1e-12);
}

TEST(RemapTest, LeadingAndTrailingGaps) {
  const std::vector<double> values{30.0, 31.0, 32.0};
  const auto m = build_numeric_remap(0.0, 100.0, values, 0.05);
  ASSERT_EQ(m.subranges.size(), 1U);
  EXPECT_EQ(m.subranges[0].lo, 30.0);
  EXPECT_EQ(m.subranges[0].hi, 32.0);
  EXPECT_NEAR(m.apply(31.0), 50.0, 1e-12);
}

TEST(RemapTest, OnlyGapsWithDeletedValues) {
  std::vector<double> values{0, 10, 40, 60, 100};
  const std::vector<double> deleted{50.0};
  const auto m = build_numeric_remap(0.0, 100.0, values, 0.1, deleted);
  ASSERT_EQ(m.subranges.size(), 2U);
  EXPECT_EQ(m.subranges[0].hi, 40.0);
  EXPECT_EQ(m.subranges[1].lo, 60.0);
}

TEST(RemapTest, Clamps) {
  const auto m = gap_40_60();
  EXPECT_EQ(*m.clamp_up(50.0), 60.0);
  EXPECT_EQ(*m.clamp_down(50.0), 40.0);
  EXPECT_EQ(*m.clamp_up(30.0), 30.0);
  EXPECT_FALSE(m.clamp_up(101.0).has_value());
  EXPECT_FALSE(m.clamp_down(-1.0).has_value());
  EXPECT_EQ(m.clamp_nearest(45.0), 40.0);
  EXPECT_EQ(m.clamp_nearest(58.0), 60.0);
}

TEST(RemapTest, MonotoneAndCompact) {
  Rng rng(21);
  std::vector<double> values;
  for (int i = 0; i < 400; ++i) {
    const double x = rng.uniform(0.0, 1000.0);
    if ((x > 100 && x < 250) || (x > 600 && x < 610) || x > 900) continue;
    values.push_back(x);
  }
  const auto m = build_numeric_remap(0.0, 1000.0, values, 1.0 / 64);
  EXPECT_NO_THROW(m.validate());
  std::sort(values.begin(), values.end());
  for (size_t i = 1; i < values.size(); ++i) EXPECT_LE(m.apply(values[i - 1]), m.apply(values[i]));
  double image = 0.0;
  for (const auto& s : m.subranges) image += m.apply(s.hi) - m.apply(s.lo);
  EXPECT_NEAR(image, 1000.0, 1e-9);
}

TEST(RemapTest, EmptyRetainedThrows) {
  EXPECT_THROW(build_numeric_remap(0.0, 1.0, std::vector<double>{}, 0.1), ValidationError);
}

}  // namespace
}  // namespace cep
