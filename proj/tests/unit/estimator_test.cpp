#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "cep/error.hpp"
#include "cep/estimator.hpp"
#include "fixtures.hpp"

namespace cep {
namespace {

using testing::tiny_model;

// Exhaustive sum of model probability over every tuple that satisfies the predicates.
double brute_force(const ArDensityModel& model, const Query& query) {
  const size_t n = model.num_columns();
  std::vector<double> tuple(n, 0.0);
  double total = 0.0;
  std::function<void(size_t)> rec = [&](size_t c) {
    if (c == n) {
      for (const auto& p : query.predicates) {
        const auto col = *model.column_index(p.column);
        if (!predicate_matches(p, tuple[col])) return;
      }
      double nll = 0.0;
      for (const double t : nll_terms(model, tuple)) nll += t;
      total += std::exp(-nll);
      return;
    }
    for (int v = 0; v < model.column(c).domain_size(); ++v) {
      tuple[c] = v;
      rec(c + 1);
    }
  };
  rec(0);
  return total;
}

Predicate eq(const std::string& column, double v) { return {column, PredicateOp::equals, v, v}; }
Predicate range(const std::string& column, double lo, double hi) { return {column, PredicateOp::range, lo, hi}; }

TEST(EstimatorTest, NoPredicatesIsOne) {
  const auto model = tiny_model({3, 4, 2}, 1);
  Rng rng(1);
  EXPECT_EQ(estimate_selectivity(model, Query{}, 64, rng), 1.0);
  EXPECT_EQ(estimate_cardinality(model, Query{}, 3.0, 64, rng), 3.0);
}

TEST(EstimatorTest, SingleColumnIsExact) {
  const auto model = tiny_model({5}, 4);
  std::vector<double> probs;
  conditional_probabilities(model, EncodedBatch{1, 1, {0}}, 0, probs);
  Rng rng(2);
  const auto est = estimate_selectivity_detailed(model, Query{0, {}, {eq("t.c0", 3)}}, 16, rng);
  EXPECT_DOUBLE_EQ(est.value, probs[3]);
  EXPECT_EQ(est.std_error, 0.0);
  EXPECT_NEAR(estimate_selectivity(model, Query{0, {}, {range("t.c0", 1, 3)}}, 16, rng),
              probs[1] + probs[2] + probs[3], 1e-12);
}

TEST(EstimatorTest, MatchesEnumerationWithinThreeErrors) {
  auto cfg = testing::tiny_config(3, 12, 2);
  const auto model = tiny_model({4, 5, 3}, 9, cfg);
  const std::vector<Query> queries{
      {0, {}, {eq("t.c0", 1), eq("t.c2", 2)}},
      {1, {}, {range("t.c1", 1, 3), eq("t.c2", 0)}},
      {2, {}, {range("t.c0", 0, 2), range("t.c1", 2, 4), range("t.c2", 1, 2)}},
      {3, {}, {eq("t.c1", 4)}},
  };
  Rng rng(33);
  for (const auto& q : queries) {
    const double truth = brute_force(model, q);
    const auto est = estimate_selectivity_detailed(model, q, 2000, rng);
    EXPECT_LE(std::abs(est.value - truth), 3 * est.std_error + 1e-12) << "query " << q.id;
    EXPECT_NEAR(enumerate_selectivity(model, q), truth, 1e-12);
  }
}

TEST(EstimatorTest, EmptySatisfyingSetGivesZero) {
  const auto model = tiny_model({3, 3}, 2);
  Rng rng(3);
  EXPECT_EQ(estimate_cardinality(model, Query{0, {}, {range("t.c1", 1, 0)}}, 100.0, 32, rng), 0.0);
  EXPECT_EQ(estimate_selectivity(model, Query{0, {}, {eq("t.c0", -1)}}, 32, rng), 0.0);
}

TEST(EstimatorTest, UnknownColumnThrows) {
  const auto model = tiny_model({3}, 2);
  Rng rng(3);
  EXPECT_THROW(estimate_selectivity(model, Query{0, {}, {eq("t.zz", 0)}}, 8, rng), ValidationError);
}

TEST(EstimatorTest, DeterministicPerSeed) {
  const auto model = tiny_model({4, 4, 4}, 5);
  const Query q{0, {}, {eq("t.c1", 2), range("t.c2", 0, 1)}};
  Rng a(8);
  Rng b(8);
  EXPECT_EQ(estimate_selectivity(model, q, 100, a), estimate_selectivity(model, q, 100, b));
}

TEST(EstimatorTest, NumericBinOverlap) {
  ColumnSpec spec;
  spec.kind = ColumnKind::numerical;
  spec.lower = 0.0;
  spec.upper = 10.0;
  const auto col = ModelColumn::from_spec("t.x", spec, 4);
  const auto w = predicate_weights(col, {"t.x", PredicateOp::range, 1.25, 5.0});
  ASSERT_EQ(w.size(), 4U);
  EXPECT_NEAR(w[0], 0.5, 1e-12);
  EXPECT_NEAR(w[1], 1.0, 1e-12);
  EXPECT_NEAR(w[2], 0.0, 1e-12);
  EXPECT_NEAR(w[3], 0.0, 1e-12);
  const auto point = predicate_weights(col, {"t.x", PredicateOp::range, 6.0, 6.0});
  EXPECT_EQ(point[2], 1.0);
}

}  // namespace
}  // namespace cep
