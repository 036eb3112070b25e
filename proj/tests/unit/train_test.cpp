#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "cep/deletion.hpp"
#include "cep/error.hpp"
#include "cep/train.hpp"
#include "fixtures.hpp"

namespace cep {
namespace {

using testing::tiny_config;
using testing::tiny_model;

TupleSampler skewed_single_column() {
  std::vector<double> tuples;
  for (int i = 0; i < 3000; ++i) tuples.push_back(0.0);
  for (int i = 0; i < 1000; ++i) tuples.push_back(1.0);
  return TupleSampler(1, std::move(tuples));
}

TEST(TrainTest, LearnsMarginal) {
  auto cfg = tiny_config();
  cfg.learning_rate = 1e-2;
  cfg.epochs = 5;
  auto model = tiny_model({2}, 1, cfg);
  auto sampler = skewed_single_column();
  const auto result = train(model, sampler, 3);
  EXPECT_GT(result.steps, 0);
  std::vector<double> probs;
  conditional_probabilities(model, EncodedBatch{1, 1, {0}}, 0, probs);
  EXPECT_NEAR(probs[0], 0.75, 0.02);
  EXPECT_NEAR(probs[1], 0.25, 0.02);
}

TEST(TrainTest, ZeroEpochsLeavesModel) {
  auto model = tiny_model({2}, 1);
  const auto before = model.checksum();
  auto sampler = skewed_single_column();
  TrainOptions options;
  options.epochs = 0;
  const auto result = train(model, sampler, 3, options);
  EXPECT_EQ(result.steps, 0);
  EXPECT_EQ(model.checksum(), before);
}

TEST(TrainTest, Deterministic) {
  std::vector<double> tuples;
  Rng rng(4);
  for (int i = 0; i < 300; ++i) {
    const auto a = rng.uniform_int(3);
    tuples.push_back(static_cast<double>(a));
    tuples.push_back(static_cast<double>((a + rng.uniform_int(2)) % 4));
  }
  auto cfg = tiny_config();
  cfg.dropout = 0.2;
  cfg.epochs = 3;
  auto m1 = tiny_model({3, 4}, 2, cfg);
  auto m2 = tiny_model({3, 4}, 2, cfg);
  TupleSampler s1(2, tuples);
  TupleSampler s2(2, tuples);
  const auto r1 = train(m1, s1, 5);
  const auto r2 = train(m2, s2, 5);
  EXPECT_EQ(m1.checksum(), m2.checksum());
  EXPECT_EQ(r1.loss_trace, r2.loss_trace);
}

TEST(TrainTest, PrunedPositionsStayZero) {
  auto cfg = tiny_config();
  cfg.epochs = 2;
  auto model = tiny_model({3, 4}, 2, cfg);
  std::vector<size_t> prune;
  for (size_t i = 0; i < model.parameters().size(); i += 3) {
    if (model.active(i)) prune.push_back(i);
  }
  model.prune(prune);
  std::vector<double> tuples;
  for (int i = 0; i < 200; ++i) {
    tuples.push_back(i % 3);
    tuples.push_back(i % 4);
  }
  TupleSampler sampler(2, tuples);
  train(model, sampler, 1);
  for (const auto i : prune) EXPECT_EQ(model.parameters()[i], 0.0);
  for (size_t i = 0; i < model.parameters().size(); ++i) {
    if (!model.active(i)) EXPECT_EQ(model.parameters()[i], 0.0);
  }
}

TEST(TrainTest, LossDecreases) {
  auto cfg = tiny_config(4, 16, 1);
  cfg.learning_rate = 5e-3;
  cfg.epochs = 10;
  auto model = tiny_model({3, 4}, 2, cfg);
  std::vector<double> tuples;
  for (int i = 0; i < 400; ++i) {
    tuples.push_back(i % 3);
    tuples.push_back((i % 3) + (i % 2));
  }
  const double before = mean_nll(model, tuples, 400);
  TupleSampler sampler(2, tuples);
  train(model, sampler, 9);
  EXPECT_LT(mean_nll(model, tuples, 400), before - 0.3);
}

TEST(TrainTest, DivergenceReportsStep) {
  auto cfg = tiny_config();
  cfg.learning_rate = std::numeric_limits<double>::infinity();
  auto model = tiny_model({2}, 1, cfg);
  auto sampler = skewed_single_column();
  try {
    train(model, sampler, 1);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_GE(e.step(), 1);
  }
}

TEST(TrainTest, EmptySamplerThrows) {
  EXPECT_THROW(TupleSampler(1, {}), EmptyRelationError);
  const auto db = testing::toy_star();
  const auto split = apply_deletion(db, make_task("A-1-1.0", {"a.kind=k1"}, db), 1);
  const auto rel = semi_join_deletion(split, db.require_table("b"));
  EXPECT_THROW(MaterializedSampler{rel}, EmptyRelationError);
}

}  // namespace
}  // namespace cep
