#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cep/deletion.hpp"
#include "cep/error.hpp"
#include "cep/estimator.hpp"
#include "cep/remap.hpp"
#include "cep/unlearn.hpp"
#include "fixtures.hpp"

namespace cep {
namespace {

using testing::tiny_config;
using testing::tiny_model;
using testing::toy_star;

// Hands out a fixed list of batches in order.
class ScriptedSampler final : public JoinSampler {
 public:
  ScriptedSampler(size_t width, std::vector<std::vector<double>> batches) : width_(width), batches_(std::move(batches)) {}
  size_t num_columns() const override { return width_; }
  size_t epoch_size() const override { return batches_.size(); }
  size_t next_batch(size_t batch, Rng& rng, std::vector<double>& out) override { return sample(batch, rng, out); }
  size_t sample(size_t, Rng&, std::vector<double>& out) override {
    out = batches_[next_++ % batches_.size()];
    return out.size() / width_;
  }

 private:
  size_t width_;
  std::vector<std::vector<double>> batches_;
  size_t next_ = 0;
};

std::vector<double> ones(size_t n, double v = 1.0) { return std::vector<double>(n, v); }

TEST(SensitivityTest, HandExamples) {
  const std::vector<double> p{0.75, 0.25};
  const std::vector<double> pr{0.5, 0.5};
  EXPECT_NEAR(attribute_sensitivity(p, pr), 1.0, 1e-12);
  EXPECT_EQ(attribute_sensitivity(p, p), 0.0);
  const std::vector<double> p3{0.5, 0.25, 0.25};
  const std::vector<double> pr3{2.0 / 3, 1.0 / 3, 0.0};
  EXPECT_NEAR(attribute_sensitivity(p3, pr3), 0.5, 1e-12);
  EXPECT_THROW(attribute_sensitivity(p, p3), ValidationError);
}

TEST(SensitivityTest, ColumnsOnToyDeletion) {
  const auto db = toy_star();
  const auto split = apply_deletion(db, make_task("A-1-1.0", {"b.grade=g3"}, db), 1);
  const auto full = materialize_join(split.original);
  const auto retained = materialize_join(split.retained);
  const auto model = init_model(model_columns(full.columns(), 4), tiny_config(), 1);
  const auto s = column_sensitivities(model, full, retained);
  ASSERT_EQ(s.size(), 5U);
  // b.grade: P = (3/8, 2/8, 3/8), P_r = (3/5, 2/5).
  EXPECT_NEAR(s[4], (3.0 / 5 - 3.0 / 8) / (3.0 / 5) + (2.0 / 5 - 2.0 / 8) / (2.0 / 5), 1e-12);
  for (const double v : s) EXPECT_GE(v, 0.0);
  EXPECT_EQ(column_sensitivities(model, full, full), ones(5, 0.0));
}

TEST(WeightedLossTest, PerConditional) {
  const std::vector<double> terms{1.0, 2.0};
  EXPECT_DOUBLE_EQ(weighted_loss_per_conditional(terms, std::vector<double>{0.5, 1.0}), 2.5);
  EXPECT_DOUBLE_EQ(weighted_loss_per_conditional(terms, ones(2)), 3.0);
  EXPECT_EQ(weighted_loss_per_conditional(terms, ones(2, 0.0)), 0.0);
}

TEST(WeightedLossTest, Joint) {
  const std::vector<double> terms{0.5, 1.5};
  EXPECT_DOUBLE_EQ(weighted_loss_joint(terms, std::vector<double>{0.25, 0.5}), 1.5);
  EXPECT_DOUBLE_EQ(weighted_loss_joint(terms, std::vector<double>{0.25, 0.75}), 2.0);
  EXPECT_EQ(weighted_loss_joint(terms, ones(2, 0.0)), 0.0);
}

TEST(WeightedLossTest, ModelOverloadsAgree) {
  const auto model = tiny_model({3, 4}, 2);
  const std::vector<double> tuple{1, 3};
  const auto terms = nll_terms(model, tuple);
  const std::vector<double> s{0.3, 1.7};
  EXPECT_DOUBLE_EQ(weighted_loss_per_conditional(model, tuple, s), 0.3 * terms[0] + 1.7 * terms[1]);
  EXPECT_DOUBLE_EQ(weighted_loss_joint(model, tuple, s), 2.0 * (terms[0] + terms[1]));
}

TEST(WeightedLossTest, ConstantWeightsGiveSamePruneSet) {
  const auto model = tiny_model({3, 4, 2}, 6, tiny_config(2, 8, 1));
  std::vector<double> tuples;
  Rng rng(1);
  for (int i = 0; i < 60; ++i) tuples.insert(tuples.end(), {double(i % 3), double(i % 4), double(i % 2)});
  const auto w = ones(3, 0.7);
  TupleSampler a(3, tuples);
  TupleSampler b(3, tuples);
  Rng ra(4);
  Rng rb(4);
  const auto per = accumulate_scores(model, &a, w, LossMode::per_conditional, 5, 16, ra);
  const auto joint = accumulate_scores(model, &b, w, LossMode::joint_aggregated, 5, 16, rb);
  const auto eligible = model.eligible_weights();
  const size_t k = eligible.size() / 3;
  EXPECT_EQ(select_top_scores(per.scores, eligible, k), select_top_scores(joint.scores, eligible, k));
  for (size_t i = 0; i < per.scores.size(); ++i) EXPECT_NEAR(joint.scores[i], 9.0 * per.scores[i], 1e-9 + 1e-9 * joint.scores[i]);
}

TEST(ScoreTest, ClosedFormOnBiasOnlyColumn) {
  auto model = tiny_model({2}, 1);
  const auto bias = model.head_bias(0);
  auto params = model.parameters();
  params[bias.offset] = std::log(0.25);
  params[bias.offset + 1] = std::log(0.75);
  ScriptedSampler sampler(1, {{0.0}, {1.0}});
  Rng rng(1);
  const auto acc = accumulate_scores(model, &sampler, std::vector<double>{2.0}, LossMode::per_conditional, 2, 1, rng);
  // Gradients 2 * (p - onehot): (-1.5, 1.5) then (0.5, -0.5).
  EXPECT_NEAR(acc.scores[bias.offset], 1.5 * 1.5 + 0.5 * 0.5, 1e-12);
  EXPECT_NEAR(acc.scores[bias.offset + 1], 2.5, 1e-12);
  EXPECT_EQ(acc.batches, 2);
}

TEST(ScoreTest, OrderInvariantAndNonnegative) {
  const auto model = tiny_model({3, 4, 2}, 6, tiny_config(2, 8, 1));
  std::vector<std::vector<double>> batches;
  Rng rng(9);
  for (int b = 0; b < 6; ++b) {
    std::vector<double> batch;
    for (int r = 0; r < 4; ++r) {
      batch.insert(batch.end(), {double(rng.uniform_int(3)), double(rng.uniform_int(4)), double(rng.uniform_int(2))});
    }
    batches.push_back(batch);
  }
  auto reversed = batches;
  std::reverse(reversed.begin(), reversed.end());
  ScriptedSampler fwd(3, batches);
  ScriptedSampler bwd(3, reversed);
  const std::vector<double> w{0.2, 1.0, 0.6};
  Rng r1(1);
  Rng r2(2);
  const auto a = accumulate_scores(model, &fwd, w, LossMode::per_conditional, 6, 4, r1);
  const auto b = accumulate_scores(model, &bwd, w, LossMode::per_conditional, 6, 4, r2);
  for (size_t i = 0; i < a.scores.size(); ++i) {
    EXPECT_GE(a.scores[i], 0.0);
    EXPECT_NEAR(a.scores[i], b.scores[i], 1e-15 + 1e-12 * a.scores[i]);
  }
  ScriptedSampler again(3, batches);
  const auto zero = accumulate_scores(model, &again, ones(3, 0.0), LossMode::per_conditional, 6, 4, r1);
  for (const double v : zero.scores) EXPECT_EQ(v, 0.0);
}

TEST(ScoreTest, EmptySamplerFlagsEmpty) {
  const auto model = tiny_model({3}, 1);
  Rng rng(1);
  const auto acc = accumulate_scores(model, nullptr, ones(1), LossMode::per_conditional, 3, 4, rng);
  EXPECT_TRUE(acc.empty);
  EXPECT_EQ(acc.scores, ones(model.num_parameters(), 0.0));
}

TEST(PruneTest, TopScoreHandExample) {
  const std::vector<double> scores{0.1, 0.9, 0.5, 0.3};
  const std::vector<size_t> all{0, 1, 2, 3};
  EXPECT_EQ(select_top_scores(scores, all, static_cast<size_t>(std::floor(0.25 * 4))), std::vector<size_t>{1});
  EXPECT_TRUE(select_top_scores(scores, all, 0).empty());
  const std::vector<double> ties{0.5, 0.5, 0.5};
  EXPECT_EQ(select_top_scores(ties, std::vector<size_t>{0, 1, 2}, 2), (std::vector<size_t>{0, 1}));
}

TEST(PruneTest, PrunesHighestEligibleAndIsScaleInvariant) {
  auto model = tiny_model({3, 4, 2}, 6, tiny_config(2, 8, 1));
  Rng rng(3);
  std::vector<double> scores(model.num_parameters());
  for (auto& s : scores) s = rng.uniform();
  const auto eligible = model.eligible_weights();
  const size_t p = eligible.size();
  auto sorted = eligible;
  std::stable_sort(sorted.begin(), sorted.end(), [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  const size_t count = static_cast<size_t>(std::floor(0.3 * static_cast<double>(p)));

  auto scaled_model = model;
  auto scaled = scores;
  for (auto& s : scaled) s *= 17.5;
  const auto r = prune_step(model, scores, 0.3, p);
  prune_step(scaled_model, scaled, 0.3, p);
  EXPECT_EQ(r.pruned, count);
  EXPECT_EQ(model.pruned_count(), count);
  for (size_t i = 0; i < count; ++i) EXPECT_EQ(model.parameters()[sorted[i]], 0.0);
  EXPECT_EQ(std::vector<uint8_t>(model.prune_mask().begin(), model.prune_mask().end()),
            std::vector<uint8_t>(scaled_model.prune_mask().begin(), scaled_model.prune_mask().end()));

  const auto before = model.checksum();
  EXPECT_EQ(prune_step(model, scores, 0.0, p).pruned, 0U);
  EXPECT_EQ(model.checksum(), before);
  const auto second = prune_step(model, scores, 0.3, p);
  EXPECT_EQ(model.pruned_count(), 2 * count);
  EXPECT_FALSE(second.saturated);
  const auto third = prune_step(model, scores, 0.9, p);
  EXPECT_TRUE(third.saturated);
  EXPECT_EQ(model.eligible_weights().size(), 0U);
  EXPECT_THROW(prune_step(model, scores, 1.0, p), ValidationError);
}

DatasetSplit two_table_split() {
  const auto db = toy_star();
  return apply_deletion(db, make_task("A-2-1.0", {"a.kind=k1", "b.grade=g3"}, db), 1);
}

ArDensityModel toy_model(const DatasetSplit& split, uint64_t seed = 1) {
  const auto rel = materialize_join(split.original);
  return init_model(model_columns(rel.columns(), 4), tiny_config(2, 8, 1), seed);
}

TEST(DspTest, BudgetSplitsAcrossTables) {
  const auto split = two_table_split();
  ASSERT_EQ(split.tables_with_deletions().size(), 2U);
  auto model = toy_model(split);
  const size_t p = model.eligible_weights().size();
  CepConfig cfg;
  cfg.sampling_iterations = 4;
  cfg.batch_size = 8;
  const auto report = distribution_sensitivity_pruning(model, split, cfg, 3);
  EXPECT_EQ(report.total_eligible, p);
  EXPECT_EQ(report.tables.size(), 2U);
  EXPECT_EQ(model.pruned_count(), 2 * static_cast<size_t>(std::floor(0.25 * static_cast<double>(p))));
  for (size_t i = 0; i < model.num_parameters(); ++i) {
    if (!model.active(i)) EXPECT_EQ(model.parameters()[i], 0.0);
  }
}

TEST(DspTest, SingleTableUsesFullAlpha) {
  const auto db = toy_star();
  const auto split = apply_deletion(db, make_task("A-1-1.0", {"b.grade=g3"}, db), 1);
  auto model = toy_model(split);
  const size_t p = model.eligible_weights().size();
  CepConfig cfg;
  cfg.sampling_iterations = 3;
  cfg.batch_size = 8;
  const auto report = distribution_sensitivity_pruning(model, split, cfg, 3);
  EXPECT_EQ(model.pruned_count(), static_cast<size_t>(std::floor(0.5 * static_cast<double>(p))));
  ASSERT_EQ(report.last_scores.size(), model.num_parameters());
  auto reference = toy_model(split);
  prune_step(reference, report.last_scores, 0.5, p);
  EXPECT_EQ(reference.checksum(), model.checksum());
}

TEST(DspTest, EmptyDeletionLeavesModel) {
  const auto db = toy_star();
  const auto split = apply_deletion(db, make_task("A-1-1.0", {"f.x in 9.8 10"}, db), 1);
  auto model = toy_model(split);
  const auto before = model.checksum();
  const auto report = distribution_sensitivity_pruning(model, split, CepConfig{}, 3);
  EXPECT_EQ(model.checksum(), before);
  for (const double s : report.sensitivities) EXPECT_EQ(s, 0.0);
}

TEST(DomainTest, DeletedDomain) {
  ColumnSpec cat;
  cat.kind = ColumnKind::categorical;
  cat.labels = {"a", "b", "c"};
  EXPECT_EQ(deleted_domain(cat, std::vector<double>{0, 1, 1}), std::vector<double>{2});
  EXPECT_TRUE(deleted_domain(cat, std::vector<double>{2, 0, 1}).empty());
  const auto db = toy_star();
  const auto split = apply_deletion(db, make_task("A-1-1.0", {"f.color=green"}, db), 1);
  const auto& f = split.retained.table(0);
  std::vector<double> values;
  for (size_t r = 0; r < f.row_count(); ++r) values.push_back(f.at(r, f.require_column("color")));
  const auto green = *db.table(0).column(db.table(0).require_column("color")).code_of("green");
  EXPECT_EQ(deleted_domain(db.table(0).column(db.table(0).require_column("color")), values),
            std::vector<double>{double(green)});
}

TEST(DomainTest, CategoricalPruneShrinksHead) {
  auto model = tiny_model({3, 2}, 2);
  const auto params_before = model.num_parameters();
  const auto map = domain_prune_categorical(model, 0, std::vector<double>{0, 1});
  EXPECT_EQ(model.column(0).domain_size(), 2);
  EXPECT_EQ(model.head_weight(0).rows, 2U);
  EXPECT_EQ(map.size(), params_before);
  std::vector<double> probs;
  conditional_probabilities(model, EncodedBatch{1, 2, {0, 0}}, model.position_of(0), probs);
  EXPECT_NEAR(probs[0] + probs[1], 1.0, 1e-12);
  EXPECT_THROW(model.column(0).encode(2.0), DomainError);

  const auto before = model.checksum();
  domain_prune_categorical(model, 0, std::vector<double>{0, 1});
  EXPECT_EQ(model.checksum(), before);
  EXPECT_THROW(domain_prune_categorical(model, 0, std::vector<double>{}), ValidationError);
}

TEST(DomainTest, ReindexScores) {
  const std::vector<double> scores{1, 2, 3, 4};
  const std::vector<long> map{0, -1, 1, 2};
  EXPECT_EQ(reindex_scores(scores, map, 3), (std::vector<double>{1, 3, 4}));
}

ArDensityModel gapped_model() {
  ColumnSpec x;
  x.kind = ColumnKind::numerical;
  x.lower = 0.0;
  x.upper = 100.0;
  std::vector<ModelColumn> cols{testing::categorical_column("t.c", 3), ModelColumn::from_spec("t.x", x, 16)};
  auto model = init_model(std::move(cols), tiny_config(), 1);
  std::vector<double> retained;
  for (int v = 0; v <= 100; ++v) {
    if (v <= 40 || v >= 60) retained.push_back(v);
  }
  model.set_remap(1, build_numeric_remap(0.0, 100.0, retained, 1.0 / 16));
  domain_prune_categorical(model, 0, std::vector<double>{0, 1});
  return model;
}

TEST(ClampTest, HandExamples) {
  const auto model = gapped_model();
  const auto q = clamp_query(Query{0, {}, {{"t.x", PredicateOp::range, 30, 70}}}, model);
  ASSERT_EQ(q.predicates.size(), 1U);
  EXPECT_NEAR(q.predicates[0].lo, 37.5, 1e-12);
  EXPECT_NEAR(q.predicates[0].hi, 62.5, 1e-12);

  Rng rng(1);
  const Query inside{0, {}, {{"t.x", PredicateOp::range, 50, 55}}};
  EXPECT_EQ(estimate_cardinality(model, clamp_query(inside, model), 1000.0, 64, rng), 0.0);
  const Query deleted{0, {}, {{"t.c", PredicateOp::equals, 2, 2}}};
  EXPECT_EQ(estimate_cardinality(model, clamp_query(deleted, model), 1000.0, 64, rng), 0.0);
  const Query kept{0, {}, {{"t.c", PredicateOp::equals, 1, 1}}};
  EXPECT_GT(estimate_cardinality(model, clamp_query(kept, model), 1000.0, 64, rng), 0.0);
}

TEST(ClampTest, InsideSubrangeKeepsRetainedValues) {
  const auto model = gapped_model();
  const auto& remap = *model.column(1).remap;
  for (const auto& [lo, hi] : std::vector<std::pair<double, double>>{{5, 33}, {61, 99}, {10, 80}}) {
    const auto q = clamp_query(Query{0, {}, {{"t.x", PredicateOp::range, lo, hi}}}, model);
    for (int v = 0; v <= 100; ++v) {
      if (!remap.subrange_of(v)) continue;
      const bool before = v >= lo && v <= hi;
      const double m = remap.apply(v);
      bool after = false;
      for (const auto& p : q.predicates) after = after || predicate_matches(p, m);
      EXPECT_EQ(before, after) << v;
    }
  }
}

MethodOptions small_options() {
  MethodOptions options;
  options.model = tiny_config(2, 8, 1);
  options.model.epochs = 2;
  options.cep.finetune_epochs = 2;
  options.cep.sampling_iterations = 3;
  options.cep.batch_size = 8;
  return options;
}

TEST(MethodTest, StaleAndMissingOriginal) {
  const auto split = two_table_split();
  const auto original = toy_model(split);
  const auto options = small_options();
  EXPECT_EQ(run_method(Method::stale, &original, split, options, 1).model.checksum(), original.checksum());
  EXPECT_THROW(run_method(Method::finetune, nullptr, split, options, 1), ConfigError);
  EXPECT_NO_THROW(run_method(Method::retrain, nullptr, split, options, 1));
}

TEST(MethodTest, TogglesOffMatchFinetune) {
  const auto split = two_table_split();
  const auto original = toy_model(split);
  auto options = small_options();
  const auto ft = run_method(Method::finetune, &original, split, options, 5);
  options.cep.enable_domain_prune = false;
  options.cep.enable_sensitivity_prune = false;
  const auto cep = run_method(Method::cep, &original, split, options, 5);
  EXPECT_EQ(cep.model.checksum(), ft.model.checksum());
  EXPECT_EQ(cep.loss_trace, ft.loss_trace);
}

TEST(MethodTest, CepKeepsMasksAndZeroMass) {
  const auto db = toy_star();
  const auto split = apply_deletion(db, make_task("A-1-1.0", {"f.color=green"}, db), 1);
  const auto original = toy_model(split);
  const auto result = run_method(Method::cep, &original, split, small_options(), 5);
  EXPECT_GT(result.prune_seconds, 0.0);
  EXPECT_GT(result.finetune_seconds, 0.0);
  const auto& m = result.model;
  EXPECT_GT(m.pruned_count(), 0U);
  for (size_t i = 0; i < m.num_parameters(); ++i) {
    if (!m.active(i)) EXPECT_EQ(m.parameters()[i], 0.0);
  }
  const auto green = *db.table(0).column(db.table(0).require_column("color")).code_of("green");
  Rng rng(1);
  const Query q{0, {}, {{"f.color", PredicateOp::equals, double(green), double(green)}}};
  EXPECT_EQ(estimate_cardinality(m, clamp_query(q, m), 8.0, 64, rng), 0.0);
  EXPECT_EQ(m.column(*m.column_index("f.color")).domain_size(), 2);
}

TEST(MethodTest, Deterministic) {
  const auto split = two_table_split();
  const auto original = toy_model(split);
  const auto a = run_method(Method::cep, &original, split, small_options(), 8);
  const auto b = run_method(Method::cep, &original, split, small_options(), 8);
  EXPECT_EQ(a.model.checksum(), b.model.checksum());
}

TEST(MethodTest, FinetuneLowersRetainedNll) {
  const auto split = two_table_split();
  auto options = small_options();
  options.model.learning_rate = 1e-2;
  auto model = toy_model(split);
  const auto retained = materialize_join(split.retained);
  std::vector<double> tuples(retained.size() * retained.num_columns());
  for (size_t r = 0; r < retained.size(); ++r) {
    retained.tuple(r, std::span<double>(tuples).subspan(r * retained.num_columns(), retained.num_columns()));
  }
  const double before = mean_nll(model, tuples, retained.size());
  MaterializedSampler sampler(retained);
  fine_tune(model, sampler, 20, 2);
  EXPECT_LE(mean_nll(model, tuples, retained.size()), before);
}

TEST(ConfigTest, Validation) {
  CepConfig cfg;
  cfg.alpha = 1.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg.alpha = 0.5;
  cfg.sampling_iterations = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  EXPECT_EQ(parse_loss_mode(to_string(LossMode::joint_aggregated)), LossMode::joint_aggregated);
  EXPECT_EQ(parse_method("cep"), Method::cep);
  EXPECT_THROW(parse_method("magic"), ValidationError);
}

}  // namespace
}  // namespace cep
