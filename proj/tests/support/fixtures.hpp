#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cep/join.hpp"
#include "cep/model.hpp"
#include "cep/query.hpp"
#include "cep/schema.hpp"
#include "cep/table.hpp"

namespace cep::testing {

inline ModelColumn categorical_column(std::string name, int domain) {
  ColumnSpec spec;
  spec.name = name;
  spec.kind = ColumnKind::categorical;
  for (int i = 0; i < domain; ++i) spec.labels.push_back(std::to_string(i));
  return ModelColumn::from_spec(name, spec, 0);
}

inline ModelConfig tiny_config(int emb = 2, int hidden = 6, int blocks = 1) {
  ModelConfig cfg;
  cfg.embedding_dim = emb;
  cfg.hidden_dim = hidden;
  cfg.residual_blocks = blocks;
  cfg.dropout = 0.0;
  cfg.batch_size = 32;
  cfg.epochs = 1;
  return cfg;
}

inline ArDensityModel tiny_model(const std::vector<int>& domains, uint64_t seed, ModelConfig cfg = tiny_config()) {
  std::vector<ModelColumn> columns;
  for (size_t i = 0; i < domains.size(); ++i) columns.push_back(categorical_column("t.c" + std::to_string(i), domains[i]));
  return init_model(std::move(columns), cfg, seed);
}

inline EncodedBatch random_batch(const ArDensityModel& model, size_t rows, Rng& rng) {
  EncodedBatch batch{rows, model.num_columns(), {}};
  for (size_t r = 0; r < rows; ++r) {
    for (size_t c = 0; c < model.num_columns(); ++c) {
      batch.codes.push_back(static_cast<int>(rng.uniform_int(static_cast<uint64_t>(model.column(c).domain_size()))));
    }
  }
  return batch;
}

// Batch mean of sum_i coefficients[i] * nll_i, recomputed from the forward pass only.
inline double weighted_mean_nll(const ArDensityModel& model, const EncodedBatch& batch,
                                const std::vector<double>& coefficients) {
  const auto terms = nll_terms(model, batch);
  double total = 0.0;
  for (size_t r = 0; r < batch.rows; ++r) {
    for (size_t c = 0; c < batch.cols; ++c) total += coefficients[c] * terms[r * batch.cols + c];
  }
  return total / static_cast<double>(batch.rows);
}

struct GradientCheck {
  double max_relative_error = 0.0;
  double max_absolute_error_small = 0.0;
  size_t compared = 0;
};

// Central differences (h = 1e-5) on every active parameter. Components where both
// gradients are below `floor` are compared absolutely.
inline GradientCheck finite_difference_check(ArDensityModel model, const EncodedBatch& batch,
                                             const std::vector<double>& coefficients,
                                             const std::function<std::vector<double>(const ArDensityModel&)>& analytic,
                                             double floor = 1e-6) {
  const auto grad = analytic(model);
  GradientCheck out;
  auto params = model.parameters();
  constexpr double h = 1e-5;
  for (size_t i = 0; i < params.size(); ++i) {
    if (!model.active(i)) continue;
    const double saved = params[i];
    params[i] = saved + h;
    const double plus = weighted_mean_nll(model, batch, coefficients);
    params[i] = saved - h;
    const double minus = weighted_mean_nll(model, batch, coefficients);
    params[i] = saved;
    const double fd = (plus - minus) / (2 * h);
    const double scale = std::max(std::abs(fd), std::abs(grad[i]));
    if (scale < floor) {
      out.max_absolute_error_small = std::max(out.max_absolute_error_small, std::abs(fd - grad[i]));
    } else {
      out.max_relative_error = std::max(out.max_relative_error, std::abs(fd - grad[i]) / scale);
    }
    ++out.compared;
  }
  return out;
}

struct RawTable {
  std::string name;
  std::vector<RawColumn> columns;
  std::vector<std::vector<std::string>> rows;
};

inline SchemaGraph make_db(const std::vector<RawTable>& tables, std::vector<JoinEdge> joins, std::string hub) {
  std::vector<TablePtr> encoded;
  for (const auto& t : tables) encoded.push_back(std::make_shared<TableData>(encode_table(t.name, t.columns, t.rows)));
  return SchemaGraph(std::move(encoded), std::move(joins), std::move(hub));
}

// Hub `f` (8 rows) referencing dimensions `a` (3 rows) and `b` (3 rows).
inline SchemaGraph toy_star() {
  RawTable f{"f",
             {{"id", ColumnKind::key}, {"a_id", ColumnKind::key}, {"b_id", ColumnKind::key},
              {"color", ColumnKind::categorical}, {"x", ColumnKind::numerical, 0.0, 10.0}},
             {{"1", "1", "1", "red", "1.5"},
              {"2", "1", "2", "blue", "2.5"},
              {"3", "2", "2", "red", "7"},
              {"4", "2", "3", "green", "9.5"},
              {"5", "3", "1", "red", "4"},
              {"6", "3", "3", "blue", "6"},
              {"7", "1", "3", "green", "0.5"},
              {"8", "2", "1", "red", "3"}}};
  RawTable a{"a",
             {{"id", ColumnKind::key}, {"kind", ColumnKind::categorical}, {"y", ColumnKind::numerical, 0.0, 100.0}},
             {{"1", "k1", "10"}, {"2", "k2", "55"}, {"3", "k1", "90"}}};
  RawTable b{"b",
             {{"id", ColumnKind::key}, {"grade", ColumnKind::categorical}},
             {{"1", "g1"}, {"2", "g2"}, {"3", "g3"}}};
  return make_db({f, a, b}, {{"f", "a_id", "a", "id"}, {"f", "b_id", "b", "id"}}, "f");
}

// Row-by-row count over the cartesian product of the scope tables.
inline double nested_loop_count(const SchemaGraph& db, const Query& query) {
  const auto scope = scope_indices(query, db);
  std::vector<size_t> ids(scope.size(), 0);
  const auto position = [&](size_t table) {
    for (size_t i = 0; i < scope.size(); ++i) {
      if (scope[i] == table) return static_cast<long>(i);
    }
    return -1L;
  };
  double count = 0.0;
  std::function<void(size_t)> rec = [&](size_t depth) {
    if (depth == scope.size()) {
      for (const auto& j : db.joins()) {
        const auto c = position(*db.table_index(j.child));
        const auto p = position(*db.table_index(j.parent));
        if (c < 0 || p < 0) continue;
        const auto& ct = db.table(scope[static_cast<size_t>(c)]);
        const auto& pt = db.table(scope[static_cast<size_t>(p)]);
        if (ct.at(ids[static_cast<size_t>(c)], ct.require_column(j.fk)) !=
            pt.at(ids[static_cast<size_t>(p)], pt.require_column(j.pk))) {
          return;
        }
      }
      for (const auto& pred : query.predicates) {
        const auto [tname, cname] = split_qualified(pred.column);
        const auto t = *db.table_index(tname);
        const auto pos = static_cast<size_t>(position(t));
        const auto& table = db.table(t);
        if (!predicate_matches(pred, table.at(ids[pos], table.require_column(cname)))) return;
      }
      count += 1.0;
      return;
    }
    for (size_t r = 0; r < db.table(scope[depth]).row_count(); ++r) {
      ids[depth] = r;
      rec(depth + 1);
    }
  };
  rec(0);
  return count;
}

}  // namespace cep::testing
