#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cep/deletion.hpp"
#include "cep/random.hpp"
#include "cep/schema.hpp"

namespace cep {

inline constexpr size_t kDefaultJoinCap = 5'000'000;

// A model attribute: a non-key column of one table in the join.
struct JoinColumn {
  size_t table = 0;
  size_t column = 0;
  std::string name;  // "table.column"
  ColumnSpec spec;
};

// Attribute columns, hub table first, then the remaining in-scope tables in schema order.
std::vector<JoinColumn> join_columns(const SchemaGraph& db, std::span<const size_t> scope = {});

// Exact inner-join count over `scope` (all tables when empty). `row_masks`, when given,
// holds one byte per row per table; rows with a zero byte do not participate.
double count_join(const SchemaGraph& db, std::span<const size_t> scope = {},
                  const std::vector<std::vector<uint8_t>>* row_masks = nullptr);

// Inner join over the whole schema. Rows are kept as one row id per table; attribute
// values are read through the owning tables.
class JoinRelation {
 public:
  const SchemaGraph& schema() const { return schema_; }
  std::span<const JoinColumn> columns() const { return columns_; }
  size_t num_columns() const { return columns_.size(); }

  bool materialized() const { return materialized_; }
  // Exact join cardinality (computed without materializing).
  double cardinality() const { return cardinality_; }
  // Materialized row count.
  size_t size() const { return rows_.size() / width_; }
  bool empty() const { return cardinality_ == 0.0; }

  std::span<const uint32_t> row_ids(size_t r) const {
    return std::span<const uint32_t>(rows_).subspan(r * width_, width_);
  }
  double value(size_t r, size_t attribute) const;
  void tuple(size_t r, std::span<double> out) const;
  std::vector<double> column_values(size_t attribute) const;

  // One random-walk tuple: uniform hub row, then a uniform partner along every tree edge.
  // Returns false when the walk hits a row without partners.
  bool random_walk(Rng& rng, std::span<double> out) const;

  friend JoinRelation materialize_join(const SchemaGraph& db, size_t cap);
  friend JoinRelation unmaterialized_join(const SchemaGraph& db);

 private:
  explicit JoinRelation(const SchemaGraph& db);

  SchemaGraph schema_;
  JoinTree tree_;
  std::vector<JoinColumn> columns_;
  // Per table: value of its tree-link column -> rows holding it.
  std::vector<std::unordered_map<int64_t, std::vector<uint32_t>>> index_;
  std::vector<uint32_t> rows_;
  size_t width_ = 1;
  double cardinality_ = 0.0;
  bool materialized_ = false;
};

// Throws SizeError when the join exceeds `cap` rows; use unmaterialized_join then.
JoinRelation materialize_join(const SchemaGraph& db, size_t cap = kDefaultJoinCap);

// Sampling handle over the join; rows are produced by random walks only.
JoinRelation unmaterialized_join(const SchemaGraph& db);

// Join with table k replaced by its deleted subset while every other table stays complete.
// An empty deleted subset yields an empty relation.
JoinRelation semi_join_deletion(const DatasetSplit& split, size_t k, size_t cap = kDefaultJoinCap);

}  // namespace cep
