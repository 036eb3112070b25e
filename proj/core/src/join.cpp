#include "cep/join.hpp"

#include <algorithm>
#include <cmath>

#include "cep/error.hpp"

namespace cep {

namespace {

int64_t key_of(double value) { return static_cast<int64_t>(std::llround(value)); }

std::vector<size_t> table_order(const SchemaGraph& db, const JoinTree& tree) {
  std::vector<size_t> order{tree.root};
  for (size_t t = 0; t < db.num_tables(); ++t) {
    if (t != tree.root && tree.in_scope[t]) {
      order.push_back(t);
    }
  }
  return order;
}

}  // namespace

std::vector<JoinColumn> join_columns(const SchemaGraph& db, std::span<const size_t> scope) {
  const auto tree = build_join_tree(db, scope);
  std::vector<JoinColumn> columns;
  for (const size_t t : table_order(db, tree)) {
    const auto& table = db.table(t);
    for (size_t c = 0; c < table.num_columns(); ++c) {
      if (!table.column(c).is_attribute() || db.is_join_column(t, c)) {
        continue;
      }
      columns.push_back(JoinColumn{t, c, table.name() + "." + table.column(c).name, table.column(c)});
    }
  }
  return columns;
}

double count_join(const SchemaGraph& db, std::span<const size_t> scope,
                  const std::vector<std::vector<uint8_t>>* row_masks) {
  const auto tree = build_join_tree(db, scope);
  // Bottom-up: weight(row) = product over children of the summed weights of its partners.
  std::vector<std::vector<double>> weight(db.num_tables());
  for (const size_t t : tree.order) {
    const auto& table = db.table(t);
    weight[t].assign(table.row_count(), 1.0);
    if (row_masks != nullptr) {
      const auto& mask = row_masks->at(t);
      for (size_t r = 0; r < table.row_count(); ++r) {
        weight[t][r] = mask[r] ? 1.0 : 0.0;
      }
    }
  }
  for (auto it = tree.order.rbegin(); it != tree.order.rend(); ++it) {
    const size_t t = *it;
    if (t == tree.root) {
      continue;
    }
    const auto& link = *tree.links[t];
    const auto& table = db.table(t);
    std::unordered_map<int64_t, double> partner_sum;
    for (size_t r = 0; r < table.row_count(); ++r) {
      if (weight[t][r] != 0.0) {
        partner_sum[key_of(table.at(r, link.column))] += weight[t][r];
      }
    }
    const auto& parent = db.table(link.parent);
    for (size_t r = 0; r < parent.row_count(); ++r) {
      if (weight[link.parent][r] == 0.0) {
        continue;
      }
      const auto found = partner_sum.find(key_of(parent.at(r, link.parent_column)));
      weight[link.parent][r] *= found == partner_sum.end() ? 0.0 : found->second;
    }
  }
  double total = 0.0;
  for (const double w : weight[tree.root]) {
    total += w;
  }
  return total;
}

JoinRelation::JoinRelation(const SchemaGraph& db)
    : schema_(db), tree_(build_join_tree(db)), columns_(join_columns(db)), width_(db.num_tables()) {
  index_.resize(db.num_tables());
  for (const size_t t : tree_.order) {
    if (t == tree_.root) {
      continue;
    }
    const auto& table = db.table(t);
    const size_t column = tree_.links[t]->column;
    for (size_t r = 0; r < table.row_count(); ++r) {
      index_[t][key_of(table.at(r, column))].push_back(static_cast<uint32_t>(r));
    }
  }
  cardinality_ = count_join(db);
}

double JoinRelation::value(size_t r, size_t attribute) const {
  const auto& col = columns_[attribute];
  return schema_.table(col.table).at(rows_[r * width_ + col.table], col.column);
}

void JoinRelation::tuple(size_t r, std::span<double> out) const {
  const auto ids = row_ids(r);
  for (size_t a = 0; a < columns_.size(); ++a) {
    const auto& col = columns_[a];
    out[a] = schema_.table(col.table).at(ids[col.table], col.column);
  }
}

std::vector<double> JoinRelation::column_values(size_t attribute) const {
  if (!materialized_) {
    throw SizeError("column values are only available on a materialized join");
  }
  std::vector<double> values(size());
  for (size_t r = 0; r < values.size(); ++r) {
    values[r] = value(r, attribute);
  }
  return values;
}

bool JoinRelation::random_walk(Rng& rng, std::span<double> out) const {
  std::vector<uint32_t> ids(width_, 0);
  const auto& hub = schema_.table(tree_.root);
  if (hub.row_count() == 0) {
    return false;
  }
  ids[tree_.root] = static_cast<uint32_t>(rng.uniform_int(hub.row_count()));
  for (const size_t t : tree_.order) {
    if (t == tree_.root) {
      continue;
    }
    const auto& link = *tree_.links[t];
    const double key = schema_.table(link.parent).at(ids[link.parent], link.parent_column);
    const auto found = index_[t].find(key_of(key));
    if (found == index_[t].end() || found->second.empty()) {
      return false;
    }
    ids[t] = found->second[rng.uniform_int(found->second.size())];
  }
  for (size_t a = 0; a < columns_.size(); ++a) {
    const auto& col = columns_[a];
    out[a] = schema_.table(col.table).at(ids[col.table], col.column);
  }
  return true;
}

JoinRelation materialize_join(const SchemaGraph& db, size_t cap) {
  JoinRelation rel(db);
  if (rel.cardinality_ > static_cast<double>(cap)) {
    throw SizeError("join has " + format_double(rel.cardinality_) + " rows, above the materialization cap of " +
                    std::to_string(cap) + "; use a sampling join instead");
  }
  const size_t width = rel.width_;
  const auto& hub = db.table(rel.tree_.root);
  std::vector<uint32_t> rows;
  rows.reserve(hub.row_count() * width);
  for (size_t r = 0; r < hub.row_count(); ++r) {
    std::vector<uint32_t> ids(width, 0);
    ids[rel.tree_.root] = static_cast<uint32_t>(r);
    rows.insert(rows.end(), ids.begin(), ids.end());
  }
  for (const size_t t : rel.tree_.order) {
    if (t == rel.tree_.root) {
      continue;
    }
    const auto& link = *rel.tree_.links[t];
    const auto& parent = db.table(link.parent);
    std::vector<uint32_t> expanded;
    expanded.reserve(rows.size());
    for (size_t i = 0; i < rows.size(); i += width) {
      const double key = parent.at(rows[i + link.parent], link.parent_column);
      const auto found = rel.index_[t].find(key_of(key));
      if (found == rel.index_[t].end()) {
        continue;
      }
      for (const uint32_t partner : found->second) {
        expanded.insert(expanded.end(), rows.begin() + static_cast<long>(i), rows.begin() + static_cast<long>(i + width));
        expanded[expanded.size() - width + t] = partner;
      }
    }
    rows = std::move(expanded);
  }
  rel.rows_ = std::move(rows);
  rel.materialized_ = true;
  return rel;
}

JoinRelation unmaterialized_join(const SchemaGraph& db) { return JoinRelation(db); }

JoinRelation semi_join_deletion(const DatasetSplit& split, size_t k, size_t cap) {
  if (k >= split.original.num_tables()) {
    throw ValidationError("semi-join table index out of range");
  }
  return materialize_join(split.original.with_table(k, split.deleted.table_ptr(k)), cap);
}

}  // namespace cep
