#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cep/table.hpp"

namespace cep {

// child.fk references parent.pk.
struct JoinEdge {
  std::string child;
  std::string fk;
  std::string parent;
  std::string pk;
};

using TablePtr = std::shared_ptr<const TableData>;

// Tables plus a tree-shaped foreign-key join graph rooted at the hub table.
class SchemaGraph {
 public:
  SchemaGraph() = default;
  // Throws ConfigError on unknown tables/columns and ValidationError when the join graph is
  // not a tree spanning every table.
  SchemaGraph(std::vector<TablePtr> tables, std::vector<JoinEdge> joins, std::string hub);

  std::span<const TablePtr> tables() const { return tables_; }
  const TableData& table(size_t index) const { return *tables_.at(index); }
  const TablePtr& table_ptr(size_t index) const { return tables_.at(index); }
  size_t num_tables() const { return tables_.size(); }
  std::span<const JoinEdge> joins() const { return joins_; }
  const std::string& hub() const { return hub_; }
  size_t hub_index() const { return hub_index_; }

  std::optional<size_t> table_index(std::string_view name) const;
  size_t require_table(std::string_view name) const;

  // True when column `column` of table `table` participates in a join.
  bool is_join_column(size_t table, size_t column) const;

  // Same topology with one table swapped for another version of it (same schema).
  SchemaGraph with_table(size_t index, TablePtr replacement) const;
  SchemaGraph with_tables(std::vector<TablePtr> replacement) const;

  // Every fk value has exactly one matching pk row and pk values are unique. Throws
  // ValidationError otherwise.
  void check_fk_coverage() const;

 private:
  std::vector<TablePtr> tables_;
  std::vector<JoinEdge> joins_;
  std::string hub_;
  size_t hub_index_ = 0;
};

// One tree edge seen from the table farther from the hub.
struct TreeLink {
  size_t parent = 0;      // neighbor closer to the hub
  size_t column = 0;      // join column in this table
  size_t parent_column = 0;
};

// BFS view of the join tree restricted to a connected scope containing the hub.
struct JoinTree {
  size_t root = 0;
  std::vector<size_t> order;                   // BFS order, root first
  std::vector<std::optional<TreeLink>> links;  // indexed by table, empty for root/out-of-scope
  std::vector<std::vector<size_t>> children;   // indexed by table
  std::vector<bool> in_scope;
};

// Empty scope means every table. Throws ValidationError if the scope is not connected
// or misses the hub.
JoinTree build_join_tree(const SchemaGraph& db, std::span<const size_t> scope = {});

}  // namespace cep
