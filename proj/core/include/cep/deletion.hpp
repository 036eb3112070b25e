#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cep/schema.hpp"

namespace cep {

enum class DeletionType : uint8_t { attribute, random };

// Inclusive range over a column's value space (codes for categorical columns).
struct Condition {
  std::string column;
  double lo = 0.0;
  double hi = 0.0;
};

struct TableCondition {
  std::string table;
  std::optional<Condition> condition;  // absent for random deletion
};

// `[Type]-[Scope]-[Ratio]` deletion task with its per-table conditions.
struct DeletionTask {
  DeletionType type = DeletionType::attribute;
  std::vector<TableCondition> per_table;
  double ratio = 1.0;

  size_t scope() const { return per_table.size(); }
  std::string name() const;
  bool touches_column(std::string_view table, std::string_view column) const;
  // "table.column" of every condition.
  std::vector<std::string> columns() const;
};

struct TaskName {
  DeletionType type;
  size_t scope;
  double ratio;
};

// Parses "A-2-0.5" style names. Throws ConfigError on malformed input and ValidationError
// when the ratio is outside (0, 1].
TaskName parse_task_name(std::string_view text);

// Parses "table.column=label" (equality) or "table.column in lo hi" (inclusive range).
// Categorical bounds are given as labels and resolved to codes.
TableCondition parse_condition(std::string_view text, const SchemaGraph& db);

// Assembles a task from its name and conditions. For random tasks, conditions name only
// the table ("table"). Throws ConfigError when the scope and condition count disagree.
DeletionTask make_task(std::string_view name, const std::vector<std::string>& conditions, const SchemaGraph& db);

std::string describe_condition(const TableCondition& condition, const SchemaGraph& db);

// Per-table retained/deleted partitions of a database.
struct DatasetSplit {
  SchemaGraph original;
  SchemaGraph retained;
  SchemaGraph deleted;
  std::vector<std::vector<size_t>> retained_rows;  // original row ids, ascending
  std::vector<std::vector<size_t>> deleted_rows;
  DeletionTask task;

  // Tables with a nonempty deleted subset, in schema order.
  std::vector<size_t> tables_with_deletions() const;
};

// |T_d| = round(ratio * |matching|), at least one row when anything matches. Rows are
// drawn with a per-table stream of `seed`.
DatasetSplit apply_deletion(const SchemaGraph& db, const DeletionTask& task, uint64_t seed);

}  // namespace cep
