#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cep/schema.hpp"

namespace cep {

// equals: value == lo (categorical only). range: lo <= value <= hi.
// not_range: value < lo or value > hi (the complement of a range inside the column domain).
enum class PredicateOp : uint8_t { equals, range, not_range };

// Values live in the column's encoded space: codes for categorical columns, raw values for
// numerical ones. A categorical equality on a label absent from the dictionary carries
// code -1 and matches nothing.
struct Predicate {
  std::string column;  // "table.column"
  PredicateOp op = PredicateOp::range;
  double lo = 0.0;
  double hi = 0.0;
};

struct Query {
  int64_t id = 0;
  std::vector<std::string> scope;  // table names, hub included
  std::vector<Predicate> predicates;
};

enum class QueryType : uint8_t { original, complement };
std::string_view to_string(QueryType type);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

bool predicate_matches(const Predicate& predicate, double value);

// Closed intervals covered by the predicate within the column domain ([lower, upper] for
// numerical columns, [0, |Dom|-1] for categorical codes). Open ends of not_range
// complements are closed here; they differ only on a measure-zero boundary.
std::vector<Interval> predicate_intervals(const Predicate& predicate, const ColumnSpec& column);

std::pair<std::string, std::string> split_qualified(std::string_view name);

// Table indices of the query scope; all tables when the scope is empty.
std::vector<size_t> scope_indices(const Query& query, const SchemaGraph& db);

}  // namespace cep
