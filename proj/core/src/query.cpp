#include "cep/query.hpp"

#include <algorithm>

#include "cep/error.hpp"

namespace cep {

std::string_view to_string(QueryType type) { return type == QueryType::original ? "OQ" : "CQ"; }

bool predicate_matches(const Predicate& predicate, double value) {
  switch (predicate.op) {
    case PredicateOp::equals:
      return value == predicate.lo;
    case PredicateOp::range:
      return value >= predicate.lo && value <= predicate.hi;
    case PredicateOp::not_range:
      return value < predicate.lo || value > predicate.hi;
  }
  return false;
}

std::vector<Interval> predicate_intervals(const Predicate& predicate, const ColumnSpec& column) {
  const bool categorical = column.kind == ColumnKind::categorical;
  const double lower = categorical ? 0.0 : column.lower;
  const double upper = categorical ? static_cast<double>(column.domain_size()) - 1.0 : column.upper;
  const double step = categorical ? 1.0 : 0.0;
  std::vector<Interval> out;
  const auto push = [&](double lo, double hi) {
    lo = std::max(lo, lower);
    hi = std::min(hi, upper);
    if (lo <= hi) {
      out.push_back(Interval{lo, hi});
    }
  };
  switch (predicate.op) {
    case PredicateOp::equals:
      if (predicate.lo >= 0 || !categorical) {
        push(predicate.lo, predicate.lo);
      }
      break;
    case PredicateOp::range:
      push(predicate.lo, predicate.hi);
      break;
    case PredicateOp::not_range:
      push(lower, predicate.lo - step);
      push(predicate.hi + step, upper);
      break;
  }
  return out;
}

std::pair<std::string, std::string> split_qualified(std::string_view name) {
  const auto dot = name.find('.');
  if (dot == std::string_view::npos) {
    throw ConfigError("column '" + std::string(name) + "' must be qualified as table.column");
  }
  return {std::string(name.substr(0, dot)), std::string(name.substr(dot + 1))};
}

std::vector<size_t> scope_indices(const Query& query, const SchemaGraph& db) {
  std::vector<size_t> out;
  for (const auto& name : query.scope) {
    out.push_back(db.require_table(name));
  }
  return out;
}

}  // namespace cep
