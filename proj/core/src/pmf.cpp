#include "cep/pmf.hpp"

#include <algorithm>
#include <cmath>

#include "cep/error.hpp"

namespace cep {

int bin_of(double value, double lower, double upper, int bins) {
  if (upper <= lower) {
    return 0;
  }
  const double position = (value - lower) / (upper - lower) * bins;
  return std::clamp(static_cast<int>(std::floor(position)), 0, bins - 1);
}

std::vector<double> empirical_pmf(std::span<const double> values, const ColumnSpec& column, int bins) {
  if (values.empty()) {
    throw EmptyRelationError("empirical pmf of an empty column '" + column.name + "'");
  }
  std::vector<double> counts;
  if (column.kind == ColumnKind::categorical) {
    counts.assign(column.domain_size(), 0.0);
    for (const double v : values) {
      counts.at(static_cast<size_t>(v)) += 1.0;
    }
  } else {
    if (bins < 1) {
      throw ValidationError("pmf needs at least one bin");
    }
    counts.assign(static_cast<size_t>(bins), 0.0);
    for (const double v : values) {
      counts[static_cast<size_t>(bin_of(v, column.lower, column.upper, bins))] += 1.0;
    }
  }
  const auto total = static_cast<double>(values.size());
  for (auto& c : counts) {
    c /= total;
  }
  return counts;
}

}  // namespace cep
