#pragma once

#include <span>
#include <vector>

#include "cep/table.hpp"

namespace cep {

inline constexpr int kDefaultNumericBins = 64;

// Equal-width bin of `value` over [lower, upper]; the upper bound falls in the last bin.
int bin_of(double value, double lower, double upper, int bins);

// Categorical: frequency per code. Numerical: frequency per equal-width bin of
// [lower, upper]. Throws EmptyRelationError on empty input.
std::vector<double> empirical_pmf(std::span<const double> values, const ColumnSpec& column,
                                  int bins = kDefaultNumericBins);

}  // namespace cep
