#pragma once

#include <vector>

#include "cep/model.hpp"
#include "cep/query.hpp"

namespace cep {

inline constexpr int kDefaultNumSamples = 512;

// Per model column: satisfying weight of every model code (fractional for numeric bins
// partially covered by a range), or empty when the column is unconstrained.
using ColumnConstraints = std::vector<std::vector<double>>;

// Throws ValidationError for predicates on columns the model does not hold.
ColumnConstraints constraints_for(const ArDensityModel& model, const Query& query);

// Weight of every model code of a column under one predicate. Numerical bounds are read in
// the binned space, so predicates on remapped columns must go through clamp_query first.
std::vector<double> predicate_weights(const ModelColumn& column, const Predicate& predicate);

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

// Progressive sampling in column order.
Estimate estimate_selectivity_detailed(const ArDensityModel& model, const Query& query, int num_samples, Rng& rng);
double estimate_selectivity(const ArDensityModel& model, const Query& query, int num_samples, Rng& rng);

double estimate_cardinality(const ArDensityModel& model, const Query& query, double join_size, int num_samples,
                            Rng& rng);

// Exact selectivity by enumerating the full domain product; for toy models only. Throws
// ValidationError when the product exceeds `limit`.
double enumerate_selectivity(const ArDensityModel& model, const Query& query, size_t limit = 1'000'000);

}  // namespace cep
