#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cep/schema.hpp"

namespace cep {

enum class Distribution : uint8_t { uniform, zipfian };

struct ColumnGen {
  std::string name;
  ColumnKind kind = ColumnKind::categorical;
  Distribution distribution = Distribution::uniform;
  double zipf_s = 1.0;
  int cardinality = 10;     // categorical values; numerical: number of zipf segments
  double lower = 0.0;       // numerical range
  double upper = 1.0;
  int decimals = 2;         // numerical rounding
  bool unique = false;      // categorical: every value at most once
  // Earlier categorical column of the same table whose code rotates this column's value
  // ranking, giving a simple within-row dependency. Empty for none.
  std::string depends_on;
};

struct TableGen {
  std::string name;
  int rows = 1;
  std::vector<ColumnGen> columns;
};

// Star schema: every dimension gets a unique `id` key; the hub gets one `<dim>_id`
// foreign key per dimension. Every dimension row is referenced at least once.
struct DataGenConfig {
  TableGen hub;
  std::vector<TableGen> dimensions;
  Distribution fk_distribution = Distribution::zipfian;
  double fk_zipf_s = 1.1;
  // Hub categorical column that shifts which dimension rows a hub row references
  // (FK-induced correlation). Empty for none.
  std::string fk_depends_on;
  uint64_t seed = 0;

  void validate() const;
};

// Zipf-skewed star (hub 10,000 rows, two 500-row dimensions).
DataGenConfig skewed_profile(uint64_t seed);
// Uniform star with the same shape.
DataGenConfig uniform_profile(uint64_t seed);
// Throws ConfigError for an unknown profile name.
DataGenConfig profile_by_name(const std::string& name, uint64_t seed);

SchemaGraph gen_star_schema(const DataGenConfig& config);

}  // namespace cep
