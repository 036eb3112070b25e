#include "cep/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cep/error.hpp"
#include "cep/random.hpp"

namespace cep {

namespace {

class ZipfTable {
 public:
  ZipfTable(int n, double s) : cdf_(static_cast<size_t>(n)) {
    double total = 0.0;
    for (int k = 0; k < n; ++k) {
      total += std::pow(static_cast<double>(k + 1), -s);
      cdf_[static_cast<size_t>(k)] = total;
    }
    for (auto& c : cdf_) {
      c /= total;
    }
  }

  // Rank in [0, n), rank 0 most likely.
  int sample(Rng& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<int>(std::min<size_t>(static_cast<size_t>(it - cdf_.begin()), cdf_.size() - 1));
  }

 private:
  std::vector<double> cdf_;
};

int draw_rank(const ColumnGen& column, const ZipfTable* zipf, Rng& rng) {
  if (column.distribution == Distribution::zipfian) {
    return zipf->sample(rng);
  }
  return static_cast<int>(rng.uniform_int(static_cast<uint64_t>(column.cardinality)));
}

double round_to(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(value * scale) / scale;
}

void validate_table(const TableGen& table, bool is_hub) {
  if (table.rows < 1) {
    throw ValidationError("table '" + table.name + "' needs at least one row");
  }
  for (size_t i = 0; i < table.columns.size(); ++i) {
    const auto& column = table.columns[i];
    if (column.kind == ColumnKind::key) {
      throw ValidationError("generated key columns are implicit; '" + column.name + "' must be an attribute");
    }
    if (column.cardinality < 1) {
      throw ValidationError("column '" + column.name + "' needs a positive cardinality");
    }
    if (column.distribution == Distribution::zipfian && !(column.zipf_s > 0.0)) {
      throw ValidationError("column '" + column.name + "': zipf exponent must be positive");
    }
    if (column.kind == ColumnKind::numerical && !(column.lower < column.upper)) {
      throw ValidationError("column '" + column.name + "': numeric range must satisfy lower < upper");
    }
    if (column.unique && column.cardinality < table.rows) {
      throw ValidationError("column '" + column.name + "' requests unique values but its cardinality " +
                            std::to_string(column.cardinality) + " is below the table size " +
                            std::to_string(table.rows));
    }
    if (!column.depends_on.empty()) {
      const auto found = std::find_if(table.columns.begin(), table.columns.begin() + static_cast<long>(i),
                                      [&](const ColumnGen& c) { return c.name == column.depends_on; });
      if (found == table.columns.begin() + static_cast<long>(i) || found->kind != ColumnKind::categorical) {
        throw ValidationError("column '" + column.name + "' depends on '" + column.depends_on +
                              "', which is not an earlier categorical column");
      }
    }
  }
  (void)is_hub;
}

struct GeneratedTable {
  std::vector<RawColumn> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::vector<int>> ranks;  // categorical codes per column (for dependencies)
};

GeneratedTable generate_attributes(const TableGen& table, Rng& rng) {
  GeneratedTable out;
  out.rows.assign(static_cast<size_t>(table.rows), {});
  out.ranks.assign(table.columns.size(), {});
  for (size_t c = 0; c < table.columns.size(); ++c) {
    const auto& column = table.columns[c];
    std::optional<ZipfTable> zipf;
    if (column.distribution == Distribution::zipfian) {
      zipf.emplace(column.cardinality, column.zipf_s);
    }
    std::vector<int> permutation(static_cast<size_t>(column.cardinality));
    std::iota(permutation.begin(), permutation.end(), 0);
    if (column.unique) {
      rng.shuffle(std::span<int>(permutation));
    }
    long dependency = -1;
    if (!column.depends_on.empty()) {
      for (size_t d = 0; d < c; ++d) {
        if (table.columns[d].name == column.depends_on) {
          dependency = static_cast<long>(d);
        }
      }
    }
    RawColumn raw{column.name, column.kind, std::nullopt, std::nullopt};
    if (column.kind == ColumnKind::numerical) {
      raw.lower = column.lower;
      raw.upper = column.upper;
    }
    out.columns.push_back(raw);
    auto& ranks = out.ranks[c];
    ranks.resize(static_cast<size_t>(table.rows));
    const double width = (column.upper - column.lower) / column.cardinality;
    for (size_t r = 0; r < static_cast<size_t>(table.rows); ++r) {
      int rank = column.unique ? permutation[r] : draw_rank(column, zipf ? &*zipf : nullptr, rng);
      if (dependency >= 0) {
        rank = (rank + 3 * out.ranks[static_cast<size_t>(dependency)][r]) % column.cardinality;
      }
      ranks[r] = rank;
      if (column.kind == ColumnKind::categorical) {
        out.rows[r].push_back(std::to_string(rank));
      } else {
        const double lo = column.lower + width * rank;
        const double value = std::clamp(round_to(lo + width * rng.uniform(), column.decimals), column.lower, column.upper);
        out.rows[r].push_back(format_double(value));
      }
    }
  }
  return out;
}

}  // namespace

void DataGenConfig::validate() const {
  validate_table(hub, true);
  if (fk_distribution == Distribution::zipfian && !(fk_zipf_s > 0.0)) {
    throw ValidationError("foreign-key zipf exponent must be positive");
  }
  for (const auto& dim : dimensions) {
    validate_table(dim, false);
    if (dim.rows > hub.rows) {
      throw ValidationError("dimension '" + dim.name + "' has more rows than the hub can reference");
    }
    if (dim.name == hub.name) {
      throw ValidationError("dimension and hub share the name '" + dim.name + "'");
    }
  }
  if (!fk_depends_on.empty()) {
    const auto found = std::find_if(hub.columns.begin(), hub.columns.end(),
                                    [&](const ColumnGen& c) { return c.name == fk_depends_on; });
    if (found == hub.columns.end() || found->kind != ColumnKind::categorical) {
      throw ValidationError("fk_depends_on must name a categorical hub column");
    }
  }
}

DataGenConfig skewed_profile(uint64_t seed) {
  DataGenConfig config;
  config.seed = seed;
  config.hub = TableGen{"fact", 10'000, {}};
  config.hub.columns = {
      {"kind", ColumnKind::categorical, Distribution::zipfian, 1.5, 100},
      {"grade", ColumnKind::categorical, Distribution::zipfian, 1.1, 12},
      {"price", ColumnKind::numerical, Distribution::zipfian, 1.2, 40, 0.0, 1000.0, 2, false, "grade"},
  };
  config.dimensions = {
      TableGen{"dim1", 500,
               {{"genre", ColumnKind::categorical, Distribution::zipfian, 1.3, 30},
                {"year", ColumnKind::numerical, Distribution::zipfian, 1.0, 24, 1900.0, 2020.0, 1, false, "genre"}}},
      TableGen{"dim2", 500,
               {{"country", ColumnKind::categorical, Distribution::zipfian, 1.2, 50},
                {"rating", ColumnKind::numerical, Distribution::zipfian, 0.8, 20, 0.0, 10.0, 2}}},
  };
  config.fk_distribution = Distribution::zipfian;
  config.fk_zipf_s = 1.1;
  config.fk_depends_on = "grade";
  return config;
}

DataGenConfig uniform_profile(uint64_t seed) {
  auto config = skewed_profile(seed);
  const auto flatten = [](TableGen& table) {
    for (auto& column : table.columns) {
      column.distribution = Distribution::uniform;
      column.depends_on.clear();
    }
  };
  flatten(config.hub);
  for (auto& dim : config.dimensions) {
    flatten(dim);
  }
  config.fk_distribution = Distribution::uniform;
  config.fk_depends_on.clear();
  return config;
}

DataGenConfig profile_by_name(const std::string& name, uint64_t seed) {
  if (name == "skewed") {
    return skewed_profile(seed);
  }
  if (name == "uniform") {
    return uniform_profile(seed);
  }
  throw ConfigError("unknown datagen profile '" + name + "' (expected skewed or uniform)");
}

SchemaGraph gen_star_schema(const DataGenConfig& config) {
  config.validate();
  Rng rng(config.seed);

  auto hub = generate_attributes(config.hub, rng);
  std::vector<TablePtr> tables;
  std::vector<JoinEdge> joins;
  std::vector<TablePtr> dimension_tables;

  long fk_dependency = -1;
  for (size_t c = 0; c < config.hub.columns.size(); ++c) {
    if (config.hub.columns[c].name == config.fk_depends_on) {
      fk_dependency = static_cast<long>(c);
    }
  }

  std::vector<RawColumn> hub_columns;
  std::vector<std::vector<std::string>> hub_rows(static_cast<size_t>(config.hub.rows));
  for (const auto& dim : config.dimensions) {
    auto generated = generate_attributes(dim, rng);
    // Dimension ids are 1..rows in a shuffled row order.
    std::vector<int> ids(static_cast<size_t>(dim.rows));
    std::iota(ids.begin(), ids.end(), 1);
    rng.shuffle(std::span<int>(ids));
    std::vector<RawColumn> columns{{"id", ColumnKind::key, std::nullopt, std::nullopt}};
    columns.insert(columns.end(), generated.columns.begin(), generated.columns.end());
    std::vector<std::vector<std::string>> rows(static_cast<size_t>(dim.rows));
    for (size_t r = 0; r < rows.size(); ++r) {
      rows[r].push_back(std::to_string(ids[r]));
      rows[r].insert(rows[r].end(), generated.rows[r].begin(), generated.rows[r].end());
    }
    dimension_tables.push_back(std::make_shared<const TableData>(encode_table(dim.name, columns, rows)));

    // Hub foreign keys: the first |dim| hub rows (in shuffled order) cover every id, the
    // rest follow the configured popularity distribution.
    std::vector<size_t> hub_order(hub_rows.size());
    std::iota(hub_order.begin(), hub_order.end(), size_t{0});
    rng.shuffle(std::span<size_t>(hub_order));
    std::optional<ZipfTable> zipf;
    if (config.fk_distribution == Distribution::zipfian) {
      zipf.emplace(dim.rows, config.fk_zipf_s);
    }
    std::vector<int> fk(hub_rows.size());
    for (size_t i = 0; i < hub_order.size(); ++i) {
      const size_t row = hub_order[i];
      int target = 0;
      if (i < static_cast<size_t>(dim.rows)) {
        target = static_cast<int>(i);
      } else {
        target = zipf ? zipf->sample(rng) : static_cast<int>(rng.uniform_int(static_cast<uint64_t>(dim.rows)));
        if (fk_dependency >= 0) {
          target = (target + 7 * hub.ranks[static_cast<size_t>(fk_dependency)][row]) % dim.rows;
        }
      }
      fk[row] = ids[static_cast<size_t>(target)];
    }
    hub_columns.push_back({dim.name + "_id", ColumnKind::key, std::nullopt, std::nullopt});
    for (size_t r = 0; r < hub_rows.size(); ++r) {
      hub_rows[r].push_back(std::to_string(fk[r]));
    }
    joins.push_back(JoinEdge{config.hub.name, dim.name + "_id", dim.name, "id"});
  }
  hub_columns.insert(hub_columns.end(), hub.columns.begin(), hub.columns.end());
  for (size_t r = 0; r < hub_rows.size(); ++r) {
    hub_rows[r].insert(hub_rows[r].end(), hub.rows[r].begin(), hub.rows[r].end());
  }
  tables.push_back(std::make_shared<const TableData>(encode_table(config.hub.name, hub_columns, hub_rows)));
  tables.insert(tables.end(), dimension_tables.begin(), dimension_tables.end());

  SchemaGraph db(std::move(tables), std::move(joins), config.hub.name);
  db.check_fk_coverage();
  return db;
}

}  // namespace cep
