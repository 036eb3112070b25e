#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cep {

// Key columns only connect tables; they never become model attributes.
enum class ColumnKind : uint8_t { categorical, numerical, key };

std::string_view to_string(ColumnKind kind);
ColumnKind parse_column_kind(std::string_view text);

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::categorical;

  // Categorical: dense codes 0..labels.size()-1, labels[code] is the original value.
  std::vector<std::string> labels;

  // Numerical: continuous bounds plus the sorted distinct values present.
  double lower = 0.0;
  double upper = 0.0;
  std::vector<double> distinct_values;

  size_t domain_size() const { return labels.size(); }
  std::optional<int> code_of(std::string_view label) const;
  bool is_attribute() const { return kind != ColumnKind::key; }
};

// Row-major table of encoded cells. Categorical cells hold codes, numerical and key
// cells hold their raw value.
class TableData {
 public:
  TableData() = default;
  TableData(std::string name, std::vector<ColumnSpec> columns, std::vector<double> cells);

  const std::string& name() const { return name_; }
  std::span<const ColumnSpec> columns() const { return columns_; }
  const ColumnSpec& column(size_t index) const { return columns_.at(index); }
  size_t num_columns() const { return columns_.size(); }
  size_t row_count() const { return num_columns() == 0 ? 0 : cells_.size() / num_columns(); }

  double at(size_t row, size_t col) const { return cells_[row * columns_.size() + col]; }
  std::span<const double> row(size_t r) const {
    return std::span<const double>(cells_).subspan(r * columns_.size(), columns_.size());
  }
  std::span<const double> cells() const { return cells_; }

  std::optional<size_t> column_index(std::string_view column_name) const;
  // Throws ConfigError when the column does not exist.
  size_t require_column(std::string_view column_name) const;

  // Subset sharing this table's column specs (categorical codes stay valid). Numerical
  // distinct values are recomputed for the subset; bounds are kept.
  TableData select_rows(std::span<const size_t> rows) const;

  // Throws ValidationError on a violated invariant.
  void validate() const;

 private:
  std::string name_;
  std::vector<ColumnSpec> columns_;
  std::vector<double> cells_;
};

struct RawColumn {
  std::string name;
  ColumnKind kind = ColumnKind::categorical;
  std::optional<double> lower;
  std::optional<double> upper;
};

// Dictionary-encodes string cells. Categorical labels sort numerically when every label
// parses as a number, lexicographically otherwise.
TableData encode_table(std::string name, const std::vector<RawColumn>& columns,
                       const std::vector<std::vector<std::string>>& rows);

std::vector<double> sorted_distinct(std::span<const double> values);

// Shortest round-trip decimal form.
std::string format_double(double value);

}  // namespace cep
