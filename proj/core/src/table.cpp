#include "cep/table.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <unordered_map>

#include "cep/error.hpp"

namespace cep {

namespace {

std::optional<double> parse_number(std::string_view text) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto result = std::from_chars(text.data(), end, value);
  if (result.ec != std::errc{} || result.ptr != end || text.empty()) {
    return std::nullopt;
  }
  return value;
}

}  // namespace

std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::categorical:
      return "categorical";
    case ColumnKind::numerical:
      return "numerical";
    case ColumnKind::key:
      return "key";
  }
  return "unknown";
}

ColumnKind parse_column_kind(std::string_view text) {
  if (text == "categorical") return ColumnKind::categorical;
  if (text == "numerical") return ColumnKind::numerical;
  if (text == "key") return ColumnKind::key;
  throw ConfigError("unknown column kind '" + std::string(text) + "'");
}

std::optional<int> ColumnSpec::code_of(std::string_view label) const {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) {
    return std::nullopt;
  }
  return static_cast<int>(it - labels.begin());
}

TableData::TableData(std::string name, std::vector<ColumnSpec> columns, std::vector<double> cells)
    : name_(std::move(name)), columns_(std::move(columns)), cells_(std::move(cells)) {
  if (!columns_.empty() && cells_.size() % columns_.size() != 0) {
    throw ValidationError("table '" + name_ + "': cell count is not a multiple of the column count");
  }
}

std::optional<size_t> TableData::column_index(std::string_view column_name) const {
  for (size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == column_name) {
      return i;
    }
  }
  return std::nullopt;
}

size_t TableData::require_column(std::string_view column_name) const {
  const auto index = column_index(column_name);
  if (!index) {
    throw ConfigError("table '" + name_ + "' has no column '" + std::string(column_name) + "'");
  }
  return *index;
}

TableData TableData::select_rows(std::span<const size_t> rows) const {
  const size_t width = columns_.size();
  std::vector<double> cells;
  cells.reserve(rows.size() * width);
  for (const size_t r : rows) {
    const auto source = row(r);
    cells.insert(cells.end(), source.begin(), source.end());
  }
  auto columns = columns_;
  for (size_t c = 0; c < width; ++c) {
    if (columns[c].kind != ColumnKind::numerical) {
      continue;
    }
    std::vector<double> values(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
      values[i] = cells[i * width + c];
    }
    columns[c].distinct_values = sorted_distinct(values);
  }
  return TableData(name_, std::move(columns), std::move(cells));
}

void TableData::validate() const {
  for (size_t c = 0; c < columns_.size(); ++c) {
    const auto& spec = columns_[c];
    if (spec.kind == ColumnKind::numerical && spec.lower > spec.upper) {
      throw ValidationError("column '" + spec.name + "': lower bound exceeds upper bound");
    }
    for (size_t r = 0; r < row_count(); ++r) {
      const double v = at(r, c);
      if (spec.kind == ColumnKind::categorical) {
        if (v < 0 || v >= static_cast<double>(spec.domain_size()) || v != static_cast<double>(static_cast<long>(v))) {
          throw ValidationError("column '" + spec.name + "': invalid code at row " + std::to_string(r));
        }
      } else if (spec.kind == ColumnKind::numerical) {
        if (v < spec.lower || v > spec.upper) {
          throw ValidationError("column '" + spec.name + "': value out of bounds at row " + std::to_string(r));
        }
      }
    }
  }
}

std::vector<double> sorted_distinct(std::span<const double> values) {
  std::vector<double> out(values.begin(), values.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

TableData encode_table(std::string name, const std::vector<RawColumn>& columns,
                       const std::vector<std::vector<std::string>>& rows) {
  const size_t width = columns.size();
  std::vector<ColumnSpec> specs(width);
  std::vector<double> cells(rows.size() * width);
  for (const auto& row : rows) {
    if (row.size() != width) {
      throw ValidationError("table '" + name + "': row width does not match the column count");
    }
  }

  for (size_t c = 0; c < width; ++c) {
    auto& spec = specs[c];
    spec.name = columns[c].name;
    spec.kind = columns[c].kind;
    if (spec.kind == ColumnKind::categorical) {
      bool all_numeric = true;
      std::vector<std::string> labels;
      labels.reserve(rows.size());
      for (const auto& row : rows) {
        labels.push_back(row[c]);
        all_numeric = all_numeric && parse_number(row[c]).has_value();
      }
      std::sort(labels.begin(), labels.end());
      labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
      if (all_numeric) {
        std::stable_sort(labels.begin(), labels.end(), [](const std::string& a, const std::string& b) {
          return *parse_number(a) < *parse_number(b);
        });
      }
      std::unordered_map<std::string, int> codes;
      for (size_t i = 0; i < labels.size(); ++i) {
        codes.emplace(labels[i], static_cast<int>(i));
      }
      for (size_t r = 0; r < rows.size(); ++r) {
        cells[r * width + c] = codes.at(rows[r][c]);
      }
      spec.labels = std::move(labels);
    } else {
      std::vector<double> values(rows.size());
      for (size_t r = 0; r < rows.size(); ++r) {
        const auto parsed = parse_number(rows[r][c]);
        if (!parsed) {
          throw ValidationError("table '" + name + "', column '" + spec.name + "': '" + rows[r][c] +
                                "' is not a number (row " + std::to_string(r + 1) + ")");
        }
        values[r] = *parsed;
        cells[r * width + c] = *parsed;
      }
      if (spec.kind == ColumnKind::numerical) {
        spec.distinct_values = sorted_distinct(values);
        const double data_min = spec.distinct_values.empty() ? 0.0 : spec.distinct_values.front();
        const double data_max = spec.distinct_values.empty() ? 0.0 : spec.distinct_values.back();
        spec.lower = columns[c].lower.value_or(data_min);
        spec.upper = columns[c].upper.value_or(data_max);
      }
    }
  }
  TableData table(std::move(name), std::move(specs), std::move(cells));
  table.validate();
  return table;
}

}  // namespace cep
