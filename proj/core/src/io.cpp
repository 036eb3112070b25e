#include "cep/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "cep/error.hpp"

namespace cep {

namespace {

std::vector<std::string> tokens(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string token;
  while (in >> token) {
    out.push_back(token);
  }
  return out;
}

double parse_number(const std::string& text, size_t line_no) {
  double value = 0.0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc{} || result.ptr != text.data() + text.size()) {
    throw ConfigError("line " + std::to_string(line_no) + ": '" + text + "' is not a number");
  }
  return value;
}

std::pair<std::string, std::string> split_dot(const std::string& text, size_t line_no) {
  const auto dot = text.find('.');
  if (dot == std::string::npos) {
    throw ConfigError("line " + std::to_string(line_no) + ": expected table.column, got '" + text + "'");
  }
  return {text.substr(0, dot), text.substr(dot + 1)};
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n") == std::string::npos) {
    return value;
  }
  std::string out = "\"";
  for (const char c : value) {
    out += c;
    if (c == '"') {
      out += '"';
    }
  }
  return out + "\"";
}

std::string format_cell(const ColumnSpec& spec, double value, bool encoded) {
  if (spec.kind == ColumnKind::categorical && !encoded) {
    return spec.labels.at(static_cast<size_t>(value));
  }
  return format_double(value);
}

void write_table_csv(const TableData& table, const std::filesystem::path& path, bool encoded) {
  std::string out;
  for (size_t c = 0; c < table.num_columns(); ++c) {
    out += (c ? "," : "") + csv_field(table.column(c).name);
  }
  out += '\n';
  for (size_t r = 0; r < table.row_count(); ++r) {
    for (size_t c = 0; c < table.num_columns(); ++c) {
      if (c) {
        out += ',';
      }
      out += csv_field(format_cell(table.column(c), table.at(r, c), encoded));
    }
    out += '\n';
  }
  write_file(path, out);
}

std::vector<std::vector<std::string>> load_rows(const std::filesystem::path& path, const SchemaFile::Table& table) {
  if (!std::filesystem::exists(path)) {
    throw StageError("missing table file " + path.string());
  }
  auto rows = parse_csv(read_file(path));
  if (rows.empty()) {
    throw ConfigError(path.string() + ": missing header row");
  }
  const auto header = rows.front();
  rows.erase(rows.begin());
  if (header.size() != table.columns.size()) {
    throw ConfigError(path.string() + ": header has " + std::to_string(header.size()) + " columns, schema declares " +
                      std::to_string(table.columns.size()));
  }
  for (size_t c = 0; c < header.size(); ++c) {
    if (header[c] != table.columns[c].name) {
      throw ConfigError(path.string() + ": header column " + std::to_string(c + 1) + " is '" + header[c] +
                        "', schema declares '" + table.columns[c].name + "'");
    }
  }
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != header.size()) {
      throw ConfigError(path.string() + ": line " + std::to_string(r + 2) + " has " + std::to_string(rows[r].size()) +
                        " fields, expected " + std::to_string(header.size()));
    }
  }
  return rows;
}

}  // namespace

SchemaFile parse_schema_file(const std::string& text) {
  SchemaFile schema;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.resize(hash);
    }
    const auto parts = tokens(line);
    if (parts.empty()) {
      continue;
    }
    const auto& keyword = parts[0];
    if (keyword == "table" && parts.size() == 2) {
      schema.tables.push_back({parts[1], {}});
    } else if (keyword == "column" && (parts.size() == 3 || parts.size() == 5)) {
      if (schema.tables.empty()) {
        throw ConfigError("line " + std::to_string(line_no) + ": column declared before any table");
      }
      RawColumn column{parts[1], parse_column_kind(parts[2]), std::nullopt, std::nullopt};
      if (parts.size() == 5) {
        column.lower = parse_number(parts[3], line_no);
        column.upper = parse_number(parts[4], line_no);
      }
      schema.tables.back().columns.push_back(column);
    } else if (keyword == "join" && parts.size() == 3) {
      const auto [child, fk] = split_dot(parts[1], line_no);
      const auto [parent, pk] = split_dot(parts[2], line_no);
      schema.joins.push_back(JoinEdge{child, fk, parent, pk});
    } else if (keyword == "hub" && parts.size() == 2) {
      schema.hub = parts[1];
    } else {
      throw ConfigError("line " + std::to_string(line_no) + ": cannot parse '" + line + "'");
    }
  }
  if (schema.hub.empty()) {
    throw ConfigError("schema file has no hub line");
  }
  return schema;
}

std::string format_schema_file(const SchemaGraph& db) {
  std::ostringstream out;
  for (const auto& table : db.tables()) {
    out << "table " << table->name() << '\n';
    for (const auto& column : table->columns()) {
      out << "column " << column.name << ' ' << to_string(column.kind);
      if (column.kind == ColumnKind::numerical) {
        out << ' ' << format_double(column.lower) << ' ' << format_double(column.upper);
      }
      out << '\n';
    }
  }
  for (const auto& edge : db.joins()) {
    out << "join " << edge.child << '.' << edge.fk << ' ' << edge.parent << '.' << edge.pk << '\n';
  }
  out << "hub " << db.hub() << '\n';
  return out.str();
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
        ++i;
      }
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw StageError("cannot read " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  out << contents;
}

void save_dataset(const SchemaGraph& db, const std::filesystem::path& dir) {
  write_file(dir / "schema.txt", format_schema_file(db));
  for (const auto& table : db.tables()) {
    write_table_csv(*table, dir / (table->name() + ".csv"), false);
  }
}

SchemaGraph load_dataset(const std::filesystem::path& dir) {
  const auto schema = parse_schema_file(read_file(dir / "schema.txt"));
  std::vector<TablePtr> tables;
  for (const auto& declared : schema.tables) {
    const auto rows = load_rows(dir / (declared.name + ".csv"), declared);
    tables.push_back(std::make_shared<const TableData>(encode_table(declared.name, declared.columns, rows)));
  }
  return SchemaGraph(std::move(tables), schema.joins, schema.hub);
}

void save_encoded(const SchemaGraph& db, const std::filesystem::path& dir) {
  write_file(dir / "schema.txt", format_schema_file(db));
  for (const auto& table : db.tables()) {
    write_table_csv(*table, dir / (table->name() + ".codes.csv"), true);
    for (const auto& column : table->columns()) {
      if (column.kind != ColumnKind::categorical) {
        continue;
      }
      std::string dict;
      for (const auto& label : column.labels) {
        dict += label + '\n';
      }
      write_file(dir / (table->name() + "." + column.name + ".dict"), dict);
    }
  }
}

SchemaGraph load_encoded(const std::filesystem::path& dir) {
  const auto schema = parse_schema_file(read_file(dir / "schema.txt"));
  std::vector<TablePtr> tables;
  for (const auto& declared : schema.tables) {
    const auto rows = load_rows(dir / (declared.name + ".codes.csv"), declared);
    const size_t width = declared.columns.size();
    std::vector<ColumnSpec> specs(width);
    std::vector<double> cells(rows.size() * width);
    for (size_t c = 0; c < width; ++c) {
      auto& spec = specs[c];
      spec.name = declared.columns[c].name;
      spec.kind = declared.columns[c].kind;
      std::vector<double> values(rows.size());
      for (size_t r = 0; r < rows.size(); ++r) {
        values[r] = parse_number(rows[r][c], r + 2);
        cells[r * width + c] = values[r];
      }
      if (spec.kind == ColumnKind::categorical) {
        std::istringstream dict(read_file(dir / (declared.name + "." + spec.name + ".dict")));
        std::string label;
        while (std::getline(dict, label)) {
          spec.labels.push_back(label);
        }
      } else if (spec.kind == ColumnKind::numerical) {
        spec.distinct_values = sorted_distinct(values);
        spec.lower = declared.columns[c].lower.value_or(spec.distinct_values.empty() ? 0.0 : spec.distinct_values.front());
        spec.upper = declared.columns[c].upper.value_or(spec.distinct_values.empty() ? 0.0 : spec.distinct_values.back());
      }
    }
    auto table = std::make_shared<TableData>(declared.name, std::move(specs), std::move(cells));
    table->validate();
    tables.push_back(std::move(table));
  }
  return SchemaGraph(std::move(tables), schema.joins, schema.hub);
}

}  // namespace cep
