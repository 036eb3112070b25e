#include "cep/deletion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "cep/error.hpp"
#include "cep/random.hpp"

namespace cep {

namespace {

double parse_double(std::string_view text, std::string_view what) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto result = std::from_chars(text.data(), end, value);
  if (text.empty() || result.ec != std::errc{} || result.ptr != end) {
    throw ConfigError("cannot parse " + std::string(what) + " '" + std::string(text) + "'");
  }
  return value;
}

std::vector<std::string> split_ws(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<std::string> parts;
  std::string part;
  while (in >> part) {
    parts.push_back(part);
  }
  return parts;
}

double resolve_value(const ColumnSpec& spec, const std::string& token) {
  if (spec.kind == ColumnKind::categorical) {
    const auto code = spec.code_of(token);
    if (!code) {
      throw ConfigError("column '" + spec.name + "' has no value '" + token + "'");
    }
    return *code;
  }
  return parse_double(token, "value");
}

std::string label_of(const ColumnSpec& spec, double value) {
  if (spec.kind == ColumnKind::categorical) {
    return spec.labels.at(static_cast<size_t>(value));
  }
  return format_double(value);
}

}  // namespace

std::string DeletionTask::name() const {
  std::ostringstream out;
  out << (type == DeletionType::attribute ? 'A' : 'R') << '-' << scope() << '-' << format_double(ratio);
  if (ratio == std::floor(ratio)) {
    out << ".0";
  }
  return out.str();
}

bool DeletionTask::touches_column(std::string_view table, std::string_view column) const {
  return std::any_of(per_table.begin(), per_table.end(), [&](const TableCondition& c) {
    return c.table == table && c.condition && c.condition->column == column;
  });
}

std::vector<std::string> DeletionTask::columns() const {
  std::vector<std::string> out;
  for (const auto& t : per_table) {
    if (t.condition) out.push_back(t.table + "." + t.condition->column);
  }
  return out;
}

TaskName parse_task_name(std::string_view text) {
  const auto first = text.find('-');
  const auto second = first == std::string_view::npos ? first : text.find('-', first + 1);
  if (second == std::string_view::npos) {
    throw ConfigError("task '" + std::string(text) + "' is not of the form [Type]-[Scope]-[Ratio]");
  }
  const auto type_text = text.substr(0, first);
  TaskName name{};
  if (type_text == "A") {
    name.type = DeletionType::attribute;
  } else if (type_text == "R") {
    name.type = DeletionType::random;
  } else {
    throw ConfigError("task type must be A or R, got '" + std::string(type_text) + "'");
  }
  const double scope = parse_double(text.substr(first + 1, second - first - 1), "task scope");
  if (scope < 1 || scope != std::floor(scope)) {
    throw ConfigError("task scope must be a positive integer");
  }
  name.scope = static_cast<size_t>(scope);
  name.ratio = parse_double(text.substr(second + 1), "task ratio");
  if (!(name.ratio > 0.0 && name.ratio <= 1.0)) {
    throw ValidationError("deletion ratio must lie in (0, 1]");
  }
  return name;
}

TableCondition parse_condition(std::string_view text, const SchemaGraph& db) {
  std::string body(text);
  std::string lhs;
  std::vector<std::string> values;
  bool equality = false;
  if (const auto eq = body.find('='); eq != std::string::npos) {
    lhs = body.substr(0, eq);
    values = {body.substr(eq + 1)};
    equality = true;
  } else {
    auto parts = split_ws(body);
    if (parts.size() != 4 || parts[1] != "in") {
      throw ConfigError("condition '" + body + "' must be 'table.column=value' or 'table.column in lo hi'");
    }
    lhs = parts[0];
    values = {parts[2], parts[3]};
  }
  lhs.erase(std::remove_if(lhs.begin(), lhs.end(), ::isspace), lhs.end());
  const auto dot = lhs.find('.');
  if (dot == std::string::npos) {
    throw ConfigError("condition column '" + lhs + "' must be qualified as table.column");
  }
  TableCondition out;
  out.table = lhs.substr(0, dot);
  const auto& table = db.table(db.require_table(out.table));
  const auto& spec = table.column(table.require_column(lhs.substr(dot + 1)));
  if (spec.kind == ColumnKind::key) {
    throw ConfigError("deletion conditions cannot reference join key '" + lhs + "'");
  }
  for (auto& v : values) {
    v.erase(std::remove_if(v.begin(), v.end(), ::isspace), v.end());
  }
  Condition condition;
  condition.column = spec.name;
  condition.lo = resolve_value(spec, values.front());
  condition.hi = equality ? condition.lo : resolve_value(spec, values.back());
  if (condition.lo > condition.hi) {
    throw ValidationError("condition '" + body + "' has lo > hi");
  }
  out.condition = condition;
  return out;
}

DeletionTask make_task(std::string_view name, const std::vector<std::string>& conditions, const SchemaGraph& db) {
  const auto parsed = parse_task_name(name);
  if (parsed.scope != conditions.size()) {
    throw ConfigError("task '" + std::string(name) + "' has scope " + std::to_string(parsed.scope) + " but " +
                      std::to_string(conditions.size()) + " conditions were given");
  }
  DeletionTask task;
  task.type = parsed.type;
  task.ratio = parsed.ratio;
  for (const auto& text : conditions) {
    if (parsed.type == DeletionType::random) {
      const auto table = text.substr(0, text.find('.'));
      db.require_table(table);
      task.per_table.push_back(TableCondition{table, std::nullopt});
    } else {
      task.per_table.push_back(parse_condition(text, db));
    }
  }
  return task;
}

std::string describe_condition(const TableCondition& condition, const SchemaGraph& db) {
  if (!condition.condition) {
    return condition.table;
  }
  const auto& table = db.table(db.require_table(condition.table));
  const auto& spec = table.column(table.require_column(condition.condition->column));
  const auto& c = *condition.condition;
  const auto column = condition.table + "." + c.column;
  if (c.lo == c.hi) {
    return column + "=" + label_of(spec, c.lo);
  }
  return column + " in " + label_of(spec, c.lo) + " " + label_of(spec, c.hi);
}

std::vector<size_t> DatasetSplit::tables_with_deletions() const {
  std::vector<size_t> out;
  for (size_t t = 0; t < deleted_rows.size(); ++t) {
    if (!deleted_rows[t].empty()) {
      out.push_back(t);
    }
  }
  return out;
}

DatasetSplit apply_deletion(const SchemaGraph& db, const DeletionTask& task, uint64_t seed) {
  if (!(task.ratio > 0.0 && task.ratio <= 1.0)) {
    throw ValidationError("deletion ratio must lie in (0, 1]");
  }
  const size_t n = db.num_tables();
  std::vector<std::vector<size_t>> deleted(n);
  std::vector<bool> touched(n, false);

  for (const auto& entry : task.per_table) {
    const size_t t = db.require_table(entry.table);
    if (touched[t]) {
      throw ConfigError("table '" + entry.table + "' appears twice in the deletion task");
    }
    touched[t] = true;
    const auto& table = db.table(t);

    std::vector<size_t> matching;
    if (task.type == DeletionType::attribute) {
      if (!entry.condition) {
        throw ConfigError("attribute deletion on '" + entry.table + "' needs a condition");
      }
      const size_t c = table.require_column(entry.condition->column);
      for (size_t r = 0; r < table.row_count(); ++r) {
        const double v = table.at(r, c);
        if (v >= entry.condition->lo && v <= entry.condition->hi) {
          matching.push_back(r);
        }
      }
    } else {
      matching.resize(table.row_count());
      for (size_t r = 0; r < matching.size(); ++r) {
        matching[r] = r;
      }
    }

    auto count = static_cast<size_t>(std::llround(task.ratio * static_cast<double>(matching.size())));
    if (count == 0 && !matching.empty()) {
      count = 1;
    }
    count = std::min(count, matching.size());
    if (count == matching.size()) {
      deleted[t] = std::move(matching);
    } else {
      Rng rng(Rng::derive(seed, t));
      for (const size_t pick : sample_without_replacement(matching.size(), count, rng)) {
        deleted[t].push_back(matching[pick]);
      }
      std::sort(deleted[t].begin(), deleted[t].end());
    }
  }

  DatasetSplit split;
  split.original = db;
  split.task = task;
  split.retained_rows.resize(n);
  split.deleted_rows = deleted;
  std::vector<TablePtr> retained_tables;
  std::vector<TablePtr> deleted_tables;
  for (size_t t = 0; t < n; ++t) {
    const auto& table = db.table(t);
    std::vector<bool> is_deleted(table.row_count(), false);
    for (const size_t r : deleted[t]) {
      is_deleted[r] = true;
    }
    for (size_t r = 0; r < table.row_count(); ++r) {
      if (!is_deleted[r]) {
        split.retained_rows[t].push_back(r);
      }
    }
    if (deleted[t].empty()) {
      retained_tables.push_back(db.table_ptr(t));
    } else {
      retained_tables.push_back(std::make_shared<const TableData>(table.select_rows(split.retained_rows[t])));
    }
    deleted_tables.push_back(std::make_shared<const TableData>(table.select_rows(deleted[t])));
  }
  split.retained = db.with_tables(std::move(retained_tables));
  split.deleted = db.with_tables(std::move(deleted_tables));
  return split;
}

}  // namespace cep
