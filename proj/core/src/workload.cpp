#include "cep/workload.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>
#include <thread>

#include "cep/error.hpp"
#include "cep/join.hpp"
#include "cep/unlearn.hpp"

namespace cep {

namespace {

constexpr int kMaxWalkAttempts = 10'000;

struct ColumnRef {
  size_t table;
  size_t column;
};

ColumnRef resolve(const SchemaGraph& db, const std::string& qualified) {
  const auto [table, column] = split_qualified(qualified);
  const auto t = db.require_table(table);
  return {t, db.table(t).require_column(column)};
}

std::vector<size_t> random_scope(const SchemaGraph& db, Rng& rng) {
  const auto hub = db.hub_index();
  const auto target = 1 + static_cast<size_t>(rng.uniform_int(db.num_tables()));
  std::vector<size_t> scope{hub};
  while (scope.size() < target) {
    std::vector<size_t> frontier;
    for (const auto& join : db.joins()) {
      const auto child = db.require_table(join.child);
      const auto parent = db.require_table(join.parent);
      const bool has_child = std::find(scope.begin(), scope.end(), child) != scope.end();
      const bool has_parent = std::find(scope.begin(), scope.end(), parent) != scope.end();
      if (has_child != has_parent) frontier.push_back(has_child ? parent : child);
    }
    if (frontier.empty()) break;
    std::sort(frontier.begin(), frontier.end());
    frontier.erase(std::unique(frontier.begin(), frontier.end()), frontier.end());
    scope.push_back(frontier[rng.uniform_int(frontier.size())]);
  }
  std::sort(scope.begin(), scope.end());
  return scope;
}

}  // namespace

void WorkloadConfig::validate() const {
  if (min_predicates < 1 || max_predicates < min_predicates) throw ValidationError("invalid predicate count range");
  if (!(min_range_fraction > 0.0) || max_range_fraction < min_range_fraction || max_range_fraction > 1.0) {
    throw ValidationError("invalid range width fractions");
  }
  if (focus_probability < 0.0 || focus_probability > 1.0) throw ValidationError("focus probability must lie in [0, 1]");
}

std::vector<Query> gen_workload(const SchemaGraph& db, int num_queries, uint64_t seed, const WorkloadConfig& config) {
  config.validate();
  std::vector<Query> out;
  if (num_queries <= 0) return out;
  const auto rel = unmaterialized_join(db);
  const auto all_columns = rel.columns();
  std::vector<double> anchor(all_columns.size());

  for (int i = 0; i < num_queries; ++i) {
    Rng rng(Rng::derive(seed, static_cast<uint64_t>(i)));
    Query q;
    q.id = i;
    const auto scope = random_scope(db, rng);
    for (const auto t : scope) q.scope.push_back(db.table(t).name());

    int attempts = 0;
    while (!rel.random_walk(rng, anchor)) {
      if (++attempts >= kMaxWalkAttempts) throw EmptyRelationError("join is empty; cannot anchor queries");
    }

    std::vector<size_t> candidates;
    for (size_t a = 0; a < all_columns.size(); ++a) {
      if (std::find(scope.begin(), scope.end(), all_columns[a].table) != scope.end()) candidates.push_back(a);
    }
    if (candidates.empty()) {
      out.push_back(std::move(q));
      continue;
    }
    const int upper = std::min<int>(config.max_predicates, static_cast<int>(candidates.size()));
    const int lower = std::min(config.min_predicates, upper);
    const int count = lower + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(upper - lower + 1)));

    for (int k = 0; k < count; ++k) {
      std::vector<size_t> focus;
      for (const auto a : candidates) {
        const auto& name = all_columns[a].name;
        if (std::find(config.focus_columns.begin(), config.focus_columns.end(), name) != config.focus_columns.end()) {
          focus.push_back(a);
        }
      }
      const auto& pool = !focus.empty() && rng.uniform() < config.focus_probability ? focus : candidates;
      const auto a = pool[rng.uniform_int(pool.size())];
      candidates.erase(std::find(candidates.begin(), candidates.end(), a));

      const auto& column = all_columns[a];
      const double value = anchor[a];
      if (column.spec.kind == ColumnKind::categorical) {
        q.predicates.push_back(Predicate{column.name, PredicateOp::equals, value, value});
      } else {
        const double span = column.spec.upper - column.spec.lower;
        const double width = rng.uniform(config.min_range_fraction, config.max_range_fraction) * span;
        const double lo = std::max(column.spec.lower, value - rng.uniform() * width);
        const double hi = std::min(column.spec.upper, lo + width);
        q.predicates.push_back(Predicate{column.name, PredicateOp::range, std::min(lo, value), std::max(hi, value)});
      }
    }
    out.push_back(std::move(q));
  }
  return out;
}

std::optional<Query> complement_query(const Query& query, const DeletionTask& task) {
  Query out = query;
  bool inverted = false;
  for (auto& p : out.predicates) {
    if (p.op != PredicateOp::range) continue;
    const auto [table, column] = split_qualified(p.column);
    if (!task.touches_column(table, column)) continue;
    p.op = PredicateOp::not_range;
    inverted = true;
  }
  if (!inverted) return std::nullopt;
  return out;
}

double true_cardinality(const SchemaGraph& db, const Query& query) {
  const auto scope = scope_indices(query, db);
  std::vector<std::vector<uint8_t>> masks(db.num_tables());
  for (size_t t = 0; t < db.num_tables(); ++t) masks[t].assign(db.table(t).row_count(), 1);
  for (const auto& p : query.predicates) {
    const auto ref = resolve(db, p.column);
    if (std::find(scope.begin(), scope.end(), ref.table) == scope.end()) {
      throw ValidationError("predicate on " + p.column + " is outside the query scope");
    }
    const auto& table = db.table(ref.table);
    for (size_t r = 0; r < table.row_count(); ++r) {
      if (masks[ref.table][r] && !predicate_matches(p, table.at(r, ref.column))) masks[ref.table][r] = 0;
    }
  }
  return count_join(db, scope, &masks);
}

QError q_error(double estimate, double truth) {
  if (estimate < 0.0 || truth < 0.0 || std::isnan(estimate) || std::isnan(truth)) {
    throw ValidationError("cardinalities must be non-negative");
  }
  if (estimate == 0.0 && truth == 0.0) return {1.0, ""};
  if (estimate == 0.0) return {0.0, "model-zero"};
  if (truth == 0.0) return {0.0, "true-zero"};
  return {std::max(estimate / truth, truth / estimate), ""};
}

double nearest_rank_percentile(std::vector<double> values, double p) {
  if (values.empty()) throw ValidationError("percentile of an empty set");
  if (!(p > 0.0 && p <= 100.0)) throw ValidationError("percentile must lie in (0, 100]");
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size()) - 1e-9));
  return values[std::clamp<size_t>(rank, 1, values.size()) - 1];
}

std::vector<EvalItem> prepare_eval(const std::vector<Query>& workload, const DeletionTask& task,
                                   const SchemaGraph& retained) {
  std::vector<EvalItem> items;
  for (const auto& q : workload) items.push_back(EvalItem{q, QueryType::original, true_cardinality(retained, q)});
  for (const auto& q : workload) {
    if (auto cq = complement_query(q, task)) {
      const double truth = true_cardinality(retained, *cq);
      items.push_back(EvalItem{std::move(*cq), QueryType::complement, truth});
    }
  }
  return items;
}

const PercentileSummary& QErrorReport::set(std::string_view name) const {
  for (const auto& s : summary) {
    if (s.set == name) return s;
  }
  throw ValidationError("report has no set " + std::string(name));
}

PercentileSummary summarize(const std::vector<QueryResult>& results, std::string set,
                            std::optional<QueryType> type) {
  PercentileSummary s;
  s.set = std::move(set);
  std::vector<double> values;
  for (const auto& r : results) {
    if (type && r.type != *type) continue;
    if (r.error.excluded == "model-zero") {
      ++s.model_zero;
    } else if (r.error.excluded == "true-zero") {
      ++s.true_zero;
    } else {
      values.push_back(r.error.value);
    }
  }
  s.included = values.size();
  s.degenerate = values.empty();
  if (!s.degenerate) {
    s.p50 = nearest_rank_percentile(values, 50);
    s.p75 = nearest_rank_percentile(values, 75);
    s.p95 = nearest_rank_percentile(values, 95);
    s.p99 = nearest_rank_percentile(values, 99);
  }
  return s;
}

int eval_threads(int requested) {
  int threads = requested;
  if (threads <= 0) threads = static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("CEP_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) threads = std::min(threads, cap);
  }
  return std::max(1, threads);
}

QErrorReport evaluate(const ArDensityModel& model, const std::vector<EvalItem>& items, double join_size,
                      const EvalConfig& config) {
  if (join_size < 0.0) throw ValidationError("join size must be non-negative");
  QErrorReport report;
  report.results.resize(items.size());
  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (size_t i = next++; i < items.size() && !failed; i = next++) {
      try {
        const auto& item = items[i];
        Rng rng(Rng::derive(config.seed, static_cast<uint64_t>(item.query.id) * 2 + static_cast<uint64_t>(item.type)));
        const auto query = clamp_query(item.query, model);
        const double estimate = estimate_cardinality(model, query, join_size, config.num_samples, rng);
        report.results[i] = QueryResult{item.query.id, item.type, item.truth, estimate, q_error(estimate, item.truth)};
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  const auto threads = static_cast<size_t>(std::min<int>(eval_threads(config.threads),
                                                         static_cast<int>(std::max<size_t>(1, items.size()))));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  report.summary.push_back(summarize(report.results, "OQ", QueryType::original));
  report.summary.push_back(summarize(report.results, "CQ", QueryType::complement));
  report.summary.push_back(summarize(report.results, "ALL", std::nullopt));
  return report;
}

std::vector<std::vector<double>> convergence_trace(const std::vector<std::vector<double>>& traces, int points) {
  if (points < 2) throw ValidationError("need at least two progress points");
  std::vector<std::vector<double>> out;
  for (const auto& trace : traces) {
    if (trace.empty()) throw ValidationError("empty trace");
    std::vector<double> curve(static_cast<size_t>(points));
    for (int k = 0; k < points; ++k) {
      const double x = static_cast<double>(k) / (points - 1) * static_cast<double>(trace.size() - 1);
      const auto i = std::min(static_cast<size_t>(x), trace.size() - 1);
      const auto j = std::min(i + 1, trace.size() - 1);
      const double f = x - static_cast<double>(i);
      curve[static_cast<size_t>(k)] = trace[i] + f * (trace[j] - trace[i]);
    }
    out.push_back(std::move(curve));
  }
  return out;
}

std::string format_workload(const std::vector<Query>& queries, const SchemaGraph& db) {
  std::ostringstream out;
  for (const auto& q : queries) {
    out << "scope=";
    for (size_t i = 0; i < q.scope.size(); ++i) out << (i ? "," : "") << q.scope[i];
    out << " |";
    for (size_t i = 0; i < q.predicates.size(); ++i) {
      const auto& p = q.predicates[i];
      const auto ref = resolve(db, p.column);
      const auto& spec = db.table(ref.table).column(ref.column);
      const auto text = [&](double v) {
        if (spec.kind != ColumnKind::categorical) return format_double(v);
        const auto code = static_cast<long>(v);
        if (code < 0 || code >= static_cast<long>(spec.domain_size())) {
          throw ValidationError("code " + format_double(v) + " outside the dictionary of " + p.column);
        }
        return spec.labels[static_cast<size_t>(code)];
      };
      out << (i ? " ;" : "") << ' ' << p.column << ' ';
      switch (p.op) {
        case PredicateOp::equals:
          out << "= " << text(p.lo);
          break;
        case PredicateOp::range:
          out << "in " << text(p.lo) << ' ' << text(p.hi);
          break;
        case PredicateOp::not_range:
          out << "notin " << text(p.lo) << ' ' << text(p.hi);
          break;
      }
    }
    out << '\n';
  }
  return out.str();
}

std::vector<Query> parse_workload(const std::string& text, const SchemaGraph& db) {
  std::vector<Query> out;
  std::istringstream lines(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    const auto fail = [&](size_t column, const std::string& what) {
      throw ConfigError("workload line " + std::to_string(line_no) + ", column " + std::to_string(column + 1) + ": " +
                        what);
    };
    if (line.find_first_not_of(" \t\r") == std::string::npos || line.front() == '#') continue;
    if (line.rfind("scope=", 0) != 0) fail(0, "expected 'scope='");
    const auto bar = line.find('|');
    if (bar == std::string::npos) fail(line.size(), "expected '|'");

    Query q;
    q.id = static_cast<int64_t>(out.size());
    std::istringstream scope_text(line.substr(6, bar - 6));
    std::string name;
    while (std::getline(scope_text, name, ',')) {
      name.erase(0, name.find_first_not_of(' '));
      name.erase(name.find_last_not_of(" \t") + 1);
      if (name.empty()) continue;
      if (!db.table_index(name)) fail(6, "unknown table '" + name + "'");
      q.scope.push_back(name);
    }

    size_t start = bar + 1;
    while (start <= line.size()) {
      auto end = line.find(';', start);
      if (end == std::string::npos) end = line.size();
      std::istringstream pred(line.substr(start, end - start));
      std::vector<std::string> tokens;
      for (std::string tok; pred >> tok;) tokens.push_back(tok);
      if (!tokens.empty()) {
        ColumnRef ref{};
        try {
          ref = resolve(db, tokens[0]);
        } catch (const ConfigError& e) {
          fail(start, e.what());
        }
        const auto& spec = db.table(ref.table).column(ref.column);
        const auto value = [&](const std::string& tok, bool allow_unknown) {
          if (spec.kind == ColumnKind::categorical) {
            const auto code = spec.code_of(tok);
            if (!code && !allow_unknown) fail(start, "unknown label '" + tok + "' for " + tokens[0]);
            return code ? static_cast<double>(*code) : -1.0;
          }
          try {
            size_t used = 0;
            const double v = std::stod(tok, &used);
            if (used != tok.size()) fail(start, "bad number '" + tok + "'");
            return v;
          } catch (const std::logic_error&) {
            fail(start, "bad number '" + tok + "'");
          }
          return 0.0;
        };
        Predicate p{tokens[0], PredicateOp::equals, 0.0, 0.0};
        if (tokens.size() == 3 && tokens[1] == "=") {
          p.lo = p.hi = value(tokens[2], true);
          if (spec.kind != ColumnKind::categorical) p.op = PredicateOp::range;
        } else if (tokens.size() == 4 && (tokens[1] == "in" || tokens[1] == "notin")) {
          p.op = tokens[1] == "in" ? PredicateOp::range : PredicateOp::not_range;
          p.lo = value(tokens[2], false);
          p.hi = value(tokens[3], false);
          if (p.lo > p.hi) fail(start, "range bounds out of order");
        } else {
          fail(start, "expected 'column = v', 'column in lo hi' or 'column notin lo hi'");
        }
        q.predicates.push_back(std::move(p));
      }
      start = end + 1;
    }
    out.push_back(std::move(q));
  }
  return out;
}

std::string format_report_csv(const QErrorReport& report) {
  std::string out = "query_id,type,c,c_hat,qerr,excluded_reason\n";
  for (const auto& r : report.results) {
    out += std::to_string(r.id) + ',' + std::string(to_string(r.type)) + ',' + format_double(r.truth) + ',' +
           format_double(r.estimate) + ',' + (r.error.included() ? format_double(r.error.value) : "") + ',' +
           r.error.excluded + '\n';
  }
  return out;
}

std::string format_summary_csv(const QErrorReport& report) {
  std::string out = "set,included,model_zero,true_zero,p50,p75,p95,p99\n";
  for (const auto& s : report.summary) {
    const auto cell = [&](double v) { return s.degenerate ? std::string("nan") : format_double(v); };
    out += s.set + ',' + std::to_string(s.included) + ',' + std::to_string(s.model_zero) + ',' +
           std::to_string(s.true_zero) + ',' + cell(s.p50) + ',' + cell(s.p75) + ',' + cell(s.p95) + ',' +
           cell(s.p99) + '\n';
  }
  return out;
}

}  // namespace cep
