#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cep/deletion.hpp"
#include "cep/estimator.hpp"
#include "cep/model.hpp"
#include "cep/query.hpp"
#include "cep/schema.hpp"

namespace cep {

struct WorkloadConfig {
  int min_predicates = 1;
  int max_predicates = 4;
  // Range width as a fraction of the column range, drawn uniformly.
  double min_range_fraction = 0.05;
  double max_range_fraction = 0.5;
  // Columns ("table.column") preferred when drawing predicate columns.
  std::vector<std::string> focus_columns;
  double focus_probability = 0.5;

  void validate() const;
};

// Each query has a connected scope holding the hub and predicates built around one tuple of
// the scope join, so it matches at least that tuple on `db`.
std::vector<Query> gen_workload(const SchemaGraph& db, int num_queries, uint64_t seed,
                                const WorkloadConfig& config = {});

// Range predicates on columns named by the task become not_range; nullopt when there are
// none.
std::optional<Query> complement_query(const Query& query, const DeletionTask& task);

// Exact count of the query's scope join on `db` after filtering every table by its
// predicates.
double true_cardinality(const SchemaGraph& db, const Query& query);

struct QError {
  double value = 1.0;
  std::string excluded;  // "model-zero", "true-zero" or empty
  bool included() const { return excluded.empty(); }
};

// Throws ValidationError on negative inputs.
QError q_error(double estimate, double truth);

// Nearest rank: the ceil(p/100 * n)-th smallest value. Throws ValidationError on an empty
// input or p outside (0, 100].
double nearest_rank_percentile(std::vector<double> values, double p);

struct EvalItem {
  Query query;
  QueryType type = QueryType::original;
  double truth = 0.0;
};

// OQ items for every query plus CQ items where the task yields a complement, with truths
// computed on `retained`.
std::vector<EvalItem> prepare_eval(const std::vector<Query>& workload, const DeletionTask& task,
                                   const SchemaGraph& retained);

struct QueryResult {
  int64_t id = 0;
  QueryType type = QueryType::original;
  double truth = 0.0;
  double estimate = 0.0;
  QError error;
};

struct PercentileSummary {
  std::string set;  // OQ, CQ or ALL
  size_t included = 0;
  size_t model_zero = 0;
  size_t true_zero = 0;
  bool degenerate = true;
  double p50 = 0.0;
  double p75 = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
};

struct QErrorReport {
  std::vector<QueryResult> results;
  std::vector<PercentileSummary> summary;  // OQ, CQ, ALL

  const PercentileSummary& set(std::string_view name) const;
};

PercentileSummary summarize(const std::vector<QueryResult>& results, std::string set,
                            std::optional<QueryType> type);

struct EvalConfig {
  int num_samples = kDefaultNumSamples;
  uint64_t seed = 0;
  // Worker count; 0 means CEP_THREADS or the hardware concurrency.
  int threads = 0;
};

int eval_threads(int requested);

// `join_size` is |T|: the original full-join size for stale models, the retained one
// otherwise.
QErrorReport evaluate(const ArDensityModel& model, const std::vector<EvalItem>& items, double join_size,
                      const EvalConfig& config);

// Each trace resampled by linear interpolation onto `points` evenly spaced progress values.
std::vector<std::vector<double>> convergence_trace(const std::vector<std::vector<double>>& traces,
                                                   int points = 101);

// Workload file: `scope=t1,t2 | t.c = label ; t.c in lo hi ; t.c notin lo hi`. Query ids are
// line numbers counted from 0.
std::string format_workload(const std::vector<Query>& queries, const SchemaGraph& db);
// Throws ConfigError with a line and column on malformed input.
std::vector<Query> parse_workload(const std::string& text, const SchemaGraph& db);

std::string format_report_csv(const QErrorReport& report);
std::string format_summary_csv(const QErrorReport& report);

}  // namespace cep
