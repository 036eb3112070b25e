#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cep/deletion.hpp"
#include "cep/join.hpp"
#include "cep/model.hpp"
#include "cep/query.hpp"
#include "cep/sampler.hpp"
#include "cep/train.hpp"

namespace cep {

enum class LossMode : uint8_t { per_conditional, joint_aggregated };
std::string_view to_string(LossMode mode);
LossMode parse_loss_mode(std::string_view text);

struct CepConfig {
  double alpha = 0.5;
  int sampling_iterations = 50;  // N_s
  int batch_size = 128;
  LossMode loss_mode = LossMode::per_conditional;
  bool enable_sensitivity_prune = true;
  bool enable_domain_prune = true;
  int finetune_epochs = 20;
  // Gap threshold as a fraction of the column range; 0 means 1/B.
  double gap_fraction = 0.0;
  size_t join_cap = kDefaultJoinCap;

  void validate() const;
};

// sum over v with P_r(v) > 0 of |P(v) - P_r(v)| / P_r(v).
double attribute_sensitivity(std::span<const double> full, std::span<const double> retained);

// S_i for every model column, from the original and retained joins. Numerical columns use
// B equal-width bins of their original bounds.
std::vector<double> column_sensitivities(const ArDensityModel& model, const JoinRelation& original,
                                         const JoinRelation& retained);

double weighted_loss_per_conditional(std::span<const double> nll_terms, std::span<const double> weights);
double weighted_loss_joint(std::span<const double> nll_terms, std::span<const double> weights);
double weighted_loss_per_conditional(const ArDensityModel& model, std::span<const double> tuple,
                                     std::span<const double> weights);
double weighted_loss_joint(const ArDensityModel& model, std::span<const double> tuple,
                           std::span<const double> weights);

// Per-column coefficients that turn the chosen weighted loss into a per-conditional sum.
std::vector<double> loss_coefficients(LossMode mode, std::span<const double> weights);

struct ScoreAccumulation {
  std::vector<double> scores;
  int batches = 0;
  // The semi-join was empty; scores are zero.
  bool empty = false;
};

// I = sum over N_s batches of the squared batch-mean gradient of the weighted loss, dropout
// off. Tuples holding values that domain pruning removed are encoded leniently.
ScoreAccumulation accumulate_scores(const ArDensityModel& model, JoinSampler* sampler,
                                    std::span<const double> weights, LossMode mode, int iterations,
                                    int batch_size, Rng& rng);

// Indices of the `count` highest scores among `candidates`, ties to the lower index.
std::vector<size_t> select_top_scores(std::span<const double> scores, std::span<const size_t> candidates,
                                      size_t count);

struct PruneStepResult {
  size_t requested = 0;
  size_t pruned = 0;
  bool saturated = false;
};

// Prunes floor(alpha_k * total_eligible) of the currently eligible weights with the
// highest scores.
PruneStepResult prune_step(ArDensityModel& model, std::span<const double> scores, double alpha_k,
                           size_t total_eligible);

struct TablePruneReport {
  std::string table;
  double semi_join_size = 0.0;
  PruneStepResult step;
  bool empty = false;
};

struct SensitivityPruneReport {
  std::vector<double> sensitivities;
  size_t total_eligible = 0;
  size_t pruned = 0;
  std::vector<TablePruneReport> tables;
  std::vector<double> last_scores;
  double accumulation_seconds = 0.0;
  double seconds = 0.0;
};

// One score-and-prune pass per table with deletions, alpha / K each.
SensitivityPruneReport distribution_sensitivity_pruning(ArDensityModel& model, const DatasetSplit& split,
                                                        const CepConfig& config, uint64_t seed);

// Dom(A) \ Dom(A_r): codes for categorical columns, distinct values for numerical ones.
std::vector<double> deleted_domain(const ColumnSpec& column, std::span<const double> retained_values);

// Drops deleted categories of a column (given as original codes). Returns the old -> new
// flat index map.
std::vector<long> domain_prune_categorical(ArDensityModel& model, size_t column,
                                           std::span<const double> retained_codes);

// Moves every score to its new flat index; dropped parameters disappear.
std::vector<double> reindex_scores(std::span<const double> scores, std::span<const long> index_map,
                                   size_t new_size);

struct ColumnDomainReport {
  std::string column;
  size_t deleted_values = 0;
  bool remapped = false;
};

struct DomainPruneReport {
  std::vector<ColumnDomainReport> columns;
  double seconds = 0.0;
};

// Categorical pruning and numerical remapping against the retained join. Numerical gaps
// count only where they hold a value of the original column that no longer occurs.
DomainPruneReport domain_prune(ArDensityModel& model, std::span<const JoinColumn> original,
                               const JoinRelation& retained, const CepConfig& config);

// Rewrites predicates into the model's current space: numerical ranges are clamped inward
// to retained boundaries and remapped, ranges inside a gap and equalities on deleted values
// become empty.
Query clamp_query(const Query& query, const ArDensityModel& model);

// A predicate no value satisfies.
Predicate empty_predicate(const std::string& column);

// Trains on the retained join with a fresh optimizer; pruned weights stay zero.
TrainResult fine_tune(ArDensityModel& model, JoinSampler& retained, int epochs, uint64_t seed,
                      const TrainOptions& progress = {});

enum class Method : uint8_t { stale, retrain, finetune, cep };
std::string_view to_string(Method method);
Method parse_method(std::string_view text);

struct MethodOptions {
  CepConfig cep;
  // Architecture and epochs for retraining.
  ModelConfig model;
  // Domain pruning for retrain and finetune (Retrain+D, FT+D).
  bool domain_prune = false;
  // Callback settings passed to the fine-tune (or retrain) loop; its epochs are ignored.
  TrainOptions progress;
};

struct MethodResult {
  ArDensityModel model;
  double prune_seconds = 0.0;
  double finetune_seconds = 0.0;
  std::vector<double> loss_trace;
  std::optional<DomainPruneReport> domain;
  std::optional<SensitivityPruneReport> sensitivity;
};

// `original` is required for stale, finetune and cep (ConfigError otherwise).
MethodResult run_method(Method method, const ArDensityModel* original, const DatasetSplit& split,
                        const MethodOptions& options, uint64_t seed);

}  // namespace cep
