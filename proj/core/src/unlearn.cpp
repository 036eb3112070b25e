#include "cep/unlearn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <set>

#include "cep/error.hpp"
#include "cep/pmf.hpp"

namespace cep {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

constexpr size_t kWalkSamples = 200'000;

JoinRelation join_or_walks(const SchemaGraph& db, size_t cap) {
  try {
    return materialize_join(db, cap);
  } catch (const SizeError&) {
    return unmaterialized_join(db);
  }
}

std::vector<double> attribute_values(const JoinRelation& rel, size_t attribute, uint64_t seed) {
  if (rel.materialized()) return rel.column_values(attribute);
  Rng rng(seed);
  const auto tuples = sample_join(rel, kWalkSamples, rng);
  const auto width = rel.num_columns();
  std::vector<double> out;
  out.reserve(tuples.size() / width);
  for (size_t r = 0; r < tuples.size() / width; ++r) out.push_back(tuples[r * width + attribute]);
  return out;
}

size_t attribute_of(const JoinRelation& rel, const std::string& name) {
  const auto columns = rel.columns();
  for (size_t a = 0; a < columns.size(); ++a) {
    if (columns[a].name == name) return a;
  }
  throw ValidationError("join has no attribute " + name);
}

}  // namespace

std::string_view to_string(LossMode mode) {
  return mode == LossMode::per_conditional ? "per_conditional" : "joint";
}

LossMode parse_loss_mode(std::string_view text) {
  if (text == "per_conditional") return LossMode::per_conditional;
  if (text == "joint" || text == "joint_aggregated") return LossMode::joint_aggregated;
  throw ValidationError("unknown loss mode '" + std::string(text) + "'");
}

void CepConfig::validate() const {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in [0, 1)");
  if (sampling_iterations < 1) throw ValidationError("N_s must be at least 1");
  if (batch_size < 1) throw ValidationError("batch size must be positive");
  if (finetune_epochs < 0) throw ValidationError("fine-tune epochs must be non-negative");
  if (gap_fraction < 0.0 || gap_fraction >= 1.0) throw ValidationError("gap fraction must lie in [0, 1)");
}

double attribute_sensitivity(std::span<const double> full, std::span<const double> retained) {
  if (full.size() != retained.size()) throw ValidationError("pmfs cover different domains");
  double s = 0.0;
  for (size_t v = 0; v < full.size(); ++v) {
    if (retained[v] <= 0.0) continue;
    if (full[v] <= 0.0) throw ValidationError("retained pmf has mass outside the full domain");
    s += std::abs(full[v] - retained[v]) / retained[v];
  }
  return s;
}

std::vector<double> column_sensitivities(const ArDensityModel& model, const JoinRelation& original,
                                         const JoinRelation& retained) {
  std::vector<double> out(model.num_columns(), 0.0);
  if (retained.empty()) throw EmptyRelationError("retained join is empty");
  const int bins = model.config().numeric_bins;
  for (size_t c = 0; c < model.num_columns(); ++c) {
    const auto& name = model.column(c).name;
    const auto a = attribute_of(original, name);
    const auto b = attribute_of(retained, name);
    const auto& spec = original.columns()[a].spec;
    const auto full = empirical_pmf(attribute_values(original, a, Rng::derive(c, 0)), spec, bins);
    const auto kept = empirical_pmf(attribute_values(retained, b, Rng::derive(c, 1)), spec, bins);
    out[c] = attribute_sensitivity(full, kept);
  }
  return out;
}

double weighted_loss_per_conditional(std::span<const double> nll_terms, std::span<const double> weights) {
  if (nll_terms.size() != weights.size()) throw ValidationError("one weight per column is required");
  return std::inner_product(nll_terms.begin(), nll_terms.end(), weights.begin(), 0.0);
}

double weighted_loss_joint(std::span<const double> nll_terms, std::span<const double> weights) {
  if (nll_terms.size() != weights.size()) throw ValidationError("one weight per column is required");
  return std::accumulate(nll_terms.begin(), nll_terms.end(), 0.0) *
         std::accumulate(weights.begin(), weights.end(), 0.0);
}

double weighted_loss_per_conditional(const ArDensityModel& model, std::span<const double> tuple,
                                     std::span<const double> weights) {
  return weighted_loss_per_conditional(nll_terms(model, tuple), weights);
}

double weighted_loss_joint(const ArDensityModel& model, std::span<const double> tuple,
                           std::span<const double> weights) {
  return weighted_loss_joint(nll_terms(model, tuple), weights);
}

std::vector<double> loss_coefficients(LossMode mode, std::span<const double> weights) {
  for (const double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("column weights must be finite and non-negative");
  }
  if (mode == LossMode::per_conditional) return {weights.begin(), weights.end()};
  return std::vector<double>(weights.size(), std::accumulate(weights.begin(), weights.end(), 0.0));
}

ScoreAccumulation accumulate_scores(const ArDensityModel& model, JoinSampler* sampler,
                                    std::span<const double> weights, LossMode mode, int iterations,
                                    int batch_size, Rng& rng) {
  if (iterations < 1) throw ValidationError("N_s must be at least 1");
  if (batch_size < 1) throw ValidationError("batch size must be positive");
  ScoreAccumulation out;
  out.scores.assign(model.num_parameters(), 0.0);
  if (sampler == nullptr || sampler->epoch_size() == 0) {
    out.empty = true;
    return out;
  }
  const auto coefficients = loss_coefficients(mode, weights);
  if (coefficients.size() != model.num_columns()) throw ValidationError("one weight per column is required");
  std::vector<double> gradient(model.num_parameters());
  std::vector<double> tuples;
  for (int t = 0; t < iterations; ++t) {
    const auto rows = sampler->sample(static_cast<size_t>(batch_size), rng, tuples);
    if (rows == 0) continue;
    const auto batch = encode_batch(model, std::span<const double>(tuples).first(rows * model.num_columns()), rows,
                                    /*lenient=*/true);
    loss_and_gradient(model, batch, coefficients, gradient);
    for (size_t i = 0; i < gradient.size(); ++i) out.scores[i] += gradient[i] * gradient[i];
    ++out.batches;
  }
  return out;
}

std::vector<size_t> select_top_scores(std::span<const double> scores, std::span<const size_t> candidates,
                                      size_t count) {
  std::vector<size_t> order(candidates.begin(), candidates.end());
  count = std::min(count, order.size());
  const auto before = [&](size_t a, size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); };
  std::partial_sort(order.begin(), order.begin() + static_cast<long>(count), order.end(), before);
  order.resize(count);
  return order;
}

PruneStepResult prune_step(ArDensityModel& model, std::span<const double> scores, double alpha_k,
                           size_t total_eligible) {
  if (!(alpha_k >= 0.0 && alpha_k < 1.0)) throw ValidationError("alpha_k must lie in [0, 1)");
  if (scores.size() != model.num_parameters()) throw ValidationError("scores do not match the model");
  PruneStepResult result;
  result.requested = static_cast<size_t>(std::floor(alpha_k * static_cast<double>(total_eligible) + 1e-9));
  if (result.requested == 0) return result;
  const auto eligible = model.eligible_weights();
  result.saturated = result.requested > eligible.size();
  const auto chosen = select_top_scores(scores, eligible, result.requested);
  model.prune(chosen);
  result.pruned = chosen.size();
  return result;
}

SensitivityPruneReport distribution_sensitivity_pruning(ArDensityModel& model, const DatasetSplit& split,
                                                        const CepConfig& config, uint64_t seed) {
  config.validate();
  const auto start = Clock::now();
  SensitivityPruneReport report;
  report.sensitivities.assign(model.num_columns(), 0.0);
  report.total_eligible = model.eligible_weights().size();
  const auto tables = split.tables_with_deletions();
  if (tables.empty()) {
    report.seconds = seconds_since(start);
    return report;
  }

  const auto original = join_or_walks(split.original, config.join_cap);
  const auto retained = join_or_walks(split.retained, config.join_cap);
  report.sensitivities = column_sensitivities(model, original, retained);

  const double alpha_k = config.alpha / static_cast<double>(tables.size());
  for (const auto k : tables) {
    TablePruneReport entry;
    entry.table = split.original.table(k).name();
    const auto semi_join = semi_join_deletion(split, k, config.join_cap);
    entry.semi_join_size = semi_join.cardinality();
    std::unique_ptr<JoinSampler> sampler;
    if (!semi_join.empty()) sampler = make_sampler(semi_join);
    Rng rng(Rng::derive(seed, k));
    const auto accumulation_start = Clock::now();
    auto scores = accumulate_scores(model, sampler.get(), report.sensitivities, config.loss_mode,
                                    config.sampling_iterations, config.batch_size, rng);
    report.accumulation_seconds += seconds_since(accumulation_start);
    entry.empty = scores.empty;
    if (!scores.empty) entry.step = prune_step(model, scores.scores, alpha_k, report.total_eligible);
    report.pruned += entry.step.pruned;
    report.last_scores = std::move(scores.scores);
    report.tables.push_back(std::move(entry));
  }
  report.seconds = seconds_since(start);
  return report;
}

std::vector<double> deleted_domain(const ColumnSpec& column, std::span<const double> retained_values) {
  const std::set<double> kept(retained_values.begin(), retained_values.end());
  std::vector<double> out;
  if (column.kind == ColumnKind::categorical) {
    for (size_t code = 0; code < column.domain_size(); ++code) {
      if (!kept.contains(static_cast<double>(code))) out.push_back(static_cast<double>(code));
    }
    return out;
  }
  for (const double v : column.distinct_values) {
    if (!kept.contains(v)) out.push_back(v);
  }
  return out;
}

std::vector<long> domain_prune_categorical(ArDensityModel& model, size_t column,
                                           std::span<const double> retained_codes) {
  const auto& col = model.column(column);
  if (col.kind != ColumnKind::categorical) throw ValidationError(col.name + " is not categorical");
  std::set<int> keep;
  for (const double v : retained_codes) {
    const auto code = static_cast<long>(v);
    if (code < 0 || code >= static_cast<long>(col.code_map.size())) {
      throw ValidationError("retained value outside the domain of " + col.name);
    }
    if (col.code_map[static_cast<size_t>(code)] >= 0) keep.insert(col.code_map[static_cast<size_t>(code)]);
  }
  if (keep.empty()) throw ValidationError("every value of " + col.name + " would be deleted");
  if (static_cast<int>(keep.size()) == col.categories) {
    std::vector<long> identity(model.num_parameters());
    std::iota(identity.begin(), identity.end(), 0L);
    return identity;
  }
  const std::vector<int> codes(keep.begin(), keep.end());
  return model.drop_categories(column, codes);
}

std::vector<double> reindex_scores(std::span<const double> scores, std::span<const long> index_map,
                                   size_t new_size) {
  if (scores.size() != index_map.size()) throw ValidationError("index map does not match the scores");
  std::vector<double> out(new_size, 0.0);
  for (size_t i = 0; i < scores.size(); ++i) {
    if (index_map[i] >= 0) out.at(static_cast<size_t>(index_map[i])) = scores[i];
  }
  return out;
}

DomainPruneReport domain_prune(ArDensityModel& model, std::span<const JoinColumn> original,
                               const JoinRelation& retained, const CepConfig& config) {
  const auto start = Clock::now();
  if (!retained.materialized()) throw SizeError("domain pruning needs a materialized retained join");
  if (retained.empty()) throw EmptyRelationError("retained join is empty");
  DomainPruneReport report;
  for (size_t c = 0; c < model.num_columns(); ++c) {
    const auto name = model.column(c).name;
    const auto values = retained.column_values(attribute_of(retained, name));
    ColumnDomainReport entry{name, 0, false};
    if (model.column(c).kind == ColumnKind::categorical) {
      const int before = model.column(c).categories;
      domain_prune_categorical(model, c, values);
      entry.deleted_values = static_cast<size_t>(before - model.column(c).categories);
    } else {
      const auto& col = model.column(c);
      const auto source = std::find_if(original.begin(), original.end(), [&](const JoinColumn& j) { return j.name == name; });
      if (source == original.end()) throw ValidationError("original join has no attribute " + name);
      const auto deleted = deleted_domain(source->spec, values);
      entry.deleted_values = deleted.size();
      const double gap = config.gap_fraction > 0.0 ? config.gap_fraction : 1.0 / col.bins;
      auto remap = build_numeric_remap(col.lower, col.upper, values, gap, deleted);
      if (!remap.identity()) {
        model.set_remap(c, std::move(remap));
        entry.remapped = true;
      }
    }
    report.columns.push_back(std::move(entry));
  }
  report.seconds = seconds_since(start);
  return report;
}

Predicate empty_predicate(const std::string& column) {
  return Predicate{column, PredicateOp::range, 1.0, 0.0};
}

Query clamp_query(const Query& query, const ArDensityModel& model) {
  Query out = query;
  for (auto& p : out.predicates) {
    const auto index = model.column_index(p.column);
    if (!index) continue;
    const auto& col = model.column(*index);
    if (col.kind == ColumnKind::categorical) {
      if (p.op == PredicateOp::equals) {
        const auto code = static_cast<long>(p.lo);
        if (code < 0 || code >= static_cast<long>(col.code_map.size()) || col.code_map[static_cast<size_t>(code)] < 0) {
          p = empty_predicate(p.column);
        }
      }
      continue;
    }
    if (!col.remap) continue;
    const auto& remap = *col.remap;
    if (p.op == PredicateOp::not_range) {
      std::optional<double> left;
      std::optional<double> right;
      if (p.lo > col.lower) left = remap.clamp_down(p.lo);
      if (p.hi < col.upper) right = remap.clamp_up(p.hi);
      if (left && right) {
        p = Predicate{p.column, PredicateOp::not_range, remap.apply(*left), remap.apply(*right)};
      } else if (left) {
        p = Predicate{p.column, PredicateOp::range, col.lower, remap.apply(*left)};
      } else if (right) {
        p = Predicate{p.column, PredicateOp::range, remap.apply(*right), col.upper};
      } else {
        p = empty_predicate(p.column);
      }
      continue;
    }
    const double lo = std::max(p.lo, col.lower);
    const double hi = std::min(p.op == PredicateOp::equals ? p.lo : p.hi, col.upper);
    const auto a = remap.clamp_up(lo);
    const auto b = remap.clamp_down(hi);
    if (lo > hi || !a || !b || *a > *b) {
      p = empty_predicate(p.column);
    } else {
      p = Predicate{p.column, PredicateOp::range, remap.apply(*a), remap.apply(*b)};
    }
  }
  return out;
}

TrainResult fine_tune(ArDensityModel& model, JoinSampler& retained, int epochs, uint64_t seed,
                      const TrainOptions& progress) {
  TrainOptions options = progress;
  options.epochs = epochs;
  return train(model, retained, seed, options);
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::stale:
      return "stale";
    case Method::retrain:
      return "retrain";
    case Method::finetune:
      return "finetune";
    case Method::cep:
      return "cep";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  if (text == "stale") return Method::stale;
  if (text == "retrain") return Method::retrain;
  if (text == "finetune") return Method::finetune;
  if (text == "cep") return Method::cep;
  throw ValidationError("unknown method '" + std::string(text) + "'");
}

MethodResult run_method(Method method, const ArDensityModel* original, const DatasetSplit& split,
                        const MethodOptions& options, uint64_t seed) {
  options.cep.validate();
  if (method != Method::retrain && original == nullptr) {
    throw ConfigError(std::string(to_string(method)) + " needs the original checkpoint");
  }
  if (method == Method::stale) return MethodResult{*original};

  const auto retained = join_or_walks(split.retained, options.cep.join_cap);
  if (retained.empty()) throw EmptyRelationError("retained join is empty");
  auto sampler = make_sampler(retained);
  const uint64_t train_seed = Rng::derive(seed, 1);

  MethodResult result;
  if (method == Method::retrain) {
    const int bins = options.model.numeric_bins;
    result.model = init_model(model_columns(join_columns(split.original), bins), options.model, Rng::derive(seed, 3));
  } else {
    result.model = *original;
  }

  const auto prune_start = Clock::now();
  const bool domain = method == Method::cep ? options.cep.enable_domain_prune : options.domain_prune;
  if (domain) result.domain = domain_prune(result.model, join_columns(split.original), retained, options.cep);
  if (method == Method::cep && options.cep.enable_sensitivity_prune) {
    result.sensitivity = distribution_sensitivity_pruning(result.model, split, options.cep, Rng::derive(seed, 2));
  }
  result.prune_seconds = seconds_since(prune_start);

  const auto tune_start = Clock::now();
  const int epochs = method == Method::retrain ? options.model.epochs : options.cep.finetune_epochs;
  result.loss_trace = fine_tune(result.model, *sampler, epochs, train_seed, options.progress).loss_trace;
  result.finetune_seconds = seconds_since(tune_start);
  return result;
}

}  // namespace cep
