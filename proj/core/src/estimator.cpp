#include "cep/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cep/error.hpp"

namespace cep {

namespace {

// Overlap-weighted bins of [lo, hi] (already in the binned space).
void add_interval(std::vector<double>& weights, double lo, double hi, double lower, double upper) {
  const auto bins = static_cast<int>(weights.size());
  const double width = (upper - lower) / bins;
  if (!(width > 0.0)) {
    if (lo <= lower && hi >= lower) weights[0] = 1.0;
    return;
  }
  if (lo == hi) {
    weights[static_cast<size_t>(std::clamp(static_cast<int>((lo - lower) / width), 0, bins - 1))] = 1.0;
    return;
  }
  for (int b = 0; b < bins; ++b) {
    const double b_lo = lower + b * width;
    const double b_hi = b + 1 == bins ? upper : lower + (b + 1) * width;
    const double overlap = std::min(hi, b_hi) - std::max(lo, b_lo);
    if (overlap > 0.0) weights[static_cast<size_t>(b)] += std::min(1.0, overlap / (b_hi - b_lo));
  }
}

int draw(std::span<const double> probs, double total, Rng& rng) {
  const double u = rng.uniform() * total;
  double acc = 0.0;
  int last = -1;
  for (size_t v = 0; v < probs.size(); ++v) {
    if (probs[v] <= 0.0) continue;
    acc += probs[v];
    last = static_cast<int>(v);
    if (u < acc) return last;
  }
  return last;
}

}  // namespace

std::vector<double> predicate_weights(const ModelColumn& column, const Predicate& predicate) {
  std::vector<double> weights(static_cast<size_t>(column.domain_size()), 0.0);
  if (column.kind == ColumnKind::categorical) {
    for (size_t code = 0; code < column.code_map.size(); ++code) {
      const int mapped = column.code_map[code];
      if (mapped >= 0 && predicate_matches(predicate, static_cast<double>(code))) {
        weights[static_cast<size_t>(mapped)] = 1.0;
      }
    }
    return weights;
  }
  ColumnSpec spec;
  spec.name = column.name;
  spec.kind = ColumnKind::numerical;
  spec.lower = column.lower;
  spec.upper = column.upper;
  for (const auto& interval : predicate_intervals(predicate, spec)) {
    add_interval(weights, interval.lo, interval.hi, column.lower, column.upper);
  }
  for (auto& w : weights) w = std::min(w, 1.0);
  return weights;
}

ColumnConstraints constraints_for(const ArDensityModel& model, const Query& query) {
  ColumnConstraints out(model.num_columns());
  for (const auto& predicate : query.predicates) {
    const auto index = model.column_index(predicate.column);
    if (!index) throw ValidationError("predicate on unknown column " + predicate.column);
    auto weights = predicate_weights(model.column(*index), predicate);
    auto& slot = out[*index];
    if (slot.empty()) {
      slot = std::move(weights);
    } else {
      for (size_t v = 0; v < slot.size(); ++v) slot[v] *= weights[v];
    }
  }
  return out;
}

Estimate estimate_selectivity_detailed(const ArDensityModel& model, const Query& query, int num_samples, Rng& rng) {
  if (num_samples < 1) throw ValidationError("num_samples must be positive");
  const auto constraints = constraints_for(model, query);
  const auto& order = model.order();
  const auto n = model.num_columns();

  int last = -1;
  for (size_t p = 0; p < n; ++p) {
    const auto& w = constraints[static_cast<size_t>(order[p])];
    if (w.empty()) continue;
    last = static_cast<int>(p);
    if (std::all_of(w.begin(), w.end(), [](double x) { return x == 0.0; })) return {};
  }
  if (last < 0) return {1.0, 0.0};

  const auto samples = static_cast<size_t>(num_samples);
  std::vector<double> weight(samples, 1.0);
  std::vector<int> codes(samples * n, -1);
  std::vector<size_t> alive(samples);
  std::iota(alive.begin(), alive.end(), size_t{0});
  double factor = 1.0;
  std::vector<double> probs;
  EncodedBatch batch;
  batch.cols = n;

  for (int p = 0; p <= last && !alive.empty(); ++p) {
    const auto column = static_cast<size_t>(order[static_cast<size_t>(p)]);
    const auto& w = constraints[column];
    const auto dom = static_cast<size_t>(model.column(column).domain_size());

    if (p == 0) {
      batch.rows = 1;
      batch.codes.assign(n, -1);
      conditional_probabilities(model, batch, 0, probs);
      double mass = 1.0;
      if (!w.empty()) {
        mass = 0.0;
        for (size_t v = 0; v < dom; ++v) {
          probs[v] *= w[v];
          mass += probs[v];
        }
        factor = mass;
        if (!(mass > 0.0)) return {};
      }
      if (last == 0) break;
      for (const auto s : alive) codes[s * n + column] = draw(probs, mass, rng);
      continue;
    }

    batch.rows = alive.size();
    batch.codes.resize(alive.size() * n);
    for (size_t i = 0; i < alive.size(); ++i) {
      std::copy_n(codes.begin() + static_cast<long>(alive[i] * n), n, batch.codes.begin() + static_cast<long>(i * n));
    }
    conditional_probabilities(model, batch, p, probs);
    std::vector<size_t> still;
    still.reserve(alive.size());
    for (size_t i = 0; i < alive.size(); ++i) {
      const auto s = alive[i];
      const std::span<double> row(probs.data() + i * dom, dom);
      double mass = 1.0;
      if (!w.empty()) {
        mass = 0.0;
        for (size_t v = 0; v < dom; ++v) {
          row[v] *= w[v];
          mass += row[v];
        }
        weight[s] *= mass;
      }
      if (!(mass > 0.0)) {
        weight[s] = 0.0;
        continue;
      }
      if (p < last) codes[s * n + column] = draw(row, mass, rng);
      still.push_back(s);
    }
    alive = std::move(still);
  }

  const double mean = std::accumulate(weight.begin(), weight.end(), 0.0) / static_cast<double>(samples);
  double var = 0.0;
  for (const double x : weight) var += (x - mean) * (x - mean);
  var = samples > 1 ? var / static_cast<double>(samples - 1) : 0.0;
  return {factor * mean, factor * std::sqrt(var / static_cast<double>(samples))};
}

double estimate_selectivity(const ArDensityModel& model, const Query& query, int num_samples, Rng& rng) {
  return estimate_selectivity_detailed(model, query, num_samples, rng).value;
}

double estimate_cardinality(const ArDensityModel& model, const Query& query, double join_size, int num_samples,
                            Rng& rng) {
  return estimate_selectivity(model, query, num_samples, rng) * join_size;
}

double enumerate_selectivity(const ArDensityModel& model, const Query& query, size_t limit) {
  const auto constraints = constraints_for(model, query);
  const auto n = model.num_columns();
  size_t product = 1;
  for (size_t c = 0; c < n; ++c) {
    product *= static_cast<size_t>(model.column(c).domain_size());
    if (product > limit) throw ValidationError("domain product too large to enumerate");
  }
  std::vector<int> codes(product * n);
  for (size_t t = 0; t < product; ++t) {
    size_t rest = t;
    for (size_t c = 0; c < n; ++c) {
      const auto dom = static_cast<size_t>(model.column(c).domain_size());
      codes[t * n + c] = static_cast<int>(rest % dom);
      rest /= dom;
    }
  }
  const EncodedBatch batch{product, n, std::move(codes)};
  const auto terms = nll_terms(model, batch);
  double total = 0.0;
  for (size_t t = 0; t < product; ++t) {
    double weight = 1.0;
    double nll = 0.0;
    for (size_t c = 0; c < n; ++c) {
      nll += terms[t * n + c];
      if (!constraints[c].empty()) weight *= constraints[c][static_cast<size_t>(batch.at(t, c))];
    }
    if (weight > 0.0) total += weight * std::exp(-nll);
  }
  return total;
}

}  // namespace cep
