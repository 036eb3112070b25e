#include "cep/sampler.hpp"

#include <numeric>

#include "cep/error.hpp"

namespace cep {

MaterializedSampler::MaterializedSampler(const JoinRelation& relation) : relation_(relation) {
  if (!relation_.materialized()) {
    throw ValidationError("MaterializedSampler needs a materialized join");
  }
  if (relation_.size() == 0) {
    throw EmptyRelationError("cannot sample from an empty join");
  }
}

void MaterializedSampler::gather(std::span<const size_t> rows, std::vector<double>& out) const {
  const size_t width = relation_.num_columns();
  out.resize(rows.size() * width);
  for (size_t i = 0; i < rows.size(); ++i) {
    relation_.tuple(rows[i], std::span<double>(out).subspan(i * width, width));
  }
}

size_t MaterializedSampler::next_batch(size_t batch, Rng& rng, std::vector<double>& out) {
  if (cursor_ >= permutation_.size()) {
    permutation_.resize(relation_.size());
    std::iota(permutation_.begin(), permutation_.end(), size_t{0});
    rng.shuffle(std::span<size_t>(permutation_));
    cursor_ = 0;
  }
  const size_t take = std::min(batch, permutation_.size() - cursor_);
  gather(std::span<const size_t>(permutation_).subspan(cursor_, take), out);
  cursor_ += take;
  return take;
}

size_t MaterializedSampler::sample(size_t batch, Rng& rng, std::vector<double>& out) {
  const auto rows = sample_without_replacement(relation_.size(), batch, rng);
  gather(rows, out);
  return rows.size();
}

RandomWalkSampler::RandomWalkSampler(const JoinRelation& relation, size_t max_failures)
    : relation_(relation), max_failures_(max_failures) {
  if (relation_.empty()) {
    throw EmptyRelationError("cannot sample from an empty join");
  }
}

size_t RandomWalkSampler::epoch_size() const { return static_cast<size_t>(relation_.cardinality()); }

size_t RandomWalkSampler::sample(size_t batch, Rng& rng, std::vector<double>& out) {
  const size_t width = relation_.num_columns();
  out.resize(batch * width);
  size_t failures = 0;
  for (size_t i = 0; i < batch;) {
    if (relation_.random_walk(rng, std::span<double>(out).subspan(i * width, width))) {
      ++i;
    } else if (++failures > max_failures_) {
      throw EmptyRelationError("random walks keep failing; the join is (nearly) empty");
    }
  }
  return batch;
}

TupleSampler::TupleSampler(size_t num_columns, std::vector<double> tuples)
    : width_(num_columns), tuples_(std::move(tuples)) {
  if (width_ == 0 || tuples_.empty() || tuples_.size() % width_ != 0) {
    throw EmptyRelationError("tuple sampler needs at least one complete tuple");
  }
}

void TupleSampler::gather(std::span<const size_t> rows, std::vector<double>& out) const {
  out.resize(rows.size() * width_);
  for (size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(tuples_.begin() + static_cast<long>(rows[i] * width_), width_, out.begin() + static_cast<long>(i * width_));
  }
}

size_t TupleSampler::next_batch(size_t batch, Rng& rng, std::vector<double>& out) {
  if (cursor_ >= permutation_.size()) {
    permutation_.resize(epoch_size());
    std::iota(permutation_.begin(), permutation_.end(), size_t{0});
    rng.shuffle(std::span<size_t>(permutation_));
    cursor_ = 0;
  }
  const size_t take = std::min(batch, permutation_.size() - cursor_);
  gather(std::span<const size_t>(permutation_).subspan(cursor_, take), out);
  cursor_ += take;
  return take;
}

size_t TupleSampler::sample(size_t batch, Rng& rng, std::vector<double>& out) {
  const auto rows = sample_without_replacement(epoch_size(), batch, rng);
  gather(rows, out);
  return rows.size();
}

std::unique_ptr<JoinSampler> make_sampler(const JoinRelation& relation) {
  if (relation.materialized()) {
    return std::make_unique<MaterializedSampler>(relation);
  }
  return std::make_unique<RandomWalkSampler>(relation);
}

std::vector<double> sample_join(const JoinRelation& relation, size_t batch, Rng& rng) {
  std::vector<double> out;
  make_sampler(relation)->sample(batch, rng, out);
  return out;
}

}  // namespace cep
