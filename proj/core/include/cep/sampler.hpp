#pragma once

#include <memory>
#include <vector>

#include "cep/join.hpp"
#include "cep/random.hpp"

namespace cep {

// Source of join tuples (row-major, one value per attribute column) for training and
// score accumulation.
class JoinSampler {
 public:
  virtual ~JoinSampler() = default;

  virtual size_t num_columns() const = 0;
  // Rows that make up one training epoch.
  virtual size_t epoch_size() const = 0;

  // Next chunk of the current epoch; a new shuffled epoch starts once the current one is
  // exhausted. Returns the number of rows written to `out`.
  virtual size_t next_batch(size_t batch, Rng& rng, std::vector<double>& out) = 0;

  // Independent batch with no duplicate rows within it (materialized sources).
  virtual size_t sample(size_t batch, Rng& rng, std::vector<double>& out) = 0;
};

class MaterializedSampler final : public JoinSampler {
 public:
  // Throws EmptyRelationError on an empty relation.
  explicit MaterializedSampler(const JoinRelation& relation);

  size_t num_columns() const override { return relation_.num_columns(); }
  size_t epoch_size() const override { return relation_.size(); }
  size_t next_batch(size_t batch, Rng& rng, std::vector<double>& out) override;
  size_t sample(size_t batch, Rng& rng, std::vector<double>& out) override;

 private:
  void gather(std::span<const size_t> rows, std::vector<double>& out) const;

  const JoinRelation& relation_;
  std::vector<size_t> permutation_;
  size_t cursor_ = 0;
};

// Unweighted random walks over a non-materialized join.
class RandomWalkSampler final : public JoinSampler {
 public:
  explicit RandomWalkSampler(const JoinRelation& relation, size_t max_failures = 1'000'000);

  size_t num_columns() const override { return relation_.num_columns(); }
  size_t epoch_size() const override;
  size_t next_batch(size_t batch, Rng& rng, std::vector<double>& out) override { return sample(batch, rng, out); }
  size_t sample(size_t batch, Rng& rng, std::vector<double>& out) override;

 private:
  const JoinRelation& relation_;
  size_t max_failures_;
};

// Fixed list of tuples; used for toy data that does not come from a join.
class TupleSampler final : public JoinSampler {
 public:
  TupleSampler(size_t num_columns, std::vector<double> tuples);

  size_t num_columns() const override { return width_; }
  size_t epoch_size() const override { return tuples_.size() / width_; }
  size_t next_batch(size_t batch, Rng& rng, std::vector<double>& out) override;
  size_t sample(size_t batch, Rng& rng, std::vector<double>& out) override;

 private:
  void gather(std::span<const size_t> rows, std::vector<double>& out) const;

  size_t width_;
  std::vector<double> tuples_;
  std::vector<size_t> permutation_;
  size_t cursor_ = 0;
};

// Materialized relations get a MaterializedSampler, others a RandomWalkSampler.
std::unique_ptr<JoinSampler> make_sampler(const JoinRelation& relation);

// One batch of min(batch, |rel|) distinct rows of a materialized relation, or `batch`
// random-walk tuples otherwise. Throws EmptyRelationError on an empty relation.
std::vector<double> sample_join(const JoinRelation& relation, size_t batch, Rng& rng);

}  // namespace cep
