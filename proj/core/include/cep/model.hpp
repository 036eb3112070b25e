#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cep/join.hpp"
#include "cep/random.hpp"
#include "cep/remap.hpp"

namespace cep {

struct ModelConfig {
  int embedding_dim = 16;
  int hidden_dim = 128;
  int residual_blocks = 4;
  double dropout = 0.1;
  int numeric_bins = 64;
  std::vector<int> column_order;  // position -> column; empty means schema order
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 128;
  int epochs = 20;

  // Throws ValidationError.
  void validate(size_t num_columns) const;
};

// Encoding of one join attribute into the model's discrete domain.
struct ModelColumn {
  std::string name;  // "table.column"
  ColumnKind kind = ColumnKind::categorical;

  // Categorical: original code -> model code, -1 once pruned.
  std::vector<int> code_map;
  int categories = 0;

  // Numerical: equal-width bins over [lower, upper] of the (possibly remapped) value.
  double lower = 0.0;
  double upper = 0.0;
  int bins = 0;
  std::optional<NumericRemap> remap;

  static ModelColumn from_spec(const std::string& name, const ColumnSpec& spec, int bins);

  int domain_size() const { return kind == ColumnKind::categorical ? categories : bins; }

  // Original value -> model code. Throws DomainError for pruned categories and GapError for
  // numerical values inside a deleted gap.
  int encode(double value) const;
  // Like encode, but pruned categories give -1 and gap values clamp to the nearest retained
  // boundary.
  int encode_lenient(double value) const;
};

enum class TensorKind : uint8_t { embedding, weight, bias };

struct TensorInfo {
  std::string name;
  TensorKind kind = TensorKind::weight;
  int rows = 0;
  int cols = 0;
  size_t offset = 0;  // column-major block inside the flat parameter vector
  int column = -1;    // owning model column for embeddings and heads

  size_t size() const { return static_cast<size_t>(rows) * static_cast<size_t>(cols); }
};

// Row-major batch of model codes, one row per tuple, one entry per model column. Code -1
// marks a cell with no representation: its input embedding is zero and its conditional
// term is skipped.
struct EncodedBatch {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<int> codes;

  int at(size_t r, size_t c) const { return codes[r * cols + c]; }
};

// Autoregressive density model over join tuples: per-column embeddings feed a masked
// residual network (MADE degrees) whose per-column softmax heads give p(A_i | A_<i) in
// column_order. Weights live in one flat vector; `structure_mask` marks weights allowed by
// the autoregressive masking and `prune_mask` marks weights not pruned. Parameters where
// either mask is zero are exactly zero.
class ArDensityModel {
 public:
  ArDensityModel() = default;
  // Zero parameters and an all-ones prune mask.
  ArDensityModel(std::vector<ModelColumn> columns, ModelConfig config);

  const ModelConfig& config() const { return config_; }
  std::span<const ModelColumn> columns() const { return columns_; }
  const ModelColumn& column(size_t index) const { return columns_.at(index); }
  size_t num_columns() const { return columns_.size(); }
  std::optional<size_t> column_index(std::string_view name) const;

  const std::vector<int>& order() const { return order_; }
  int position_of(size_t column) const { return position_[column]; }
  const std::vector<int>& hidden_degrees() const { return degrees_; }

  std::span<const double> parameters() const { return params_; }
  std::span<double> parameters() { return params_; }
  std::span<const uint8_t> prune_mask() const { return prune_mask_; }
  std::span<const uint8_t> structure_mask() const { return structure_mask_; }
  bool active(size_t index) const { return structure_mask_[index] && prune_mask_[index]; }
  size_t num_parameters() const { return params_.size(); }

  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  const TensorInfo& embedding(size_t column) const { return tensors_[embedding_[column]]; }
  const TensorInfo& input_weight() const { return tensors_[input_weight_]; }
  const TensorInfo& input_bias() const { return tensors_[input_weight_ + 1]; }
  // Residual block l: W1, b1, W2, b2.
  const TensorInfo& block_tensor(size_t block, size_t part) const { return tensors_[input_weight_ + 2 + 4 * block + part]; }
  const TensorInfo& head_weight(size_t column) const { return tensors_[head_[column]]; }
  const TensorInfo& head_bias(size_t column) const { return tensors_[head_[column] + 1]; }

  // Flat indices of structurally present, unpruned dense weights.
  std::vector<size_t> eligible_weights() const;
  size_t pruned_count() const;

  // Zeroes and masks the given flat indices.
  void prune(std::span<const size_t> indices);
  // Restores the zero invariant after an update.
  void apply_masks();

  // Keeps only the listed model codes of a categorical column (ascending). Returns the old
  // -> new flat index map (-1 for dropped parameters).
  std::vector<long> drop_categories(size_t column, std::span<const int> keep_codes);
  void set_remap(size_t column, std::optional<NumericRemap> remap);

  // FNV-1a over parameters and masks.
  uint64_t checksum() const;

  // Restores state from a checkpoint. Sizes must match the layout.
  void restore(std::vector<double> parameters, std::vector<uint8_t> prune_mask);

 private:
  void build_layout();

  ModelConfig config_;
  std::vector<ModelColumn> columns_;
  std::vector<int> order_;
  std::vector<int> position_;
  std::vector<int> degrees_;
  std::vector<TensorInfo> tensors_;
  std::vector<size_t> embedding_;
  size_t input_weight_ = 0;
  std::vector<size_t> head_;
  std::vector<double> params_;
  std::vector<uint8_t> prune_mask_;
  std::vector<uint8_t> structure_mask_;
};

// Model columns for every attribute of a join.
std::vector<ModelColumn> model_columns(std::span<const JoinColumn> columns, int bins);

// Deterministic initialization; throws ValidationError on an empty domain.
ArDensityModel init_model(std::vector<ModelColumn> columns, const ModelConfig& config, uint64_t seed);

// Throws DomainError/GapError unless `lenient`.
EncodedBatch encode_batch(const ArDensityModel& model, std::span<const double> tuples, size_t rows,
                          bool lenient = false);

// -log p(A_i | A_<i) per row and column (row-major), dropout off. Masked cells give 0.
std::vector<double> nll_terms(const ArDensityModel& model, const EncodedBatch& batch);
std::vector<double> nll_terms(const ArDensityModel& model, std::span<const double> tuple);

// Batch mean of sum_i coefficients[i] * nll_i and its exact gradient (same layout as the
// parameters, zero at masked positions). Dropout is applied when `dropout_rng` is set.
double loss_and_gradient(const ArDensityModel& model, const EncodedBatch& batch, std::span<const double> coefficients,
                         std::span<double> gradient, Rng* dropout_rng = nullptr);

// Gradient of the per-conditional weighted NLL with weights S (all ones for plain NLL).
// Throws ValidationError on negative or mis-sized weights.
std::vector<double> grad_nll(const ArDensityModel& model, const EncodedBatch& batch, std::span<const double> weights);

// p(column at `position` | earlier columns) for every row: rows x domain, row-major.
// Only columns at earlier positions are read from `batch`.
void conditional_probabilities(const ArDensityModel& model, const EncodedBatch& batch, int position,
                               std::vector<double>& out);

// Raw logits of every head for one batch (per column, rows x domain row-major).
std::vector<std::vector<double>> all_logits(const ArDensityModel& model, const EncodedBatch& batch);

}  // namespace cep
