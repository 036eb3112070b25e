#include "cep/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cep/error.hpp"
#include "cep/pmf.hpp"

namespace cep {

namespace {

using Matrix = Eigen::MatrixXd;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

ConstMatrixMap view(std::span<const double> params, const TensorInfo& t) {
  return ConstMatrixMap(params.data() + t.offset, t.rows, t.cols);
}

MatrixMap view(std::span<double> params, const TensorInfo& t) {
  return MatrixMap(params.data() + t.offset, t.rows, t.cols);
}

ConstVectorMap bias(std::span<const double> params, const TensorInfo& t) {
  return ConstVectorMap(params.data() + t.offset, t.rows);
}

uint64_t fnv1a(uint64_t hash, const void* data, size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

struct ForwardCache {
  Matrix input;                // (n*E) x B
  std::vector<Matrix> hidden;  // h_0 .. h_L, H x B
  std::vector<Matrix> inner;   // pre-activation of W1, per block
  std::vector<Matrix> dropped; // post-dropout activation fed to W2, per block
  std::vector<Matrix> keep;    // dropout keep scale, per block (empty when off)
  Matrix top;                  // relu(h_L)
};

void forward(const ArDensityModel& model, const EncodedBatch& batch, Rng* dropout_rng, ForwardCache& cache) {
  const auto params = model.parameters();
  const auto& config = model.config();
  const int emb = config.embedding_dim;
  const auto n = model.num_columns();
  const auto rows = static_cast<Eigen::Index>(batch.rows);

  cache.input.setZero(static_cast<Eigen::Index>(n) * emb, rows);
  for (size_t c = 0; c < n; ++c) {
    const auto table = view(params, model.embedding(c));
    const auto base = static_cast<Eigen::Index>(model.position_of(c)) * emb;
    for (Eigen::Index r = 0; r < rows; ++r) {
      const int code = batch.at(static_cast<size_t>(r), c);
      if (code >= 0) cache.input.block(base, r, emb, 1) = table.col(code);
    }
  }

  const auto blocks = static_cast<size_t>(config.residual_blocks);
  cache.hidden.resize(blocks + 1);
  cache.inner.resize(blocks);
  cache.dropped.resize(blocks);
  cache.keep.resize(blocks);

  cache.hidden[0] = view(params, model.input_weight()) * cache.input;
  cache.hidden[0].colwise() += bias(params, model.input_bias());

  const double p = config.dropout;
  for (size_t l = 0; l < blocks; ++l) {
    const auto& w1 = model.block_tensor(l, 0);
    const auto& b1 = model.block_tensor(l, 1);
    const auto& w2 = model.block_tensor(l, 2);
    const auto& b2 = model.block_tensor(l, 3);
    cache.inner[l] = view(params, w1) * cache.hidden[l].cwiseMax(0.0);
    cache.inner[l].colwise() += bias(params, b1);
    cache.dropped[l] = cache.inner[l].cwiseMax(0.0);
    if (dropout_rng != nullptr && p > 0.0) {
      auto& keep = cache.keep[l];
      keep.resize(cache.dropped[l].rows(), cache.dropped[l].cols());
      const double scale = 1.0 / (1.0 - p);
      for (Eigen::Index j = 0; j < keep.cols(); ++j) {
        for (Eigen::Index i = 0; i < keep.rows(); ++i) keep(i, j) = dropout_rng->uniform() < p ? 0.0 : scale;
      }
      cache.dropped[l].array() *= keep.array();
    } else {
      cache.keep[l].resize(0, 0);
    }
    cache.hidden[l + 1] = cache.hidden[l] + view(params, w2) * cache.dropped[l];
    cache.hidden[l + 1].colwise() += bias(params, b2);
  }
  cache.top = cache.hidden[blocks].cwiseMax(0.0);
}

Matrix head_logits(const ArDensityModel& model, const ForwardCache& cache, size_t column) {
  const auto params = model.parameters();
  Matrix logits = view(params, model.head_weight(column)) * cache.top;
  logits.colwise() += bias(params, model.head_bias(column));
  return logits;
}

// Column-wise softmax in place.
void softmax_columns(Matrix& logits) {
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    auto col = logits.col(j);
    const double peak = col.maxCoeff();
    col = (col.array() - peak).exp();
    col /= col.sum();
  }
}

}  // namespace

void ModelConfig::validate(size_t num_columns) const {
  if (embedding_dim < 1 || hidden_dim < 1 || residual_blocks < 0 || numeric_bins < 1) {
    throw ValidationError("model dimensions must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout must lie in [0, 1)");
  if (batch_size < 1) throw ValidationError("batch size must be positive");
  if (epochs < 0) throw ValidationError("epochs must be non-negative");
  if (!(learning_rate > 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) ||
      !(epsilon > 0.0)) {
    throw ValidationError("invalid optimizer settings");
  }
  if (!column_order.empty()) {
    if (column_order.size() != num_columns) throw ValidationError("column order must cover every column");
    std::vector<int> sorted = column_order;
    std::sort(sorted.begin(), sorted.end());
    for (size_t i = 0; i < sorted.size(); ++i) {
      if (sorted[i] != static_cast<int>(i)) throw ValidationError("column order is not a permutation");
    }
  }
}

ModelColumn ModelColumn::from_spec(const std::string& name, const ColumnSpec& spec, int bins) {
  ModelColumn column;
  column.name = name;
  column.kind = spec.kind;
  if (spec.kind == ColumnKind::categorical) {
    column.categories = static_cast<int>(spec.domain_size());
    column.code_map.resize(static_cast<size_t>(column.categories));
    std::iota(column.code_map.begin(), column.code_map.end(), 0);
  } else if (spec.kind == ColumnKind::numerical) {
    column.lower = spec.lower;
    column.upper = spec.upper;
    column.bins = bins;
  } else {
    throw ValidationError("key column " + name + " cannot be modelled");
  }
  return column;
}

int ModelColumn::encode(double value) const {
  if (kind == ColumnKind::categorical) {
    const auto code = static_cast<long>(value);
    if (code < 0 || code >= static_cast<long>(code_map.size()) || code_map[static_cast<size_t>(code)] < 0) {
      throw DomainError("value " + format_double(value) + " outside the current domain of " + name);
    }
    return code_map[static_cast<size_t>(code)];
  }
  if (value < lower || value > upper) {
    throw DomainError("value " + format_double(value) + " outside the range of " + name);
  }
  const double x = remap ? remap->apply(value) : value;
  return bin_of(x, lower, upper, bins);
}

int ModelColumn::encode_lenient(double value) const {
  if (kind == ColumnKind::categorical) {
    const auto code = static_cast<long>(value);
    if (code < 0 || code >= static_cast<long>(code_map.size())) return -1;
    return code_map[static_cast<size_t>(code)];
  }
  double v = std::clamp(value, lower, upper);
  if (remap && !remap->subrange_of(v)) v = remap->clamp_nearest(v);
  const double x = remap ? remap->apply(v) : v;
  return bin_of(x, lower, upper, bins);
}

ArDensityModel::ArDensityModel(std::vector<ModelColumn> columns, ModelConfig config)
    : config_(std::move(config)), columns_(std::move(columns)) {
  if (columns_.empty()) throw ValidationError("model needs at least one column");
  config_.validate(columns_.size());
  for (const auto& column : columns_) {
    if (column.domain_size() < 1) throw ValidationError("column " + column.name + " has an empty domain");
  }
  const auto n = columns_.size();
  if (config_.column_order.empty()) {
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0);
  } else {
    order_ = config_.column_order;
  }
  position_.assign(n, 0);
  for (size_t p = 0; p < n; ++p) position_[static_cast<size_t>(order_[p])] = static_cast<int>(p);

  const int cycle = std::max<int>(1, static_cast<int>(n) - 1);
  degrees_.resize(static_cast<size_t>(config_.hidden_dim));
  for (int k = 0; k < config_.hidden_dim; ++k) degrees_[static_cast<size_t>(k)] = k % cycle;

  build_layout();
  params_.assign(structure_mask_.size(), 0.0);
  prune_mask_.assign(structure_mask_.size(), 1);
}

void ArDensityModel::build_layout() {
  tensors_.clear();
  embedding_.clear();
  head_.clear();
  size_t offset = 0;
  auto add = [&](std::string name, TensorKind kind, int rows, int cols, int column) {
    tensors_.push_back(TensorInfo{std::move(name), kind, rows, cols, offset, column});
    offset += tensors_.back().size();
    return tensors_.size() - 1;
  };

  const int emb = config_.embedding_dim;
  const int hidden = config_.hidden_dim;
  const auto n = static_cast<int>(columns_.size());
  for (int c = 0; c < n; ++c) {
    embedding_.push_back(add("embedding." + columns_[c].name, TensorKind::embedding, emb, columns_[c].domain_size(), c));
  }
  input_weight_ = add("input.weight", TensorKind::weight, hidden, n * emb, -1);
  add("input.bias", TensorKind::bias, hidden, 1, -1);
  for (int l = 0; l < config_.residual_blocks; ++l) {
    const auto prefix = "block" + std::to_string(l);
    add(prefix + ".w1", TensorKind::weight, hidden, hidden, -1);
    add(prefix + ".b1", TensorKind::bias, hidden, 1, -1);
    add(prefix + ".w2", TensorKind::weight, hidden, hidden, -1);
    add(prefix + ".b2", TensorKind::bias, hidden, 1, -1);
  }
  for (int c = 0; c < n; ++c) {
    head_.push_back(add("head." + columns_[c].name, TensorKind::weight, columns_[c].domain_size(), hidden, c));
    add("head_bias." + columns_[c].name, TensorKind::bias, columns_[c].domain_size(), 1, c);
  }

  structure_mask_.assign(offset, 1);
  auto mask_tensor = [&](const TensorInfo& t, auto allowed) {
    for (int j = 0; j < t.cols; ++j) {
      for (int i = 0; i < t.rows; ++i) {
        structure_mask_[t.offset + static_cast<size_t>(j) * t.rows + i] = allowed(i, j) ? 1 : 0;
      }
    }
  };
  mask_tensor(input_weight(), [&](int k, int j) { return degrees_[k] >= j / emb; });
  for (size_t l = 0; l < static_cast<size_t>(config_.residual_blocks); ++l) {
    auto same_or_higher = [&](int out, int in) { return degrees_[out] >= degrees_[in]; };
    mask_tensor(block_tensor(l, 0), same_or_higher);
    mask_tensor(block_tensor(l, 2), same_or_higher);
  }
  for (size_t c = 0; c < columns_.size(); ++c) {
    const int p = position_[c];
    mask_tensor(head_weight(c), [&](int, int k) { return p > degrees_[k]; });
  }
}

std::optional<size_t> ArDensityModel::column_index(std::string_view name) const {
  for (size_t c = 0; c < columns_.size(); ++c) {
    if (columns_[c].name == name) return c;
  }
  return std::nullopt;
}

std::vector<size_t> ArDensityModel::eligible_weights() const {
  std::vector<size_t> out;
  for (const auto& t : tensors_) {
    if (t.kind != TensorKind::weight) continue;
    for (size_t i = t.offset; i < t.offset + t.size(); ++i) {
      if (active(i)) out.push_back(i);
    }
  }
  return out;
}

size_t ArDensityModel::pruned_count() const {
  return static_cast<size_t>(std::count(prune_mask_.begin(), prune_mask_.end(), uint8_t{0}));
}

void ArDensityModel::prune(std::span<const size_t> indices) {
  for (const auto i : indices) {
    prune_mask_.at(i) = 0;
    params_[i] = 0.0;
  }
}

void ArDensityModel::apply_masks() {
  for (size_t i = 0; i < params_.size(); ++i) {
    if (!active(i)) params_[i] = 0.0;
  }
}

std::vector<long> ArDensityModel::drop_categories(size_t column, std::span<const int> keep_codes) {
  auto& col = columns_.at(column);
  if (col.kind != ColumnKind::categorical) throw ValidationError(col.name + " is not categorical");
  if (keep_codes.empty()) throw ValidationError("cannot drop every category of " + col.name);
  std::vector<int> new_code(static_cast<size_t>(col.categories), -1);
  for (size_t i = 0; i < keep_codes.size(); ++i) {
    const int code = keep_codes[i];
    if (code < 0 || code >= col.categories || (i > 0 && code <= keep_codes[i - 1])) {
      throw ValidationError("kept codes must be ascending and inside the domain of " + col.name);
    }
    new_code[static_cast<size_t>(code)] = static_cast<int>(i);
  }

  const auto old_tensors = tensors_;
  const auto old_params = std::move(params_);
  const auto old_prune = std::move(prune_mask_);
  const auto old_size = old_params.size();

  for (auto& code : col.code_map) {
    if (code >= 0) code = new_code[static_cast<size_t>(code)];
  }
  col.categories = static_cast<int>(keep_codes.size());
  build_layout();

  std::vector<long> index_map(old_size, -1);
  params_.assign(structure_mask_.size(), 0.0);
  prune_mask_.assign(structure_mask_.size(), 1);
  for (size_t t = 0; t < old_tensors.size(); ++t) {
    const auto& from = old_tensors[t];
    const auto& to = tensors_[t];
    const bool owned = from.column == static_cast<int>(column);
    for (int j = 0; j < from.cols; ++j) {
      int nj = j;
      if (owned && from.kind == TensorKind::embedding) nj = new_code[static_cast<size_t>(j)];
      if (nj < 0) continue;
      for (int i = 0; i < from.rows; ++i) {
        int ni = i;
        if (owned && from.kind != TensorKind::embedding) ni = new_code[static_cast<size_t>(i)];
        if (ni < 0) continue;
        const size_t src = from.offset + static_cast<size_t>(j) * from.rows + i;
        const size_t dst = to.offset + static_cast<size_t>(nj) * to.rows + ni;
        index_map[src] = static_cast<long>(dst);
        params_[dst] = old_params[src];
        prune_mask_[dst] = old_prune[src];
      }
    }
  }
  apply_masks();
  return index_map;
}

void ArDensityModel::set_remap(size_t column, std::optional<NumericRemap> remap) {
  auto& col = columns_.at(column);
  if (col.kind != ColumnKind::numerical) throw ValidationError(col.name + " is not numerical");
  if (remap) remap->validate();
  col.remap = std::move(remap);
}

uint64_t ArDensityModel::checksum() const {
  uint64_t hash = 0xcbf29ce484222325ULL;
  hash = fnv1a(hash, params_.data(), params_.size() * sizeof(double));
  hash = fnv1a(hash, prune_mask_.data(), prune_mask_.size());
  return hash;
}

void ArDensityModel::restore(std::vector<double> parameters, std::vector<uint8_t> prune_mask) {
  if (parameters.size() != structure_mask_.size() || prune_mask.size() != structure_mask_.size()) {
    throw FormatError("parameter count does not match the model layout");
  }
  params_ = std::move(parameters);
  prune_mask_ = std::move(prune_mask);
  for (size_t i = 0; i < params_.size(); ++i) {
    if (!active(i) && params_[i] != 0.0) throw FormatError("nonzero parameter at a masked position");
  }
}

std::vector<ModelColumn> model_columns(std::span<const JoinColumn> columns, int bins) {
  std::vector<ModelColumn> out;
  out.reserve(columns.size());
  for (const auto& column : columns) out.push_back(ModelColumn::from_spec(column.name, column.spec, bins));
  return out;
}

ArDensityModel init_model(std::vector<ModelColumn> columns, const ModelConfig& config, uint64_t seed) {
  ArDensityModel model(std::move(columns), config);
  Rng rng(seed);
  auto params = model.parameters();
  for (const auto& t : model.tensors()) {
    if (t.kind == TensorKind::embedding) {
      for (size_t i = t.offset; i < t.offset + t.size(); ++i) params[i] = rng.normal();
      continue;
    }
    // Bias fan-in is the width of the weight it accompanies.
    const int fan_in = t.kind == TensorKind::weight ? t.cols : config.hidden_dim;
    const int effective = t.name == "input.bias" ? static_cast<int>(model.num_columns()) * config.embedding_dim : fan_in;
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(1, effective)));
    for (size_t i = t.offset; i < t.offset + t.size(); ++i) params[i] = rng.uniform(-bound, bound);
  }
  model.apply_masks();
  return model;
}

EncodedBatch encode_batch(const ArDensityModel& model, std::span<const double> tuples, size_t rows, bool lenient) {
  const auto cols = model.num_columns();
  if (tuples.size() != rows * cols) throw ValidationError("tuple width does not match the model");
  EncodedBatch batch{rows, cols, std::vector<int>(rows * cols)};
  for (size_t r = 0; r < rows; ++r) {
    for (size_t c = 0; c < cols; ++c) {
      const double v = tuples[r * cols + c];
      batch.codes[r * cols + c] = lenient ? model.column(c).encode_lenient(v) : model.column(c).encode(v);
    }
  }
  return batch;
}

std::vector<double> nll_terms(const ArDensityModel& model, const EncodedBatch& batch) {
  ForwardCache cache;
  forward(model, batch, nullptr, cache);
  std::vector<double> out(batch.rows * batch.cols, 0.0);
  for (size_t c = 0; c < batch.cols; ++c) {
    const Matrix logits = head_logits(model, cache, c);
    for (size_t r = 0; r < batch.rows; ++r) {
      const int code = batch.at(r, c);
      if (code < 0) continue;
      if (code >= logits.rows()) throw DomainError("code outside the current domain of " + model.column(c).name);
      const auto col = logits.col(static_cast<Eigen::Index>(r));
      const double peak = col.maxCoeff();
      const double lse = peak + std::log((col.array() - peak).exp().sum());
      out[r * batch.cols + c] = lse - col(code);
    }
  }
  return out;
}

std::vector<double> nll_terms(const ArDensityModel& model, std::span<const double> tuple) {
  return nll_terms(model, encode_batch(model, tuple, 1));
}

double loss_and_gradient(const ArDensityModel& model, const EncodedBatch& batch, std::span<const double> coefficients,
                         std::span<double> gradient, Rng* dropout_rng) {
  const auto n = model.num_columns();
  if (coefficients.size() != n) throw ValidationError("one coefficient per column is required");
  if (gradient.size() != model.num_parameters()) throw ValidationError("gradient size does not match the model");
  if (batch.cols != n) throw ValidationError("batch width does not match the model");
  std::fill(gradient.begin(), gradient.end(), 0.0);
  if (batch.rows == 0) return 0.0;

  const auto params = model.parameters();
  const auto& config = model.config();
  const auto rows = static_cast<Eigen::Index>(batch.rows);
  const double inv_rows = 1.0 / static_cast<double>(batch.rows);

  ForwardCache cache;
  forward(model, batch, dropout_rng, cache);

  double loss = 0.0;
  Matrix d_top = Matrix::Zero(config.hidden_dim, rows);
  for (size_t c = 0; c < n; ++c) {
    Matrix probs = head_logits(model, cache, c);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const int code = batch.at(static_cast<size_t>(r), c);
      auto col = probs.col(r);
      if (code < 0 || coefficients[c] == 0.0) {
        col.setZero();
        continue;
      }
      if (code >= probs.rows()) throw DomainError("code outside the current domain of " + model.column(c).name);
      const double peak = col.maxCoeff();
      col = (col.array() - peak).exp();
      const double total = col.sum();
      loss += coefficients[c] * (std::log(total) - std::log(col(code)));
      col /= total;
      col(code) -= 1.0;
      col *= coefficients[c] * inv_rows;
    }
    const auto& hw = model.head_weight(c);
    view(gradient, hw) += probs * cache.top.transpose();
    view(gradient, model.head_bias(c)) += probs.rowwise().sum();
    d_top.noalias() += view(params, hw).transpose() * probs;
  }

  const auto blocks = static_cast<size_t>(config.residual_blocks);
  Matrix d_hidden = d_top.cwiseProduct((cache.hidden[blocks].array() > 0.0).cast<double>().matrix());
  for (size_t l = blocks; l-- > 0;) {
    const auto& w1 = model.block_tensor(l, 0);
    const auto& w2 = model.block_tensor(l, 2);
    view(gradient, w2) += d_hidden * cache.dropped[l].transpose();
    view(gradient, model.block_tensor(l, 3)) += d_hidden.rowwise().sum();
    Matrix d_inner = view(params, w2).transpose() * d_hidden;
    if (cache.keep[l].size() > 0) d_inner.array() *= cache.keep[l].array();
    d_inner.array() *= (cache.inner[l].array() > 0.0).cast<double>();
    const Matrix activated = cache.hidden[l].cwiseMax(0.0);
    view(gradient, w1) += d_inner * activated.transpose();
    view(gradient, model.block_tensor(l, 1)) += d_inner.rowwise().sum();
    const Matrix d_act = view(params, w1).transpose() * d_inner;
    d_hidden.array() += d_act.array() * (cache.hidden[l].array() > 0.0).cast<double>();
  }

  view(gradient, model.input_weight()) += d_hidden * cache.input.transpose();
  view(gradient, model.input_bias()) += d_hidden.rowwise().sum();
  const Matrix d_input = view(params, model.input_weight()).transpose() * d_hidden;
  const int emb = config.embedding_dim;
  for (size_t c = 0; c < n; ++c) {
    auto table = view(gradient, model.embedding(c));
    const auto base = static_cast<Eigen::Index>(model.position_of(c)) * emb;
    for (Eigen::Index r = 0; r < rows; ++r) {
      const int code = batch.at(static_cast<size_t>(r), c);
      if (code >= 0) table.col(code) += d_input.block(base, r, emb, 1);
    }
  }

  for (size_t i = 0; i < gradient.size(); ++i) {
    if (!model.active(i)) gradient[i] = 0.0;
  }
  return loss * inv_rows;
}

std::vector<double> grad_nll(const ArDensityModel& model, const EncodedBatch& batch, std::span<const double> weights) {
  if (weights.size() != model.num_columns()) throw ValidationError("one weight per column is required");
  for (const double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("column weights must be finite and non-negative");
  }
  std::vector<double> gradient(model.num_parameters());
  loss_and_gradient(model, batch, weights, gradient);
  return gradient;
}

void conditional_probabilities(const ArDensityModel& model, const EncodedBatch& batch, int position,
                               std::vector<double>& out) {
  const auto column = static_cast<size_t>(model.order().at(static_cast<size_t>(position)));
  Matrix probs;
  if (position == 0) {
    probs = bias(model.parameters(), model.head_bias(column)).replicate(1, static_cast<Eigen::Index>(batch.rows));
  } else {
    ForwardCache cache;
    forward(model, batch, nullptr, cache);
    probs = head_logits(model, cache, column);
  }
  softmax_columns(probs);
  const auto dom = static_cast<size_t>(probs.rows());
  out.resize(batch.rows * dom);
  for (size_t r = 0; r < batch.rows; ++r) {
    for (size_t v = 0; v < dom; ++v) out[r * dom + v] = probs(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(r));
  }
}

std::vector<std::vector<double>> all_logits(const ArDensityModel& model, const EncodedBatch& batch) {
  ForwardCache cache;
  forward(model, batch, nullptr, cache);
  std::vector<std::vector<double>> out;
  for (size_t c = 0; c < model.num_columns(); ++c) {
    const Matrix logits = head_logits(model, cache, c);
    std::vector<double> flat(batch.rows * static_cast<size_t>(logits.rows()));
    for (size_t r = 0; r < batch.rows; ++r) {
      for (Eigen::Index v = 0; v < logits.rows(); ++v) {
        flat[r * static_cast<size_t>(logits.rows()) + static_cast<size_t>(v)] = logits(v, static_cast<Eigen::Index>(r));
      }
    }
    out.push_back(std::move(flat));
  }
  return out;
}

}  // namespace cep
