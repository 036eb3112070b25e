#include "cep/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "cep/error.hpp"

namespace cep {

Adam::Adam(size_t size, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), epsilon_(epsilon), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(ArDensityModel& model, std::span<const double> gradient) {
  auto params = model.parameters();
  if (gradient.size() != params.size() || m_.size() != params.size()) {
    throw ValidationError("optimizer state does not match the model");
  }
  ++t_;
  const double correction1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    if (!model.active(i)) continue;
    const double g = gradient[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
    params[i] -= lr_ * (m_[i] / correction1) / (std::sqrt(v_[i] / correction2) + epsilon_);
  }
}

TrainResult train(ArDensityModel& model, JoinSampler& sampler, uint64_t seed, const TrainOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const auto& config = model.config();
  if (sampler.num_columns() != model.num_columns()) throw ValidationError("sampler width does not match the model");
  const int epochs = options.epochs >= 0 ? options.epochs : config.epochs;
  TrainResult result;
  if (epochs == 0) return result;
  const size_t epoch_rows = sampler.epoch_size();
  if (epoch_rows == 0) throw EmptyRelationError("cannot train on an empty relation");

  const auto batch_size = static_cast<size_t>(config.batch_size);
  const long steps_per_epoch = static_cast<long>((epoch_rows + batch_size - 1) / batch_size);
  long total = steps_per_epoch * epochs;
  if (options.max_steps > 0) total = std::min(total, options.max_steps);

  Rng data_rng(Rng::derive(seed, 0));
  Rng dropout_rng(Rng::derive(seed, 1));
  Adam optimizer(config, model.num_parameters());
  const std::vector<double> ones(model.num_columns(), 1.0);
  std::vector<double> gradient(model.num_parameters());
  std::vector<double> tuples;
  result.loss_trace.reserve(static_cast<size_t>(total));

  for (long step = 0; step < total; ++step) {
    const size_t rows = sampler.next_batch(batch_size, data_rng, tuples);
    const auto batch = encode_batch(model, std::span<const double>(tuples).first(rows * model.num_columns()), rows);
    const double loss = loss_and_gradient(model, batch, ones, gradient, &dropout_rng);
    if (!std::isfinite(loss)) throw TrainingError("non-finite loss at step " + std::to_string(step), step);
    optimizer.step(model, gradient);
    result.loss_trace.push_back(loss);
    result.steps = step + 1;
    if (options.callback && options.callback_every > 0 &&
        (result.steps % options.callback_every == 0 || result.steps == total)) {
      options.callback(result.steps, model);
    }
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

double mean_nll(const ArDensityModel& model, std::span<const double> tuples, size_t rows, bool lenient) {
  if (rows == 0) return 0.0;
  constexpr size_t kChunk = 1024;
  const auto width = model.num_columns();
  double total = 0.0;
  for (size_t begin = 0; begin < rows; begin += kChunk) {
    const size_t count = std::min(kChunk, rows - begin);
    const auto batch = encode_batch(model, tuples.subspan(begin * width, count * width), count, lenient);
    const auto terms = nll_terms(model, batch);
    total += std::accumulate(terms.begin(), terms.end(), 0.0);
  }
  return total / static_cast<double>(rows);
}

}  // namespace cep
