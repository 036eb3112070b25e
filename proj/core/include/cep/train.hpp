#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "cep/model.hpp"
#include "cep/sampler.hpp"

namespace cep {

class Adam {
 public:
  Adam(size_t size, double learning_rate, double beta1, double beta2, double epsilon);
  explicit Adam(const ModelConfig& config, size_t size)
      : Adam(size, config.learning_rate, config.beta1, config.beta2, config.epsilon) {}

  // One update; masked positions of the model stay zero.
  void step(ArDensityModel& model, std::span<const double> gradient);
  long steps() const { return t_; }

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double epsilon_;
  long t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

struct TrainOptions {
  // Overrides ModelConfig::epochs when non-negative.
  int epochs = -1;
  // Caps the total number of steps when positive.
  long max_steps = 0;
  // Called every `callback_every` steps (and after the last one) with the step count.
  long callback_every = 0;
  std::function<void(long step, const ArDensityModel&)> callback;
};

struct TrainResult {
  std::vector<double> loss_trace;  // mean NLL per step
  long steps = 0;
  double seconds = 0.0;
};

// Adam on mean NLL over batches from `sampler`, with dropout. A fresh optimizer is used on
// every call. Throws TrainingError on a non-finite loss and EmptyRelationError on an empty
// sampler.
TrainResult train(ArDensityModel& model, JoinSampler& sampler, uint64_t seed, const TrainOptions& options = {});

// Mean NLL (nats per tuple) over the given tuples, dropout off.
double mean_nll(const ArDensityModel& model, std::span<const double> tuples, size_t rows, bool lenient = false);

}  // namespace cep
