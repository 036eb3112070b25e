#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace cep {

// Seeded generator with distribution helpers that do not depend on the standard library's
// implementation-defined distributions, so outputs are identical across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be positive.
  uint64_t uniform_int(uint64_t n);

  double normal();

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::span<T> values) {
    for (size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<size_t>(uniform_int(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  // Independent stream seed for (seed, stream) pairs.
  static uint64_t derive(uint64_t seed, uint64_t stream);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Draws k distinct indices out of [0, n) in random order (partial Fisher-Yates).
std::vector<size_t> sample_without_replacement(size_t n, size_t k, Rng& rng);

}  // namespace cep
