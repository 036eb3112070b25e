#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cep/model.hpp"

namespace cep {

inline constexpr uint32_t kCheckpointVersion = 1;

std::string serialize_model(const ArDensityModel& model);
// Throws FormatError on a bad magic, version or checksum.
ArDensityModel deserialize_model(const std::string& bytes);

void save_checkpoint(const ArDensityModel& model, const std::filesystem::path& path);
ArDensityModel load_checkpoint(const std::filesystem::path& path);

// Accumulated importance scores, tied to the checkpoint they were computed on.
struct ScoreFile {
  uint64_t model_checksum = 0;
  uint64_t batches = 0;
  std::vector<double> scores;
};

void save_scores(const ScoreFile& scores, const std::filesystem::path& path);
ScoreFile load_scores(const std::filesystem::path& path);

}  // namespace cep
