#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "cep/deletion.hpp"
#include "cep/model.hpp"
#include "cep/unlearn.hpp"
#include "cep/workload.hpp"

namespace cep::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

struct GenDataArgs {
  std::string profile = "skewed";
  uint64_t seed = 1;
  fs::path out;
};

struct TrainArgs {
  fs::path data;
  fs::path out;
  uint64_t seed = 1;
  ModelConfig model;
};

struct DeleteArgs {
  fs::path data;
  fs::path out;
  std::string task;
  std::vector<std::string> conditions;
  uint64_t seed = 1;
};

struct UnlearnArgs {
  fs::path data;
  fs::path split;
  fs::path model;  // optional for retrain
  fs::path out;
  Method method = Method::cep;
  MethodOptions options;
  uint64_t seed = 1;
  bool dump_scores = false;
};

struct EvalArgs {
  fs::path data;
  fs::path split;
  fs::path model;
  fs::path out;
  fs::path workload;  // generated when empty
  Method method = Method::cep;
  int queries = 200;
  uint64_t workload_seed = 1;
  std::string types = "both";
  int samples = kDefaultNumSamples;
  uint64_t seed = 1;
};

struct ReportArgs {
  std::vector<fs::path> runs;
  fs::path out;
};

struct RunArgs {
  fs::path manifest;
  fs::path out;
};

void gen_data(const GenDataArgs& args);
void train_model(const TrainArgs& args);
void delete_rows(const DeleteArgs& args);
void unlearn(const UnlearnArgs& args);
void eval(const EvalArgs& args);
void report(const ReportArgs& args);
void run_pipeline(const RunArgs& args);

// Helpers shared with the command-line front end.
SchemaGraph load_data_dir(const fs::path& dir);
DatasetSplit load_split(const fs::path& data, const fs::path& split);
json model_config_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const json& j, ModelConfig base = {});
void write_manifest(const fs::path& dir, const std::string& stage, const json& config, const json& seeds,
                    const json& inputs);

}  // namespace cep::cli
