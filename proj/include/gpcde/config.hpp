#pragma once

// JSON run configuration. Unknown keys are rejected at every level.

#include "gpcde/data.hpp"
#include "gpcde/model.hpp"

#include <string>

namespace gpcde {

struct DataSpec {
  std::string train;
  /// Optional separate test file; empty means none.
  std::string test;
  ColumnSpec columns;
  bool standardize = true;
};

struct SplitSpec {
  /// Farthest-point test set carved from the training file; 0 disables.
  Eigen::Index test_size = 0;
  std::uint64_t seed = 0;
};

struct RunConfig {
  DataSpec data;
  SplitSpec split;
  /// Shapes (input_dim, output_dim) are filled in from the data.
  ModelConfig model;
  long record_every = 50;
  Eigen::Index eval_samples = 1000;
  std::string output_dir = ".";
};

/// Throws ConfigError on malformed JSON, unknown keys or wrong value types.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

/// Flat JSON object with every ModelConfig field.
std::string model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const std::string& json_text);

}  // namespace gpcde
