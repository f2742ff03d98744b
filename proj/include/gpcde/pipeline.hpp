#pragma once

// End-to-end runs shared by the command-line tool and the acceptance checks.

#include "gpcde/config.hpp"
#include "gpcde/persistence.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gpcde {

/// Read `path` and select columns. Without conditions the inputs are dropped.
ConditionedDataset load_dataset(const std::string& path, const ColumnSpec& columns, bool use_conditions = true);

struct PreparedData {
  /// Both sets are in standardized units.
  ConditionedDataset train;
  std::optional<ConditionedDataset> test;
  Standardizer standardizer;
};

/// Load the training file, carve out a farthest-point test set if requested
/// (distances over the encoded inputs, or the outputs when there are none),
/// load the separate test file if any, and standardize with training
/// statistics only.
PreparedData prepare_data(const RunConfig& rc);

/// Split a raw dataset into train and test exactly as prepare_data does.
Split split_dataset(const ConditionedDataset& d, Eigen::Index test_size, std::uint64_t seed);

/// Mean negative log predictive density in the original units of `raw`.
double evaluate_nlpp(const SavedModel& saved, const ConditionedDataset& raw, Eigen::Index samples, Rng& rng);

struct RunResult {
  SavedModel saved;
  /// Test NLPP in original units when the run has a test set.
  std::optional<double> test_nlpp;
};

/// Prepare data, train, and score the test set with rc.eval_samples draws.
RunResult run_training(const RunConfig& rc, const TrainOptions& options = {});

struct NatgradDemoOptions {
  Eigen::Index iterations = 2000;
  Eigen::Index train_size = 100;
  Eigen::Index test_size = 500;
  double natgrad_step = 0.1;
  double learning_rate = 0.01;
  double adam_variational_learning_rate = 0.001;
  long record_every = 50;
  Eigen::Index eval_samples = 1000;
  std::uint64_t seed = 0;
};

struct NatgradDemoArm {
  std::string name;
  TrainedModel trained;
  double test_loglik = 0.0;
  double seconds = 0.0;
};

/// GP-LVM on the digit-like images with three owners of q(u): the closed-form
/// optimum, natural gradients and Adam. Arms are returned in that order.
std::vector<NatgradDemoArm> natgrad_demo(const NatgradDemoOptions& options);

}  // namespace gpcde
