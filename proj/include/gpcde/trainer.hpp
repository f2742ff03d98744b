#pragma once

// Model assembly and the training loop.

#include "gpcde/optim.hpp"

#include <functional>
#include <vector>

namespace gpcde {

/// Epoch-shuffled minibatches: each epoch is a fresh permutation cut into
/// consecutive chunks of `batch` indices (the last chunk may be shorter).
class MinibatchSampler {
 public:
  MinibatchSampler(Eigen::Index n, Eigen::Index batch, Rng& rng);
  std::vector<int> next();
  Eigen::Index batch_size() const { return batch_; }

 private:
  Eigen::Index n_;
  Eigen::Index batch_;
  Rng* rng_;
  std::vector<int> perm_;
  size_t pos_ = 0;
};

/// All batches of one epoch.
std::vector<std::vector<int>> minibatches(Eigen::Index n, Eigen::Index batch, Rng& rng);

/// Lloyd's k-means with centroids seeded from distinct random rows.
Matrix kmeans(const Matrix& points, Eigen::Index k, Rng& rng, int iterations = 25);

/// Lay out a model for the data: unit kernel hyperparameters, Z from k-means
/// over [x (or x A_mean^T), w ~ N(0, I)] on a subsample of at most 2000 rows.
GpCdeModel initialize_model(const ModelConfig& config, const Matrix& x, const Matrix& y, Rng& rng);

struct CurvePoint {
  long iteration = 0;
  double elbo = 0.0;
  double wall_ms = 0.0;
};

struct TrainedModel {
  GpCdeModel model;
  std::vector<CurvePoint> curve;
};

struct TrainOptions {
  /// Record the curve every this many iterations (and after the last one).
  long record_every = 50;
  /// Record the deterministic full-batch bound instead of a moving average
  /// of the minibatch estimates.
  bool full_batch_curve = false;
  std::function<void(const CurvePoint&)> on_record;
};

/// Names Adam updates for this model: everything except the q(u) parameters
/// owned by the natural-gradient or analytic update, and the noise when it
/// is fixed.
std::vector<std::string> adam_param_names(const GpCdeModel& model);

/// Deterministic full-batch bound (quadrature over q(w), A at its mean).
double full_batch_elbo(const GpCdeModel& model, const Matrix& x, const Matrix& y);

/// Train from an explicit initial model. Deterministic given config.seed.
/// Throws NumericalError (with the iteration) if the bound becomes non-finite.
TrainedModel train(GpCdeModel model, const Matrix& x, const Matrix& y, const TrainOptions& options = {});

/// initialize_model with a generator seeded from config.seed, then train.
TrainedModel train(const ModelConfig& config, const Matrix& x, const Matrix& y, const TrainOptions& options = {});

}  // namespace gpcde
