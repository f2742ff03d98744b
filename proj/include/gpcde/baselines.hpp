#pragma once

// Kernel density estimation baselines with an isotropic Gaussian kernel.

#include "gpcde/data.hpp"

#include <optional>
#include <vector>

namespace gpcde {

struct KdeModel {
  Matrix y;              // N x D_y training outputs
  Matrix x;              // N x D_x training inputs (conditional mode only)
  double bandwidth = 1.0;
  /// Neighbour count; 0 selects the unconditional estimator.
  Eigen::Index neighbours = 0;

  bool conditional() const { return neighbours > 0; }
  void validate() const;
};

KdeModel make_ukde(const Matrix& y, double bandwidth);
KdeModel make_ckde(const Matrix& x, const Matrix& y, double bandwidth, Eigen::Index neighbours);

/// Indices of the k training inputs nearest to x (Euclidean, ties to the
/// lower index), in increasing distance.
std::vector<int> nearest_neighbours(const Matrix& x, const Vector& query, Eigen::Index k);

/// log of the mean of N(y; y_n, h^2 I) over all training points, or over
/// the k nearest neighbours of x in conditional mode. Throws ConfigError
/// when the condition is missing in conditional mode.
double kde_logpdf(const KdeModel& model, const std::optional<Vector>& x, const Vector& y);

/// Mean negative log density over test rows.
double kde_nlpp(const KdeModel& model, const Matrix& x, const Matrix& y);

/// 20 log-spaced values over [0.01, 10] times the mean output std.
std::vector<double> default_bandwidth_grid(const Matrix& y);

/// K-fold cross-validated bandwidth for the unconditional estimator: the
/// candidate with the highest mean held-out log density, ties to the larger
/// bandwidth. Fold f holds out rows i with i mod folds == f.
double kde_select_bandwidth(const Matrix& y, int folds, const std::vector<double>& grid);

}  // namespace gpcde
