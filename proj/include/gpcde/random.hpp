#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace gpcde {

/// Every stochastic routine takes this engine explicitly; results are
/// reproducible given the seed.
using Rng = std::mt19937_64;

inline Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  }
  return m;
}

}  // namespace gpcde
