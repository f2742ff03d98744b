#pragma once

// Stationary covariance functions with ARD lengthscales.

#include "gpcde/autodiff.hpp"

#include <string>

namespace gpcde {

using ad::Matrix;
using ad::Vector;

enum class KernelFamily { kRbf, kMatern52 };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

struct KernelSpec {
  KernelFamily family = KernelFamily::kRbf;
  double signal_variance = 1.0;
  Vector lengthscales;
  /// Added to Gram diagonals before factorization, relative to signal_variance.
  double jitter = 1e-6;

  Eigen::Index input_dim() const { return lengthscales.size(); }
  double absolute_jitter() const { return jitter * signal_variance; }
};

/// Entry (i, j) = k(x1_i, x2_j).
Matrix kernel_matrix(const KernelSpec& spec, const Matrix& x1, const Matrix& x2);
/// k(x_n, x_n) per row.
Vector kernel_diag(const KernelSpec& spec, const Matrix& x);

/// Kernel hyperparameters as tape nodes: a 1x1 variance and a 1xD row of
/// lengthscales.
struct KernelVars {
  KernelFamily family = KernelFamily::kRbf;
  ad::Var signal_variance;
  ad::Var lengthscales;
  double jitter = 1e-6;
};

ad::Var kernel_matrix(const KernelVars& k, ad::Var x1, ad::Var x2);
/// Nx1 column of k(x_n, x_n).
ad::Var kernel_diag(const KernelVars& k, ad::Var x);
/// K(Z, Z) + jitter * signal_variance * I.
ad::Var kernel_matrix_jittered(const KernelVars& k, ad::Var z);

}  // namespace gpcde
