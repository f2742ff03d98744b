#pragma once

// Inducing-point variational posterior over L independent latent functions.
//
// q(u_l) = N(m_l, S_l) at shared inducing inputs Z, with S_l = L_l L_l^T.
// Marginalizing p(f_l | u_l) against q(u_l) gives
//   mu_l(x)  = k_Z(x)^T K_ZZ^{-1} m_l
//   var_l(x) = k(x, x) - k_Z(x)^T K_ZZ^{-1} (K_ZZ - S_l) K_ZZ^{-1} k_Z(x)

#include "gpcde/kernels.hpp"

#include <vector>

namespace gpcde {

/// Floor applied to conditional variances after the subtraction above.
inline constexpr double kVarianceFloor = 1e-12;

struct InducingVariational {
  Matrix inducing_inputs;           // M x D_in
  Matrix means;                     // M x L, column l is m_l
  std::vector<Matrix> cov_factors;  // L lower-triangular M x M factors

  Eigen::Index num_inducing() const { return inducing_inputs.rows(); }
  Eigen::Index num_outputs() const { return means.cols(); }
  Matrix covariance(Eigen::Index l) const;
  /// Throws DimensionError / NumericalError when shapes or factors are invalid.
  void validate() const;
};

struct MarginalMoments {
  Matrix mean;  // N x L
  Matrix var;   // N x L
};

MarginalMoments conditional(const InducingVariational& q, const KernelSpec& spec,
                            const Matrix& xstar);

/// sum_l KL(N(m_l, S_l) || N(0, K_ZZ)).
double kl_inducing(const InducingVariational& q, const KernelSpec& spec);

/// Lower Cholesky factor of K_ZZ + jitter I; throws NumericalError on failure.
Matrix kzz_cholesky(const KernelSpec& spec, const Matrix& z);

// ---- differentiable counterparts -------------------------------------------

struct InducingVars {
  ad::Var inducing_inputs;
  ad::Var means;
  std::vector<ad::Var> cov_factors;
};

struct MomentVars {
  ad::Var mean;  // N x L
  ad::Var var;   // N x L
};

/// Factor of K_ZZ + jitter I, shared by conditional() and kl_inducing() within
/// one graph.
ad::Var kzz_cholesky(const InducingVars& q, const KernelVars& k);
MomentVars conditional(const InducingVars& q, const KernelVars& k, ad::Var kzz_chol,
                       ad::Var xstar);
ad::Var kl_inducing(const InducingVars& q, ad::Var kzz_chol);

}  // namespace gpcde
