#pragma once

// Bayesian input projection A (elementwise Gaussian posterior, standard normal
// prior) and deterministic output mixing P.

#include "gpcde/autodiff.hpp"
#include "gpcde/random.hpp"

namespace gpcde {

using ad::Matrix;
using ad::Vector;

struct InputProjection {
  Matrix mean;    // D_q x D_x
  Matrix logvar;  // D_q x D_x

  Eigen::Index projected_dim() const { return mean.rows(); }
  Eigen::Index input_dim() const { return mean.cols(); }
  void validate() const;
};

enum class ProjectionMode { kMean, kSample };

/// mean: q_mean x. sample: (q_mean + sqrt(exp(q_logvar)) * eps) x with a fresh
/// elementwise eps ~ N(0, 1). `rng` is only used in sample mode.
Vector project_input(const InputProjection& proj, const Vector& x, ProjectionMode mode, Rng* rng);

/// Draw one A from q(A).
Matrix sample_projection(const InputProjection& proj, Rng& rng);

/// KL(q(A) || N(0, I)) summed over elements.
double kl_input_projection(const InputProjection& proj);

struct OutputMixing {
  Matrix p;  // L x D_y; the observed mean is P^T f

  Eigen::Index num_latent() const { return p.rows(); }
  Eigen::Index output_dim() const { return p.cols(); }
};

/// Rows are sqrt(lambda_l) v_l^T for the L largest eigenpairs of a
/// unit-variance Matern-5/2 Gram matrix over the pixel coordinates.
OutputMixing init_mixing_matern(const Matrix& pixel_coords, Eigen::Index num_latent,
                                double lengthscale);

/// First L rows of the identity (unit-norm rows).
OutputMixing init_mixing_identity(Eigen::Index num_latent, Eigen::Index output_dim);

// ---- differentiable counterparts -------------------------------------------

/// A = mean + exp(logvar / 2) * eps.
ad::Var sample_projection(ad::Var mean, ad::Var logvar, const Matrix& eps);
ad::Var kl_input_projection(ad::Var mean, ad::Var logvar);

}  // namespace gpcde
