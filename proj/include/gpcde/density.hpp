#pragma once

// Predictive conditional densities, sampling, grid export and NLPP.
// Latents are marginalized against the prior p(w) for every posterior mode.

#include "gpcde/model.hpp"

#include <optional>
#include <vector>

namespace gpcde {

/// log N(y; mean, G^T G + noise I) for G of shape L x D through the
/// matrix-inversion and determinant lemmas; O(D L^2 + L^3).
double lowrank_gaussian_logpdf(const Vector& y, const Vector& mean, const Matrix& g, double noise);

/// Samples shared by every evaluation that uses them (common random numbers).
struct PredictiveDraws {
  Matrix w;                 // S x D_w
  std::vector<Matrix> a;    // S draws of A (empty without projection)
  Eigen::Index size() const { return w.rows(); }
};

/// S draws of w ~ N(0, I) and A ~ q(A). Throws ConfigError when S < 1.
PredictiveDraws draw_predictive(const GpCdeModel& model, Eigen::Index samples, Rng& rng);

/// p(y | x) at a fixed condition as an equally weighted mixture of Gaussians
/// N(P^T mu_s, P^T diag(v_s) P + noise I), one component per draw.
struct PredictiveMixture {
  Matrix mean;  // S x L
  Matrix var;   // S x L
  std::optional<Matrix> mixing;  // L x D_y
  double noise = 0.0;

  Eigen::Index components() const { return mean.rows(); }
  Eigen::Index output_dim() const { return mixing ? mixing->cols() : mean.cols(); }
  double log_density(const Vector& y) const;
};

/// True when p(y | x) is a single Gaussian and needs no sampling
/// (no latents and no input projection).
bool predictive_is_exact(const GpCdeModel& model);

/// Mixture for condition x. Exact models ignore `draws` and give one component.
PredictiveMixture predictive_mixture(const GpCdeModel& model, const Vector& x, const PredictiveDraws& draws);

/// log p(y | x) estimated by log-mean-exp over S prior draws (exact when
/// predictive_is_exact). Throws ConfigError for S < 1, NumericalError when
/// the estimate is not finite.
double predictive_logdensity(const GpCdeModel& model, const Vector& x, const Vector& y, Eigen::Index samples,
                             Rng& rng);

/// n x D_y samples: w ~ N(0, I), A ~ q(A), f_l ~ q(f_l) independently,
/// y = P^T f + sqrt(noise) e.
Matrix sample_conditional(const GpCdeModel& model, const Vector& x, Eigen::Index n, Rng& rng);

struct DensityGrid {
  Vector condition;
  std::vector<Vector> axes;  // one (D_y = 1) or two (D_y = 2) coordinate vectors
  Matrix logdens;            // axes[0].size() x (axes[1].size() or 1)

  /// Trapezoidal integral of exp(logdens) over the grid.
  double mass() const;
  /// Long format: one row per node with columns y0[, y1], logdens.
  Matrix long_format() const;
};

/// Evaluate the predictive log-density at every grid node with the same
/// draws. Throws ConfigError unless D_y is 1 or 2 and one axis per output
/// dimension is given.
DensityGrid density_grid(const GpCdeModel& model, const Vector& x, const std::vector<Vector>& axes,
                         Eigen::Index samples, Rng& rng);

/// Mean negative log predictive density over the test rows.
double nlpp(const GpCdeModel& model, const Matrix& x, const Matrix& y, Eigen::Index samples, Rng& rng);

}  // namespace gpcde
