#pragma once

// Evidence lower bounds of the latent-variable sparse GP.
//
// Per data point the Gaussian likelihood gives a closed-form expected
// log-likelihood L_w = E_q(f)[log p(y | f([x, w]))]. Two bounds are built on
// top of it:
//   gaussian: (N/B) sum_n { E_q(w_n)[L_w] - KL(q(w_n) || p(w_n)) } - KL_u - KL_A
//   optimal:  (N/B) sum_n log E_p(w_n)[exp(L_w)]                   - KL_u - KL_A
// The optimal bound is never below the gaussian one for the same model state.

#include "gpcde/model.hpp"

#include <optional>
#include <vector>

namespace gpcde {

/// Probabilists' Gauss-Hermite rule (measure N(0, I)), tensor product over
/// dimensions. Row k of `nodes` is the k-th node.
struct QuadratureRule {
  Matrix nodes;  // K x D_w
  Vector weights;
  Vector log_weights;
  int points_per_dim = 0;

  Eigen::Index size() const { return nodes.rows(); }
  Eigen::Index dim() const { return nodes.cols(); }
};

inline constexpr Eigen::Index kMaxQuadratureDim = 3;
inline constexpr Eigen::Index kMaxQuadratureNodes = 10000;

/// Q in [1, 512], dims in [1, 3]. For dims > 1 the per-dimension count is
/// reduced so that the grid has at most 10^4 nodes.
QuadratureRule gauss_hermite_rule(int q, Eigen::Index dims = 1);

/// Closed-form E_{f ~ N(mu, diag(var))}[log N(y | P^T f, noise I)]; without
/// mixing P = I and mu/var have D_y entries.
double expected_loglik(const Vector& y, const Vector& mu, const Vector& var, double noise,
                       const OutputMixing* mixing = nullptr);

/// sum over `batch` of KL(q(w_n) || N(0, I)).
double kl_latent(const GaussianLatentPosterior& q, const std::vector<int>& batch);

/// Standard-normal draws feeding a bound. Rows of `xi` are ordered point-major
/// (row b * K + k is draw k of batch point b); `log_weights` has K entries.
struct LatentDraws {
  Matrix xi;
  Vector log_weights;
  Matrix projection_eps;  // D_q x D_x, empty without an input projection

  Eigen::Index per_point() const { return log_weights.size(); }
};

LatentDraws draw_monte_carlo(Eigen::Index batch, Eigen::Index latent_dim, int samples, Rng& rng);
LatentDraws draw_quadrature(Eigen::Index batch, const QuadratureRule& rule);
/// Draws matching the model's configured estimator. With `deterministic` the
/// Gaussian modes use a quadrature expectation and A is fixed at its mean.
LatentDraws draw_for_model(const GpCdeModel& model, Eigen::Index batch, Rng& rng,
                           bool deterministic = false);

// ---- graph assembly ---------------------------------------------------------

/// Model parameters as tape nodes.
struct ModelVars {
  KernelVars kernel;
  InducingVars inducing;
  ad::Var kzz_chol;
  ad::Var noise;
  std::optional<ad::Var> proj_mean;
  std::optional<ad::Var> proj_logvar;
  std::optional<ad::Var> mixing;
  /// S_l leaves when bound in covariance form (natural-gradient mode).
  std::vector<ad::Var> cov_leaves;
};

/// With `covariance_leaves` the q.sqrt<l> parameters must have been skipped
/// by bind(); S_l is then a leaf and its factor comes from a Cholesky node.
ModelVars model_vars(const GpCdeModel& model, ad::Tape& tape, const BoundParams& bound,
                     bool covariance_leaves = false);

/// Gaussian q(w) rows for a batch (B x D_w each). `offdiag` packs the strict
/// lower triangle row-major and is unset for D_w = 1 or diagonal posteriors.
struct LatentVars {
  ad::Var mean;
  ad::Var scale;
  ad::Var log_scale;
  std::optional<ad::Var> offdiag;
};

/// q(w) from the model's encoder or per-point parameters.
LatentVars latent_vars(const GpCdeModel& model, const BoundParams& bound, ad::Tape& tape,
                       const Matrix& x, const Matrix& y, const std::vector<int>& batch);
/// q(w) held fixed (constants).
LatentVars latent_vars(ad::Tape& tape, const GaussianLatentPosterior& q, const std::vector<int>& batch);

/// Expected log-likelihood per row: y_rows and the moments are R x D_y / R x L.
ad::Var expected_loglik(ad::Var y_rows, const MomentVars& f, ad::Var noise,
                        const std::optional<ad::Var>& mixing);

struct BoundTerms {
  ad::Var elbo;
  ad::Var data_term;  // (N/B) * batch sum of E[L_w] or log E[exp L_w]
  ad::Var kl_latent;  // (N/B) * batch sum, zero for the optimal bound
  ad::Var kl_inducing;
  ad::Var kl_projection;
};

/// Assemble a bound. `qw` selects the Gaussian bound; nullptr selects the
/// optimal bound (or the plain sparse-GP bound when D_w = 0). `num_data` is
/// the N in the N/B scaling.
BoundTerms build_bound(ad::Tape& tape, const ModelVars& mv, const GpCdeModel& model,
                       const Matrix& x, const Matrix& y, const std::vector<int>& batch,
                       const LatentDraws& draws, const LatentVars* qw, Eigen::Index num_data);

/// The bound the model trains on.
BoundTerms model_bound(ad::Tape& tape, const BoundParams& bound, const ModelVars& mv,
                       const GpCdeModel& model, const Matrix& x, const Matrix& y,
                       const std::vector<int>& batch, const LatentDraws& draws);

// ---- scalar evaluation ------------------------------------------------------

/// Gaussian-q(w) bound with explicit draws (MC or quadrature nodes).
double elbo_gaussian_qw(const GpCdeModel& model, const Matrix& x, const Matrix& y,
                        const std::vector<int>& batch, const GaussianLatentPosterior& qw,
                        const LatentDraws& draws);
/// Reparameterized MC estimate with `mc_samples` draws per point.
double elbo_gaussian_qw(const GpCdeModel& model, const Matrix& x, const Matrix& y,
                        const std::vector<int>& batch, const GaussianLatentPosterior& qw,
                        int mc_samples, Rng& rng);
/// Optimal free-form q(w) bound via quadrature against the prior.
double elbo_optimal_qw(const GpCdeModel& model, const Matrix& x, const Matrix& y,
                       const std::vector<int>& batch, const QuadratureRule& rule);

/// The model's own bound on a batch.
double model_elbo(const GpCdeModel& model, const Matrix& x, const Matrix& y,
                  const std::vector<int>& batch, const LatentDraws& draws);

std::vector<int> all_indices(Eigen::Index n);

}  // namespace gpcde
