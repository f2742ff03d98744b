#pragma once

// Optimizers. Adam owns hyperparameters, Z, the encoder, A and P; the
// natural-gradient step owns the Gaussian q(u_l) = N(m_l, S_l).

#include "gpcde/latent_bound.hpp"

#include <map>
#include <string>
#include <vector>

namespace gpcde {

struct AdamOptions {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// lr_t = learning_rate * decay^(t / decay_steps)
  double decay = 1.0;
  long decay_steps = 1000;
};

/// Bias-corrected Adam on raw (unconstrained) parameter values. Minimizes;
/// pass negated gradients to maximize.
class Adam {
 public:
  explicit Adam(AdamOptions options = {});

  /// Learning rate that the next step will use.
  double learning_rate() const;
  long steps_taken() const { return t_; }

  /// Update every parameter named in `grads`.
  void step(ParamRegistry& params, const std::map<std::string, Matrix>& grads);

  const Matrix& first_moment(const std::string& name) const { return m_.at(name); }
  const Matrix& second_moment(const std::string& name) const { return v_.at(name); }

 private:
  AdamOptions opt_;
  long t_ = 0;
  std::map<std::string, Matrix> m_;
  std::map<std::string, Matrix> v_;
};

struct GaussianMoments {
  Vector mean;
  Matrix cov;
};

/// One natural-gradient step for q(u) = N(m, S) given dELBO/dm and the
/// symmetric dELBO/dS. Works in natural parameters theta = (S^-1 m, -S^-1/2)
/// with the expectation-parameter gradient. Throws NumericalError if the
/// updated second natural parameter is not negative definite.
GaussianMoments natgrad_step(const Vector& mean, const Matrix& cov, const Vector& d_mean,
                             const Matrix& d_cov, double gamma);

/// ELBO and its gradients with respect to m_l and S_l (covariance form).
struct VariationalGradients {
  double elbo = 0.0;
  Matrix d_mean;              // M x L
  std::vector<Matrix> d_cov;  // L symmetric M x M
};

VariationalGradients variational_gradients(const GpCdeModel& model, const Matrix& x, const Matrix& y,
                                           const std::vector<int>& batch, const LatentDraws& draws);

struct NatGradOptions {
  double step = 0.1;
  int max_halvings = 5;
};

struct NatGradReport {
  int halvings = 0;
  /// Outputs whose update was dropped after max_halvings failures.
  int skipped = 0;
};

/// Apply a natural-gradient step to every q(u_l) of `model`. A failed step is
/// retried with half the step size; after max_halvings it is skipped with a
/// warning on stderr.
NatGradReport natgrad_update(GpCdeModel& model, const VariationalGradients& grads,
                             const NatGradOptions& options);

/// Closed-form maximizer of the full-batch bound over every (m_l, S_l), with
/// all other parameters fixed. Latent inputs are integrated with the supplied
/// deterministic draws against the model's per-point q(w) (or absent when
/// D_w = 0). Requires a Gaussian likelihood without output mixing or input
/// projection.
std::vector<GaussianMoments> analytic_optimal_qu(const GpCdeModel& model, const Matrix& x, const Matrix& y,
                                                 const LatentDraws& draws);

/// Overwrite q(u) with the analytic optimum.
void set_optimal_qu(GpCdeModel& model, const Matrix& x, const Matrix& y, const LatentDraws& draws);

}  // namespace gpcde
