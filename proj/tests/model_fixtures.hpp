#pragma once

#include "gpcde/model.hpp"
#include "test_util.hpp"

#include <cmath>

namespace gpcde::testing {

struct ToyProblem {
  GpCdeModel model;
  Matrix x;
  Matrix y;
};

/// A model with randomized parameters and random data sized by `config`.
inline ToyProblem random_problem(ModelConfig config, Eigen::Index n, Rng& rng) {
  ToyProblem p;
  p.x = uniform(n, config.input_dim, rng, -1.5, 1.5);
  p.y = standard_normal(n, config.output_dim, rng);
  const Eigen::Index din = config.gp_input_dim();
  KernelSpec k;
  k.family = config.kernel;
  k.signal_variance = uniform(1, 1, rng, 0.6, 1.5)(0, 0);
  k.lengthscales = uniform(din, 1, rng, 0.6, 1.6);
  const Matrix z = uniform(config.num_inducing, din, rng, -1.5, 1.5);
  config.noise_variance = uniform(1, 1, rng, 0.2, 0.6)(0, 0);
  p.model = make_model(config, n, z, k, rng);
  ParamRegistry& reg = p.model.params;
  // q(u) drawn on the scale of the prior: m = L_z v, L_S = L_z R.
  const Eigen::Index m = config.num_inducing;
  const Matrix lz = kzz_cholesky(k, z);
  reg.set_value(param_names::kQMean, lz * standard_normal(m, config.num_gp_outputs(), rng) * 0.7);
  for (Eigen::Index l = 0; l < config.num_gp_outputs(); ++l) {
    reg.set_value(param_names::q_sqrt(l), Matrix((lz * random_lower(m, rng) * 0.6).triangularView<Eigen::Lower>()));
  }
  if (reg.contains(param_names::kQwMean)) {
    reg.set_value(param_names::kQwMean, standard_normal(n, config.latent_dim, rng) * 0.5);
    reg.set_value(param_names::kQwScale, uniform(n, config.latent_dim, rng, 0.3, 0.9));
    if (reg.contains(param_names::kQwOffdiag)) {
      const Matrix& off = reg.raw(param_names::kQwOffdiag);
      reg.set_value(param_names::kQwOffdiag, uniform(off.rows(), off.cols(), rng, -0.3, 0.3));
    }
  }
  if (reg.contains(param_names::kProjLogvar)) {
    const Matrix& lv = reg.raw(param_names::kProjLogvar);
    reg.set_value(param_names::kProjLogvar, uniform(lv.rows(), lv.cols(), rng, -2.0, 0.0));
  }
  if (reg.contains(param_names::kMixing)) {
    const Matrix& pm = reg.raw(param_names::kMixing);
    reg.set_value(param_names::kMixing, standard_normal(pm.rows(), pm.cols(), rng) * 0.7);
  }
  return p;
}

/// Optimal-quadrature model with D_x = D_y = D_w = 1 whose p(w | y) is
/// broad: latent lengthscale in [1.5, 3], noise in [0.5, 1.5] and outputs
/// drawn from the model itself.
inline ToyProblem broad_latent_problem(Eigen::Index n, Rng& rng) {
  ModelConfig c;
  c.input_dim = 1;
  c.latent_dim = 1;
  c.latent_mode = LatentMode::kOptimalQuadrature;
  c.num_inducing = 6;
  c.encoder_hidden = {4};
  ToyProblem p = random_problem(c, n, rng);
  Matrix ls = p.model.params.value(param_names::kLengthscales);
  ls(0, 1) = uniform(1, 1, rng, 1.5, 3.0)(0, 0);
  p.model.params.set_value(param_names::kLengthscales, ls);
  p.model.params.set_value(param_names::kNoise, uniform(1, 1, rng, 0.5, 1.5));
  const KernelSpec k = p.model.kernel();
  const InducingVariational q = p.model.inducing();
  for (Eigen::Index i = 0; i < n; ++i) {
    Matrix in(1, 2);
    in << p.x(i, 0), standard_normal(1, 1, rng)(0, 0);
    const MarginalMoments mm = conditional(q, k, in);
    p.y(i, 0) = mm.mean(0, 0) + std::sqrt(mm.var(0, 0) + p.model.noise_variance()) * standard_normal(1, 1, rng)(0, 0);
  }
  return p;
}

inline GaussianLatentPosterior random_latent_posterior(Eigen::Index n, Eigen::Index dw, Rng& rng) {
  GaussianLatentPosterior q;
  q.mean = standard_normal(n, dw, rng) * 0.7;
  for (Eigen::Index i = 0; i < n; ++i) {
    Matrix c = Matrix(uniform(dw, dw, rng, -0.3, 0.3).triangularView<Eigen::StrictlyLower>());
    c.diagonal() = uniform(dw, 1, rng, 0.2, 1.2);
    q.chol.push_back(c);
  }
  return q;
}

inline GaussianLatentPosterior prior_latent_posterior(Eigen::Index n, Eigen::Index dw) {
  GaussianLatentPosterior q;
  q.mean = Matrix::Zero(n, dw);
  q.chol.assign(static_cast<size_t>(n), Matrix::Identity(dw, dw));
  return q;
}

// Uncollapsed sparse-GP regression bound via LDLT solves (no Cholesky path).
inline double svgp_elbo_oracle(const GpCdeModel& model, const Matrix& x, const Matrix& y) {
  const KernelSpec k = model.kernel();
  const InducingVariational q = model.inducing();
  Matrix kzz = kernel_matrix(k, q.inducing_inputs, q.inducing_inputs);
  kzz.diagonal().array() += k.absolute_jitter();
  const Eigen::LDLT<Matrix> kf(kzz);
  const Matrix kzx = kernel_matrix(k, q.inducing_inputs, x);
  const Matrix a = kf.solve(kzx);  // K^-1 k_n per column
  const double logdet_k = kf.vectorD().array().log().sum();
  const double noise = model.noise_variance();
  double total = 0.0;
  for (Eigen::Index l = 0; l < y.cols(); ++l) {
    const Matrix s = q.covariance(l);
    const Vector m = q.means.col(l);
    for (Eigen::Index n = 0; n < x.rows(); ++n) {
      const Vector an = a.col(n);
      const double mean = an.dot(m);
      const double qtilde = k.signal_variance - kzx.col(n).dot(an);
      const double extra = an.dot(s * an);
      total += -0.5 * (std::log(2.0 * std::acos(-1.0)) + std::log(noise)) - (y(n, l) - mean) * (y(n, l) - mean) / (2.0 * noise) -
               (qtilde + extra) / (2.0 * noise);
    }
    const double mdim = static_cast<double>(m.size());
    const double logdet_s = Eigen::LDLT<Matrix>(s).vectorD().array().log().sum();
    total -= 0.5 * (kf.solve(s).trace() + m.dot(kf.solve(m)) - mdim + logdet_k - logdet_s);
  }
  return total;
}

}  // namespace gpcde::testing
