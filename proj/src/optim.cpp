#include "gpcde/optim.hpp"

#include "gpcde/error.hpp"

#include <cmath>
#include <iostream>

namespace gpcde {

Adam::Adam(AdamOptions options) : opt_(options) {
  if (!(opt_.learning_rate > 0.0)) throw ConfigError("Adam learning rate must be > 0");
  if (!(opt_.decay > 0.0 && opt_.decay <= 1.0) || opt_.decay_steps < 1) {
    throw ConfigError("Adam decay must be in (0, 1] with decay_steps >= 1");
  }
}

double Adam::learning_rate() const {
  return opt_.learning_rate *
         std::pow(opt_.decay, static_cast<double>(t_) / static_cast<double>(opt_.decay_steps));
}

void Adam::step(ParamRegistry& params, const std::map<std::string, Matrix>& grads) {
  const double lr = learning_rate();
  ++t_;
  const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (const auto& [name, g] : grads) {
    const Matrix& raw = params.raw(name);
    if (g.rows() != raw.rows() || g.cols() != raw.cols()) {
      throw DimensionError("Adam: gradient shape differs from parameter '" + name + "'");
    }
    Matrix& m = m_.try_emplace(name, Matrix::Zero(raw.rows(), raw.cols())).first->second;
    Matrix& v = v_.try_emplace(name, Matrix::Zero(raw.rows(), raw.cols())).first->second;
    m = opt_.beta1 * m + (1.0 - opt_.beta1) * g;
    v = opt_.beta2 * v + (1.0 - opt_.beta2) * g.cwiseAbs2();
    const Matrix update =
        ((m.array() / c1) / ((v.array() / c2).sqrt() + opt_.epsilon)).matrix() * lr;
    params.set_raw(name, raw - update);
  }
}

GaussianMoments natgrad_step(const Vector& mean, const Matrix& cov, const Vector& d_mean,
                             const Matrix& d_cov, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("natgrad step size must be in (0, 1]");
  const Eigen::Index m = mean.size();
  if (cov.rows() != m || cov.cols() != m || d_mean.size() != m || d_cov.rows() != m || d_cov.cols() != m) {
    throw DimensionError("natgrad_step: shape mismatch");
  }
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("natgrad_step: S is not positive definite");
  const Matrix prec = llt.solve(Matrix::Identity(m, m));
  const Matrix g2 = 0.5 * (d_cov + d_cov.transpose());
  const Vector g1 = d_mean - 2.0 * g2 * mean;

  const Vector theta1 = prec * mean + gamma * g1;
  // -2 * theta2 after the step; must be positive definite.
  Matrix new_prec = prec - 2.0 * gamma * g2;
  new_prec = 0.5 * (new_prec + new_prec.transpose());
  Eigen::LLT<Matrix> plt(new_prec);
  if (plt.info() != Eigen::Success) {
    throw NumericalError("natgrad_step: updated precision is not positive definite");
  }
  GaussianMoments out;
  out.cov = plt.solve(Matrix::Identity(m, m));
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  out.mean = plt.solve(theta1);
  if (!out.cov.allFinite() || !out.mean.allFinite()) throw NumericalError("natgrad_step: non-finite result");
  return out;
}

VariationalGradients variational_gradients(const GpCdeModel& model, const Matrix& x, const Matrix& y,
                                           const std::vector<int>& batch, const LatentDraws& draws) {
  const Eigen::Index l_out = model.config.num_gp_outputs();
  std::vector<std::string> skip;
  for (Eigen::Index l = 0; l < l_out; ++l) skip.push_back(param_names::q_sqrt(l));
  ad::Tape tape;
  const BoundParams bound = gpcde::bind(tape, model.params, skip);
  const ModelVars mv = model_vars(model, tape, bound, true);
  const BoundTerms terms = model_bound(tape, bound, mv, model, x, y, batch, draws);
  tape.backward(terms.elbo);
  VariationalGradients g;
  g.elbo = terms.elbo.scalar();
  g.d_mean = tape.grad(bound.leaves.at(param_names::kQMean));
  for (const ad::Var& s : mv.cov_leaves) {
    const Matrix d = tape.grad(s);
    g.d_cov.push_back(0.5 * (d + d.transpose()));
  }
  return g;
}

NatGradReport natgrad_update(GpCdeModel& model, const VariationalGradients& grads,
                             const NatGradOptions& options) {
  NatGradReport report;
  const InducingVariational q = model.inducing();
  for (Eigen::Index l = 0; l < q.num_outputs(); ++l) {
    double gamma = options.step;
    bool done = false;
    for (int attempt = 0; attempt <= options.max_halvings && !done; ++attempt) {
      try {
        const GaussianMoments next =
            natgrad_step(q.means.col(l), q.covariance(l), grads.d_mean.col(l), grads.d_cov.at(static_cast<size_t>(l)), gamma);
        model.set_inducing_posterior(l, next.mean, next.cov);
        done = true;
      } catch (const NumericalError&) {
        gamma *= 0.5;
        ++report.halvings;
      }
    }
    if (!done) {
      ++report.skipped;
      std::cerr << "warning: natural-gradient step for output " << l << " skipped after "
                << options.max_halvings << " halvings\n";
    }
  }
  return report;
}

std::vector<GaussianMoments> analytic_optimal_qu(const GpCdeModel& model, const Matrix& x, const Matrix& y,
                                                 const LatentDraws& draws) {
  const ModelConfig& c = model.config;
  if (c.mixing_dim > 0 || c.projection_dim > 0) {
    throw ConfigError("analytic q(u) requires unmixed outputs and no input projection");
  }
  if (c.latent_dim > 0 && c.latent_mode != LatentMode::kPerPointGaussian) {
    throw ConfigError("analytic q(u) requires a per-point Gaussian q(w)");
  }
  const Eigen::Index n = y.rows();
  const Eigen::Index k = draws.per_point();
  const Eigen::Index dw = c.latent_dim;
  if (draws.xi.rows() != n * k || draws.xi.cols() != dw) throw DimensionError("draws must cover the full data set");
  if (y.cols() != c.output_dim) throw DimensionError("observations have the wrong number of columns");

  const KernelSpec spec = model.kernel();
  const Matrix z = model.params.value(param_names::kInducing);
  const Eigen::Index m = z.rows();
  const double noise = model.noise_variance();

  // Inputs for every (point, node) pair and their weights.
  const Eigen::Index dx = c.use_conditions ? c.input_dim : 0;
  Matrix inputs(n * k, dx + dw);
  Vector weight(n * k);
  GaussianLatentPosterior qw;
  if (dw > 0) qw = model.perpoint_posterior();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const Eigen::Index r = i * k + j;
      if (dx > 0) inputs.row(r).head(dx) = x.row(i);
      if (dw > 0) {
        inputs.row(r).tail(dw) =
            qw.mean.row(i) + (qw.chol[static_cast<size_t>(i)] * draws.xi.row(r).transpose()).transpose();
      }
      weight(r) = std::exp(draws.log_weights(j));
    }
  }
  const Matrix kzx = kernel_matrix(spec, z, inputs);  // M x NK
  const Matrix psi2 = kzx * weight.asDiagonal() * kzx.transpose();
  Matrix psi1y = Matrix::Zero(m, y.cols());
  for (Eigen::Index r = 0; r < n * k; ++r) psi1y += weight(r) * kzx.col(r) * y.row(r / k);

  Matrix kzz = kernel_matrix(spec, z, z);
  kzz.diagonal().array() += spec.absolute_jitter();
  // S* = K (K + Psi2 / noise)^-1 K, m* = K (K + Psi2 / noise)^-1 Psi1^T y / noise.
  Matrix a = kzz + psi2 / noise;
  a = 0.5 * (a + a.transpose());
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) throw NumericalError("analytic q(u): K + Psi2/noise is not positive definite");
  Matrix cov = kzz * llt.solve(kzz);
  cov = 0.5 * (cov + cov.transpose());
  const Matrix means = kzz * llt.solve(psi1y) / noise;

  std::vector<GaussianMoments> out;
  for (Eigen::Index l = 0; l < y.cols(); ++l) out.push_back({means.col(l), cov});
  return out;
}

void set_optimal_qu(GpCdeModel& model, const Matrix& x, const Matrix& y, const LatentDraws& draws) {
  const std::vector<GaussianMoments> opt = analytic_optimal_qu(model, x, y, draws);
  for (size_t l = 0; l < opt.size(); ++l) {
    model.set_inducing_posterior(static_cast<Eigen::Index>(l), opt[l].mean, opt[l].cov);
  }
}

}  // namespace gpcde
