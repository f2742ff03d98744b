#include "gpcde/density.hpp"

#include "gpcde/error.hpp"

#include <cmath>
#include <limits>

namespace gpcde {

namespace {

const double kLog2Pi = std::log(2.0 * std::acos(-1.0));

double log_mean_exp(const Vector& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().mean());
}

}  // namespace

double lowrank_gaussian_logpdf(const Vector& y, const Vector& mean, const Matrix& g, double noise) {
  const Eigen::Index d = y.size();
  if (mean.size() != d || g.cols() != d) throw DimensionError("lowrank_gaussian_logpdf: shape mismatch");
  if (!(noise > 0.0)) throw NumericalError("lowrank_gaussian_logpdf: noise must be > 0");
  const Vector r = y - mean;
  // C = I + G G^T / noise; |Sigma| = noise^D |C|.
  Matrix c = g * g.transpose() / noise;
  c.diagonal().array() += 1.0;
  Eigen::LLT<Matrix> llt(c);
  if (llt.info() != Eigen::Success) throw NumericalError("lowrank_gaussian_logpdf: capacitance not positive definite");
  const Vector gr = g * r;
  const double logdet = static_cast<double>(d) * std::log(noise) +
                        2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double quad = r.squaredNorm() / noise - gr.dot(llt.solve(gr)) / (noise * noise);
  return -0.5 * (static_cast<double>(d) * kLog2Pi + logdet + quad);
}

PredictiveDraws draw_predictive(const GpCdeModel& model, Eigen::Index samples, Rng& rng) {
  if (samples < 1) throw ConfigError("the number of predictive samples must be >= 1");
  PredictiveDraws d;
  d.w = standard_normal(samples, model.config.latent_dim, rng);
  if (const auto proj = model.projection(); proj && model.config.use_conditions) {
    for (Eigen::Index s = 0; s < samples; ++s) d.a.push_back(sample_projection(*proj, rng));
  }
  return d;
}

double PredictiveMixture::log_density(const Vector& y) const {
  if (y.size() != output_dim()) throw DimensionError("predictive density: y has the wrong length");
  const Eigen::Index s_count = components();
  Vector lp(s_count);
  for (Eigen::Index s = 0; s < s_count; ++s) {
    if (mixing) {
      const Matrix g = var.row(s).transpose().cwiseSqrt().asDiagonal() * *mixing;
      lp(s) = lowrank_gaussian_logpdf(y, mixing->transpose() * mean.row(s).transpose(), g, noise);
    } else {
      const Vector v = var.row(s).transpose().array() + noise;
      const Vector r = y - mean.row(s).transpose();
      lp(s) = -0.5 * (static_cast<double>(y.size()) * kLog2Pi + v.array().log().sum() +
                      (r.array().square() / v.array()).sum());
    }
  }
  return log_mean_exp(lp);
}

bool predictive_is_exact(const GpCdeModel& model) {
  return model.config.latent_dim == 0 && !(model.config.use_conditions && model.config.projection_dim > 0);
}

PredictiveMixture predictive_mixture(const GpCdeModel& model, const Vector& x, const PredictiveDraws& draws) {
  const ModelConfig& c = model.config;
  if (c.use_conditions && x.size() != c.input_dim) throw DimensionError("condition has the wrong length");
  const bool exact = predictive_is_exact(model);
  const Eigen::Index s_count = exact ? 1 : draws.size();
  if (s_count < 1) throw ConfigError("the number of predictive samples must be >= 1");
  const auto proj = model.projection();
  const bool projected = c.use_conditions && proj.has_value();
  if (!exact && (draws.w.cols() != c.latent_dim || (projected && static_cast<Eigen::Index>(draws.a.size()) != s_count))) {
    throw DimensionError("predictive draws do not match the model");
  }

  Matrix inputs(s_count, c.gp_input_dim());
  for (Eigen::Index s = 0; s < s_count; ++s) {
    Eigen::Index col = 0;
    if (c.use_conditions) {
      const Vector cond = projected ? Vector(draws.a[static_cast<size_t>(s)] * x) : x;
      inputs.row(s).head(cond.size()) = cond.transpose();
      col = cond.size();
    }
    if (c.latent_dim > 0) inputs.row(s).segment(col, c.latent_dim) = draws.w.row(s);
  }
  const MarginalMoments mm = conditional(model.inducing(), model.kernel(), inputs);
  PredictiveMixture out;
  out.mean = mm.mean;
  out.var = mm.var;
  out.noise = model.noise_variance();
  if (const auto mix = model.mixing()) out.mixing = mix->p;
  return out;
}

double predictive_logdensity(const GpCdeModel& model, const Vector& x, const Vector& y, Eigen::Index samples,
                             Rng& rng) {
  if (samples < 1) throw ConfigError("the number of predictive samples must be >= 1");
  const PredictiveDraws draws = predictive_is_exact(model) ? PredictiveDraws{} : draw_predictive(model, samples, rng);
  const double lp = predictive_mixture(model, x, draws).log_density(y);
  if (!std::isfinite(lp)) throw NumericalError("predictive log-density is not finite");
  return lp;
}

Matrix sample_conditional(const GpCdeModel& model, const Vector& x, Eigen::Index n, Rng& rng) {
  if (n < 1) throw ConfigError("the number of samples must be >= 1");
  const PredictiveDraws draws = draw_predictive(model, n, rng);
  PredictiveMixture mix = predictive_mixture(model, x, draws);
  const Matrix eps_f = standard_normal(n, mix.mean.cols(), rng);
  const Matrix eps_y = standard_normal(n, model.config.output_dim, rng);
  // Exact models return a single component shared by every sample.
  const Eigen::Index comps = mix.components();
  Matrix out(n, model.config.output_dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index s = comps == 1 ? 0 : i;
    const Vector f = mix.mean.row(s).transpose() + (mix.var.row(s).transpose().cwiseSqrt().array() *
                                                    eps_f.row(i).transpose().array()).matrix();
    const Vector mean = mix.mixing ? Vector(mix.mixing->transpose() * f) : f;
    out.row(i) = (mean + std::sqrt(mix.noise) * eps_y.row(i).transpose()).transpose();
  }
  return out;
}

namespace {

Vector trapezoid_weights(const Vector& axis) {
  const Eigen::Index n = axis.size();
  Vector w = Vector::Zero(n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double h = axis(i + 1) - axis(i);
    w(i) += 0.5 * h;
    w(i + 1) += 0.5 * h;
  }
  return w;
}

}  // namespace

double DensityGrid::mass() const {
  const Vector w0 = trapezoid_weights(axes.at(0));
  const Vector w1 = axes.size() > 1 ? trapezoid_weights(axes[1]) : Vector::Ones(1);
  return (w0.transpose() * logdens.array().exp().matrix() * w1)(0, 0);
}

Matrix DensityGrid::long_format() const {
  const Eigen::Index n0 = axes.at(0).size();
  const Eigen::Index n1 = axes.size() > 1 ? axes[1].size() : 1;
  Matrix out(n0 * n1, static_cast<Eigen::Index>(axes.size()) + 1);
  for (Eigen::Index i = 0; i < n0; ++i) {
    for (Eigen::Index j = 0; j < n1; ++j) {
      const Eigen::Index r = i * n1 + j;
      out(r, 0) = axes[0](i);
      if (axes.size() > 1) out(r, 1) = axes[1](j);
      out(r, out.cols() - 1) = logdens(i, j);
    }
  }
  return out;
}

DensityGrid density_grid(const GpCdeModel& model, const Vector& x, const std::vector<Vector>& axes,
                         Eigen::Index samples, Rng& rng) {
  const Eigen::Index dy = model.config.output_dim;
  if (dy != 1 && dy != 2) throw ConfigError("density grids support 1 or 2 output dimensions, got " + std::to_string(dy));
  if (static_cast<Eigen::Index>(axes.size()) != dy) throw ConfigError("density grid needs one axis per output dimension");
  for (const Vector& a : axes) {
    if (a.size() < 1) throw ConfigError("density grid axes must be non-empty");
  }
  if (samples < 1) throw ConfigError("the number of predictive samples must be >= 1");
  const PredictiveDraws draws = predictive_is_exact(model) ? PredictiveDraws{} : draw_predictive(model, samples, rng);
  const PredictiveMixture mix = predictive_mixture(model, x, draws);
  DensityGrid g;
  g.condition = x;
  g.axes = axes;
  const Eigen::Index n1 = dy == 2 ? axes[1].size() : 1;
  g.logdens.resize(axes[0].size(), n1);
  Vector y(dy);
  for (Eigen::Index i = 0; i < axes[0].size(); ++i) {
    for (Eigen::Index j = 0; j < n1; ++j) {
      y(0) = axes[0](i);
      if (dy == 2) y(1) = axes[1](j);
      g.logdens(i, j) = mix.log_density(y);
    }
  }
  return g;
}

double nlpp(const GpCdeModel& model, const Matrix& x, const Matrix& y, Eigen::Index samples, Rng& rng) {
  const Eigen::Index n = y.rows();
  if (n < 1) throw ConfigError("nlpp needs a non-empty test set");
  if (model.config.use_conditions && x.rows() != n) throw DimensionError("test inputs and outputs disagree");
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector xi = model.config.use_conditions ? Vector(x.row(i).transpose()) : Vector();
    total += predictive_logdensity(model, xi, y.row(i).transpose(), samples, rng);
  }
  return -total / static_cast<double>(n);
}

}  // namespace gpcde
