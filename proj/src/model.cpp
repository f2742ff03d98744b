#include "gpcde/model.hpp"

#include "gpcde/error.hpp"

#include <cmath>

namespace gpcde {

std::string to_string(LatentMode m) {
  switch (m) {
    case LatentMode::kAmortizedGaussian:
      return "amortized-gaussian";
    case LatentMode::kPerPointGaussian:
      return "perpoint-gaussian";
    case LatentMode::kOptimalQuadrature:
      return "optimal-quadrature";
  }
  return "?";
}

std::string to_string(LatentExpectation e) {
  return e == LatentExpectation::kMonteCarlo ? "monte-carlo" : "quadrature";
}

std::string to_string(VariationalUpdate u) {
  switch (u) {
    case VariationalUpdate::kNatGrad:
      return "natgrad";
    case VariationalUpdate::kAdam:
      return "adam";
    case VariationalUpdate::kAnalytic:
      return "analytic";
  }
  return "?";
}

LatentMode latent_mode_from_string(const std::string& s) {
  if (s == "amortized-gaussian") return LatentMode::kAmortizedGaussian;
  if (s == "perpoint-gaussian") return LatentMode::kPerPointGaussian;
  if (s == "optimal-quadrature") return LatentMode::kOptimalQuadrature;
  throw ConfigError("unknown latent mode '" + s + "'");
}

LatentExpectation latent_expectation_from_string(const std::string& s) {
  if (s == "monte-carlo") return LatentExpectation::kMonteCarlo;
  if (s == "quadrature") return LatentExpectation::kQuadrature;
  throw ConfigError("unknown latent expectation '" + s + "'");
}

VariationalUpdate variational_update_from_string(const std::string& s) {
  if (s == "natgrad") return VariationalUpdate::kNatGrad;
  if (s == "adam") return VariationalUpdate::kAdam;
  if (s == "analytic") return VariationalUpdate::kAnalytic;
  throw ConfigError("unknown variational update '" + s + "'");
}

Eigen::Index ModelConfig::gp_input_dim() const {
  Eigen::Index d = latent_dim;
  if (use_conditions) d += projection_dim > 0 ? projection_dim : input_dim;
  return d;
}

Eigen::Index ModelConfig::num_gp_outputs() const { return mixing_dim > 0 ? mixing_dim : output_dim; }

void ModelConfig::validate() const {
  if (output_dim < 1) throw ConfigError("output_dim must be >= 1");
  if (input_dim < 0 || latent_dim < 0) throw ConfigError("dimensions must be non-negative");
  if (use_conditions && input_dim < 1) throw ConfigError("conditioning requires input_dim >= 1");
  if (!use_conditions && latent_dim < 1) {
    throw ConfigError("a model without conditions (GP-LVM) needs latent_dim >= 1");
  }
  if (latent_dim > 0 && latent_mode == LatentMode::kOptimalQuadrature && latent_dim > 3) {
    throw ConfigError("optimal-quadrature mode supports latent_dim <= 3");
  }
  if (projection_dim < 0 || mixing_dim < 0) throw ConfigError("projection/mixing sizes must be >= 0");
  if (projection_dim > 0) {
    if (!use_conditions) throw ConfigError("input projection needs conditions");
    if (projection_dim >= input_dim) throw ConfigError("projection_dim must be < input_dim");
  }
  if (mixing_dim > output_dim) throw ConfigError("mixing_dim must be <= output_dim");
  if (num_inducing < 1) throw ConfigError("num_inducing must be >= 1");
  if (noise_variance <= 0.0) throw ConfigError("noise_variance must be > 0");
  if (mc_samples < 1 || eval_mc_samples < 1) throw ConfigError("sample counts must be >= 1");
  if (quadrature_points < 1 || quadrature_points > 512) {
    throw ConfigError("quadrature_points must be in [1, 512]");
  }
  if (!(natgrad_step > 0.0 && natgrad_step <= 1.0)) throw ConfigError("natgrad_step must be in (0, 1]");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(variational_learning_rate >= 0.0)) throw ConfigError("variational_learning_rate must be >= 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0) || lr_decay_steps < 1) {
    throw ConfigError("lr_decay must be in (0, 1] with lr_decay_steps >= 1");
  }
  if (batch_size < 0 || iterations < 0) throw ConfigError("batch_size and iterations must be >= 0");
  if (variational_update == VariationalUpdate::kAnalytic) {
    if (mixing_dim > 0) throw ConfigError("analytic q(u) requires unmixed outputs");
    if (projection_dim > 0) throw ConfigError("analytic q(u) requires no input projection");
    if (batch_size != 0) throw ConfigError("analytic q(u) requires full-batch training");
    if (latent_dim > 0 && (latent_mode != LatentMode::kPerPointGaussian ||
                           expectation != LatentExpectation::kQuadrature)) {
      throw ConfigError("analytic q(u) requires per-point Gaussian q(w) with quadrature expectations");
    }
  }
}

void GaussianLatentPosterior::validate() const {
  if (static_cast<Eigen::Index>(chol.size()) != mean.rows()) {
    throw DimensionError("one covariance factor per data point is required");
  }
  for (const Matrix& c : chol) {
    if (c.rows() != mean.cols() || c.cols() != mean.cols()) {
      throw DimensionError("latent covariance factor must be D_w x D_w");
    }
    if ((c.diagonal().array() <= 0.0).any()) {
      throw NumericalError("latent covariance factor needs a positive diagonal");
    }
  }
}

std::string param_names::q_sqrt(Eigen::Index l) { return "q.sqrt" + std::to_string(l); }

KernelSpec GpCdeModel::kernel() const {
  KernelSpec k;
  k.family = config.kernel;
  k.signal_variance = params.value(param_names::kKernelVariance)(0, 0);
  k.lengthscales = params.value(param_names::kLengthscales).transpose();
  return k;
}

double GpCdeModel::noise_variance() const { return params.value(param_names::kNoise)(0, 0); }

InducingVariational GpCdeModel::inducing() const {
  InducingVariational q;
  q.inducing_inputs = params.value(param_names::kInducing);
  q.means = params.value(param_names::kQMean);
  for (Eigen::Index l = 0; l < config.num_gp_outputs(); ++l) {
    q.cov_factors.push_back(params.value(param_names::q_sqrt(l)));
  }
  return q;
}

void GpCdeModel::set_inducing_posterior(Eigen::Index l, const Vector& mean, const Matrix& cov) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("inducing covariance is not SPD");
  Matrix means = params.value(param_names::kQMean);
  means.col(l) = mean;
  params.set_value(param_names::kQMean, means);
  params.set_value(param_names::q_sqrt(l), Matrix(llt.matrixL()));
}

std::optional<InputProjection> GpCdeModel::projection() const {
  if (config.projection_dim == 0) return std::nullopt;
  return InputProjection{params.value(param_names::kProjMean), params.value(param_names::kProjLogvar)};
}

std::optional<OutputMixing> GpCdeModel::mixing() const {
  if (config.mixing_dim == 0) return std::nullopt;
  return OutputMixing{params.value(param_names::kMixing)};
}

EncoderNetwork GpCdeModel::encoder() const {
  return encoder_from_registry(params, config.encoder_hidden.size() + 1, param_names::kEncoderPrefix);
}

GaussianLatentPosterior GpCdeModel::perpoint_posterior() const {
  const Eigen::Index dw = config.latent_dim;
  GaussianLatentPosterior q;
  q.mean = params.value(param_names::kQwMean);
  const Matrix scale = params.value(param_names::kQwScale);
  const Matrix off = dw > 1 ? params.value(param_names::kQwOffdiag) : Matrix();
  for (Eigen::Index n = 0; n < q.mean.rows(); ++n) {
    Matrix c = Matrix::Zero(dw, dw);
    for (Eigen::Index d = 0; d < dw; ++d) {
      c(d, d) = scale(n, d);
      for (Eigen::Index e = 0; e < d; ++e) c(d, e) = off(n, d * (d - 1) / 2 + e);
    }
    q.chol.push_back(std::move(c));
  }
  return q;
}

std::vector<std::string> GpCdeModel::variational_param_names() const {
  std::vector<std::string> names{param_names::kQMean};
  for (Eigen::Index l = 0; l < config.num_gp_outputs(); ++l) names.push_back(param_names::q_sqrt(l));
  return names;
}

GpCdeModel make_model(const ModelConfig& config, Eigen::Index num_data, const Matrix& z,
                      const KernelSpec& kernel, Rng& rng) {
  config.validate();
  const Eigen::Index din = config.gp_input_dim();
  const Eigen::Index m = config.num_inducing;
  const Eigen::Index l_out = config.num_gp_outputs();
  if (z.rows() != m || z.cols() != din) throw DimensionError("inducing inputs must be M x D_in");
  if (kernel.lengthscales.size() != din) throw DimensionError("kernel needs one lengthscale per GP input");

  GpCdeModel model;
  model.config = config;
  model.num_data = num_data;
  ParamRegistry& p = model.params;
  using param_names::q_sqrt;
  p.add({param_names::kKernelVariance, 1, 1, Constraint::kPositive},
        Matrix::Constant(1, 1, kernel.signal_variance));
  p.add({param_names::kLengthscales, 1, din, Constraint::kPositive}, kernel.lengthscales.transpose());
  p.add({param_names::kNoise, 1, 1, Constraint::kPositive}, Matrix::Constant(1, 1, config.noise_variance));
  p.add({param_names::kInducing, m, din, Constraint::kFree}, z);
  p.add({param_names::kQMean, m, l_out, Constraint::kFree}, Matrix::Zero(m, l_out));
  for (Eigen::Index l = 0; l < l_out; ++l) {
    p.add({q_sqrt(l), m, m, Constraint::kLowerTriangularPositiveDiagonal},
          Matrix::Identity(m, m) * 0.1);
  }
  if (config.projection_dim > 0) {
    const double s = 1.0 / std::sqrt(static_cast<double>(config.input_dim));
    p.add({param_names::kProjMean, config.projection_dim, config.input_dim, Constraint::kFree},
          standard_normal(config.projection_dim, config.input_dim, rng) * s);
    p.add({param_names::kProjLogvar, config.projection_dim, config.input_dim, Constraint::kFree},
          Matrix::Constant(config.projection_dim, config.input_dim, std::log(1e-2)));
  }
  if (config.mixing_dim > 0) {
    p.add({param_names::kMixing, config.mixing_dim, config.output_dim, Constraint::kFree},
          init_mixing_identity(config.mixing_dim, config.output_dim).p);
  }
  const Eigen::Index dw = config.latent_dim;
  if (dw > 0 && config.latent_mode == LatentMode::kAmortizedGaussian) {
    const Eigen::Index enc_in = (config.use_conditions ? config.input_dim : 0) + config.output_dim;
    register_encoder(p, make_encoder(enc_in, config.encoder_hidden, dw, rng), param_names::kEncoderPrefix);
  }
  if (dw > 0 && config.latent_mode == LatentMode::kPerPointGaussian) {
    p.add({param_names::kQwMean, num_data, dw, Constraint::kFree}, standard_normal(num_data, dw, rng) * 0.1);
    p.add({param_names::kQwScale, num_data, dw, Constraint::kPositive}, Matrix::Constant(num_data, dw, 0.1));
    if (dw > 1) {
      p.add({param_names::kQwOffdiag, num_data, dw * (dw - 1) / 2, Constraint::kFree},
            Matrix::Zero(num_data, dw * (dw - 1) / 2));
    }
  }
  return model;
}

}  // namespace gpcde
