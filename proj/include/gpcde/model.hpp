#pragma once

// Model configuration and the parameter layout shared by the bound, the
// optimizers, prediction and persistence.

#include "gpcde/kernels.hpp"
#include "gpcde/linear_maps.hpp"
#include "gpcde/params.hpp"
#include "gpcde/recognition.hpp"
#include "gpcde/sparse_gp.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gpcde {

enum class LatentMode {
  /// Gaussian q(w_n) from the recognition network.
  kAmortizedGaussian,
  /// Free Gaussian q(w_n) per data point.
  kPerPointGaussian,
  /// Free-form optimal q(w_n), integrated by Gauss-Hermite quadrature.
  kOptimalQuadrature,
};

/// How E_q(w)[L_w] is estimated for the Gaussian latent modes.
enum class LatentExpectation { kMonteCarlo, kQuadrature };

/// Who owns the variational parameters (m_l, S_l).
enum class VariationalUpdate { kNatGrad, kAdam, kAnalytic };

std::string to_string(LatentMode m);
std::string to_string(LatentExpectation e);
std::string to_string(VariationalUpdate u);
LatentMode latent_mode_from_string(const std::string& s);
LatentExpectation latent_expectation_from_string(const std::string& s);
VariationalUpdate variational_update_from_string(const std::string& s);

struct ModelConfig {
  // shapes
  Eigen::Index input_dim = 0;   // D_x
  Eigen::Index output_dim = 1;  // D_y
  Eigen::Index latent_dim = 0;  // D_w; 0 disables latents (plain sparse GP)
  bool use_conditions = true;   // false gives the GP-LVM
  LatentMode latent_mode = LatentMode::kAmortizedGaussian;

  // model
  KernelFamily kernel = KernelFamily::kRbf;
  Eigen::Index num_inducing = 20;
  Eigen::Index projection_dim = 0;  // D_q; 0 disables A
  Eigen::Index mixing_dim = 0;      // L; 0 disables P
  double noise_variance = 0.1;
  bool train_noise = true;
  std::vector<Eigen::Index> encoder_hidden = {50, 100, 50};

  // bound estimation
  LatentExpectation expectation = LatentExpectation::kMonteCarlo;
  int mc_samples = 1;
  int eval_mc_samples = 64;
  int quadrature_points = 100;

  // optimization
  VariationalUpdate variational_update = VariationalUpdate::kNatGrad;
  double natgrad_step = 0.1;
  double learning_rate = 0.01;
  /// Adam learning rate for q(u) when variational_update is kAdam; 0 means
  /// learning_rate.
  double variational_learning_rate = 0.0;
  double lr_decay = 0.98;
  Eigen::Index lr_decay_steps = 1000;
  Eigen::Index batch_size = 0;  // 0 means full batch
  Eigen::Index iterations = 1000;
  std::uint64_t seed = 0;

  /// Input columns seen by the GP: projected or raw conditions, then latents.
  Eigen::Index gp_input_dim() const;
  /// Number of independent GP outputs (L with mixing, otherwise D_y).
  Eigen::Index num_gp_outputs() const;
  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

/// Per-point Gaussian q(w_n) = N(mean_n, chol_n chol_n^T).
struct GaussianLatentPosterior {
  Matrix mean;               // N x D_w
  std::vector<Matrix> chol;  // N lower-triangular D_w x D_w factors

  Eigen::Index size() const { return mean.rows(); }
  Eigen::Index latent_dim() const { return mean.cols(); }
  void validate() const;
};

namespace param_names {
inline const std::string kKernelVariance = "kernel.variance";
inline const std::string kLengthscales = "kernel.lengthscales";
inline const std::string kNoise = "likelihood.variance";
inline const std::string kInducing = "inducing.z";
inline const std::string kQMean = "q.mean";
std::string q_sqrt(Eigen::Index l);
inline const std::string kProjMean = "projection.mean";
inline const std::string kProjLogvar = "projection.logvar";
inline const std::string kMixing = "mixing.p";
inline const std::string kQwMean = "qw.mean";
inline const std::string kQwScale = "qw.scale";
inline const std::string kQwOffdiag = "qw.offdiag";
inline const std::string kEncoderPrefix = "encoder.";
}  // namespace param_names

struct GpCdeModel {
  ModelConfig config;
  Eigen::Index num_data = 0;  // N, sizes the per-point q(w)
  ParamRegistry params;

  KernelSpec kernel() const;
  double noise_variance() const;
  InducingVariational inducing() const;
  /// Overwrite q(u_l) with (m, S); S must be SPD.
  void set_inducing_posterior(Eigen::Index l, const Vector& mean, const Matrix& cov);
  std::optional<InputProjection> projection() const;
  std::optional<OutputMixing> mixing() const;
  EncoderNetwork encoder() const;
  GaussianLatentPosterior perpoint_posterior() const;

  /// Names of the q(u) parameters (q.mean and every q.sqrt<l>).
  std::vector<std::string> variational_param_names() const;
};

/// Lay out every parameter for `config` with the given initial values.
/// `z` is M x gp_input_dim; the per-point q(w) is sized by `num_data`.
GpCdeModel make_model(const ModelConfig& config, Eigen::Index num_data, const Matrix& z,
                      const KernelSpec& kernel, Rng& rng);

}  // namespace gpcde
