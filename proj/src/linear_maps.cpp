#include "gpcde/linear_maps.hpp"

#include "gpcde/error.hpp"
#include "gpcde/kernels.hpp"

#include <cmath>

namespace gpcde {

void InputProjection::validate() const {
  if (mean.rows() != logvar.rows() || mean.cols() != logvar.cols()) {
    throw DimensionError("projection mean and log-variance shapes differ");
  }
  if (mean.rows() >= mean.cols()) {
    throw ConfigError("input projection must reduce dimension (D_q < D_x)");
  }
}

Matrix sample_projection(const InputProjection& proj, Rng& rng) {
  const Matrix eps = standard_normal(proj.mean.rows(), proj.mean.cols(), rng);
  return proj.mean + ((0.5 * proj.logvar.array()).exp() * eps.array()).matrix();
}

Vector project_input(const InputProjection& proj, const Vector& x, ProjectionMode mode, Rng* rng) {
  if (x.size() != proj.input_dim()) throw DimensionError("project_input: x has the wrong length");
  if (mode == ProjectionMode::kMean) return proj.mean * x;
  if (rng == nullptr) throw ConfigError("project_input: sample mode needs an rng");
  return sample_projection(proj, *rng) * x;
}

double kl_input_projection(const InputProjection& proj) {
  const auto var = proj.logvar.array().exp();
  return 0.5 * (var + proj.mean.array().square() - 1.0 - proj.logvar.array()).sum();
}

OutputMixing init_mixing_matern(const Matrix& pixel_coords, Eigen::Index num_latent,
                                double lengthscale) {
  const Eigen::Index dy = pixel_coords.rows();
  if (num_latent < 1 || num_latent > dy) throw ConfigError("init_mixing_matern: need 1 <= L <= D_y");
  KernelSpec spec;
  spec.family = KernelFamily::kMatern52;
  spec.signal_variance = 1.0;
  spec.lengthscales = Vector::Constant(pixel_coords.cols(), lengthscale);
  const Matrix gram = kernel_matrix(spec, pixel_coords, pixel_coords);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  // Eigenvalues come back ascending.
  OutputMixing out;
  out.p.resize(num_latent, dy);
  for (Eigen::Index l = 0; l < num_latent; ++l) {
    const Eigen::Index idx = dy - 1 - l;
    const double lambda = std::max(eig.eigenvalues()(idx), 0.0);
    out.p.row(l) = std::sqrt(lambda) * eig.eigenvectors().col(idx).transpose();
  }
  return out;
}

OutputMixing init_mixing_identity(Eigen::Index num_latent, Eigen::Index output_dim) {
  if (num_latent < 1 || num_latent > output_dim) {
    throw ConfigError("output mixing needs 1 <= L <= D_y");
  }
  OutputMixing out;
  out.p = Matrix::Identity(num_latent, output_dim);
  return out;
}

ad::Var sample_projection(ad::Var mean, ad::Var logvar, const Matrix& eps) {
  ad::Tape& t = *mean.tape();
  return mean + ad::exp(logvar * 0.5) * t.constant(eps);
}

ad::Var kl_input_projection(ad::Var mean, ad::Var logvar) {
  return 0.5 * ad::sum(ad::exp(logvar) + ad::square(mean) - 1.0 - logvar);
}

}  // namespace gpcde
