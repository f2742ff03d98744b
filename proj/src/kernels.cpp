#include "gpcde/kernels.hpp"

#include "gpcde/error.hpp"

#include <cmath>

namespace gpcde {

std::string to_string(KernelFamily family) {
  return family == KernelFamily::kRbf ? "rbf" : "matern52";
}

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "rbf") return KernelFamily::kRbf;
  if (name == "matern52") return KernelFamily::kMatern52;
  throw ConfigError("unknown kernel family '" + name + "'");
}

namespace {

void check_dims(const KernelSpec& spec, const Matrix& x) {
  if (x.cols() != spec.input_dim()) {
    throw DimensionError("kernel input has " + std::to_string(x.cols()) + " columns, expected " +
                         std::to_string(spec.input_dim()));
  }
}

double correlation(KernelFamily family, double d2) {
  if (family == KernelFamily::kRbf) return std::exp(-0.5 * d2);
  const double r = std::sqrt(std::max(d2, 0.0));
  const double s5r = std::sqrt(5.0) * r;
  return (1.0 + s5r + 5.0 / 3.0 * r * r) * std::exp(-s5r);
}

}  // namespace

Matrix kernel_matrix(const KernelSpec& spec, const Matrix& x1, const Matrix& x2) {
  check_dims(spec, x1);
  check_dims(spec, x2);
  const Eigen::RowVectorXd inv = spec.lengthscales.cwiseInverse().transpose();
  const Matrix a = x1.array().rowwise() * inv.array();
  const Matrix b = x2.array().rowwise() * inv.array();
  Matrix k(x1.rows(), x2.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      k(i, j) = spec.signal_variance * correlation(spec.family, (a.row(i) - b.row(j)).squaredNorm());
    }
  }
  return k;
}

Vector kernel_diag(const KernelSpec& spec, const Matrix& x) {
  check_dims(spec, x);
  return Vector::Constant(x.rows(), spec.signal_variance);
}

ad::Var kernel_matrix(const KernelVars& k, ad::Var x1, ad::Var x2) {
  if (x1.cols() != k.lengthscales.cols() || x2.cols() != k.lengthscales.cols()) {
    throw DimensionError("kernel input columns do not match the lengthscales");
  }
  ad::Var d2 = ad::sqdist(x1 / k.lengthscales, x2 / k.lengthscales);
  ad::Var corr = k.family == KernelFamily::kRbf ? ad::exp(d2 * -0.5) : ad::matern52_from_sqdist(d2);
  return corr * k.signal_variance;
}

ad::Var kernel_diag(const KernelVars& k, ad::Var x) {
  if (x.cols() != k.lengthscales.cols()) {
    throw DimensionError("kernel input columns do not match the lengthscales");
  }
  ad::Tape& t = *x.tape();
  return t.constant(Matrix::Ones(x.rows(), 1)) * k.signal_variance;
}

ad::Var kernel_matrix_jittered(const KernelVars& k, ad::Var z) {
  ad::Tape& t = *z.tape();
  ad::Var eye = t.constant(Matrix::Identity(z.rows(), z.rows()) * k.jitter);
  return kernel_matrix(k, z, z) + eye * k.signal_variance;
}

}  // namespace gpcde
