#include "gpcde/sparse_gp.hpp"

#include "gpcde/error.hpp"

#include <cmath>

namespace gpcde {

Matrix InducingVariational::covariance(Eigen::Index l) const {
  const Matrix& f = cov_factors.at(static_cast<size_t>(l));
  return f * f.transpose();
}

void InducingVariational::validate() const {
  const Eigen::Index m = num_inducing();
  if (means.rows() != m) throw DimensionError("inducing means and inputs disagree on M");
  if (static_cast<Eigen::Index>(cov_factors.size()) != means.cols()) {
    throw DimensionError("one covariance factor per output is required");
  }
  for (const Matrix& f : cov_factors) {
    if (f.rows() != m || f.cols() != m) throw DimensionError("covariance factor must be M x M");
    if ((f.diagonal().array() <= 0.0).any()) {
      throw NumericalError("covariance factor needs a positive diagonal");
    }
  }
}

Matrix kzz_cholesky(const KernelSpec& spec, const Matrix& z) {
  Matrix kzz = kernel_matrix(spec, z, z);
  kzz.diagonal().array() += spec.absolute_jitter();
  Eigen::LLT<Matrix> llt(kzz);
  if (llt.info() != Eigen::Success) throw NumericalError("K_ZZ is not positive definite");
  return llt.matrixL();
}

MarginalMoments conditional(const InducingVariational& q, const KernelSpec& spec,
                            const Matrix& xstar) {
  q.validate();
  if (xstar.cols() != q.inducing_inputs.cols()) {
    throw DimensionError("conditional: input dimension differs from Z");
  }
  const Matrix lz = kzz_cholesky(spec, q.inducing_inputs);
  const auto tri = lz.triangularView<Eigen::Lower>();
  const Matrix kzx = kernel_matrix(spec, q.inducing_inputs, xstar);
  const Matrix a = tri.solve(kzx);
  const Matrix c = tri.transpose().solve(a);
  const Vector base = kernel_diag(spec, xstar) - a.colwise().squaredNorm().transpose();

  MarginalMoments out;
  out.mean = c.transpose() * q.means;
  out.var.resize(xstar.rows(), q.num_outputs());
  for (Eigen::Index l = 0; l < q.num_outputs(); ++l) {
    const Matrix b = q.cov_factors[static_cast<size_t>(l)].transpose() * c;
    out.var.col(l) = (base + b.colwise().squaredNorm().transpose()).cwiseMax(kVarianceFloor);
  }
  return out;
}

double kl_inducing(const InducingVariational& q, const KernelSpec& spec) {
  q.validate();
  const Matrix lz = kzz_cholesky(spec, q.inducing_inputs);
  const auto tri = lz.triangularView<Eigen::Lower>();
  const double m = static_cast<double>(q.num_inducing());
  const double logdet_k = 2.0 * lz.diagonal().array().log().sum();
  double kl = 0.0;
  for (Eigen::Index l = 0; l < q.num_outputs(); ++l) {
    const Matrix& ls = q.cov_factors[static_cast<size_t>(l)];
    const double trace = tri.solve(ls).squaredNorm();
    const double maha = tri.solve(q.means.col(l)).squaredNorm();
    const double logdet_s = 2.0 * ls.diagonal().array().log().sum();
    kl += 0.5 * (trace + maha - m + logdet_k - logdet_s);
  }
  return kl;
}

ad::Var kzz_cholesky(const InducingVars& q, const KernelVars& k) {
  return ad::cholesky(kernel_matrix_jittered(k, q.inducing_inputs));
}

MomentVars conditional(const InducingVars& q, const KernelVars& k, ad::Var kzz_chol,
                       ad::Var xstar) {
  if (xstar.cols() != q.inducing_inputs.cols()) {
    throw DimensionError("conditional: input dimension differs from Z");
  }
  ad::Var kzx = kernel_matrix(k, q.inducing_inputs, xstar);
  ad::Var a = ad::solve_lower(kzz_chol, kzx);
  ad::Var c = ad::solve_lower_transposed(kzz_chol, a);
  ad::Var ct = ad::transpose(c);
  ad::Var base = kernel_diag(k, xstar) - ad::transpose(ad::colsum(ad::square(a)));

  MomentVars out;
  out.mean = ad::matmul(ct, q.means);
  std::vector<ad::Var> columns;
  columns.reserve(q.cov_factors.size());
  for (const ad::Var& ls : q.cov_factors) {
    ad::Var b = ad::matmul(ad::transpose(ls), c);
    columns.push_back(base + ad::transpose(ad::colsum(ad::square(b))));
  }
  out.var = ad::clamp_min(ad::hcat(columns), kVarianceFloor);
  return out;
}

ad::Var kl_inducing(const InducingVars& q, ad::Var kzz_chol) {
  const double m = static_cast<double>(kzz_chol.rows());
  const double num_outputs = static_cast<double>(q.cov_factors.size());
  ad::Var logdet_k = 2.0 * ad::sum(ad::log(ad::diag(kzz_chol)));
  ad::Var maha = ad::sum(ad::square(ad::solve_lower(kzz_chol, q.means)));
  ad::Var total = maha + (logdet_k - m) * num_outputs;
  for (const ad::Var& ls : q.cov_factors) {
    ad::Var trace = ad::sum(ad::square(ad::solve_lower(kzz_chol, ls)));
    ad::Var logdet_s = 2.0 * ad::sum(ad::log(ad::diag(ls)));
    total = total + trace - logdet_s;
  }
  return 0.5 * total;
}

}  // namespace gpcde
