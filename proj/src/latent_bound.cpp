#include "gpcde/latent_bound.hpp"

#include "gpcde/error.hpp"

#include <cmath>

namespace gpcde {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)

struct HermiteEval {
  double p_n;
  double p_nm1;      // shares the scale of p_n
  double log_sumsq;  // log sum_{k<n} p_k(x)^2, unscaled
};

// Orthonormal probabilists' Hermite polynomials,
// p_{k+1} = (x p_k - sqrt(k) p_{k-1}) / sqrt(k+1), with rescaling so that
// large |x| and n do not overflow.
HermiteEval hermite(double x, int n) {
  double pm1 = 0.0;
  double p = 1.0;
  double sumsq = 1.0;
  double log_scale = 0.0;
  for (int k = 0; k + 1 < n; ++k) {
    const double next = (x * p - std::sqrt(static_cast<double>(k)) * pm1) / std::sqrt(k + 1.0);
    pm1 = p;
    p = next;
    sumsq += p * p;
    if (std::abs(p) > 1e150) {
      p *= 1e-150;
      pm1 *= 1e-150;
      sumsq *= 1e-300;
      log_scale += std::log(1e150);
    }
  }
  const double pn = (x * p - std::sqrt(n - 1.0) * pm1) / std::sqrt(static_cast<double>(n));
  return {pn, p, std::log(sumsq) + 2.0 * log_scale};
}

struct Rule1d {
  Vector nodes;
  Vector log_weights;
};

Rule1d gauss_hermite_1d(int q) {
  Matrix jacobi = Matrix::Zero(q, q);
  for (int i = 0; i + 1 < q; ++i) {
    jacobi(i, i + 1) = jacobi(i + 1, i) = std::sqrt(i + 1.0);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(jacobi, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericalError("Gauss-Hermite eigenproblem failed");
  Vector x = eig.eigenvalues();
  for (int i = 0; i < q; ++i) {
    for (int it = 0; it < 3; ++it) {
      const HermiteEval h = hermite(x(i), q);
      if (h.p_nm1 == 0.0) break;
      x(i) -= h.p_n / (std::sqrt(static_cast<double>(q)) * h.p_nm1);
    }
  }
  // Enforce the exact symmetry of the rule.
  for (int i = 0; i < q / 2; ++i) {
    const double a = 0.5 * (x(q - 1 - i) - x(i));
    x(i) = -a;
    x(q - 1 - i) = a;
  }
  if (q % 2 == 1) x(q / 2) = 0.0;

  Rule1d r;
  r.nodes = x;
  r.log_weights.resize(q);
  for (int i = 0; i < q; ++i) r.log_weights(i) = -hermite(x(i), q).log_sumsq;
  const double m = r.log_weights.maxCoeff();
  const double lse = m + std::log((r.log_weights.array() - m).exp().sum());
  r.log_weights.array() -= lse;
  return r;
}

Matrix rows_of(const Matrix& m, const std::vector<int>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= m.rows()) throw DimensionError("batch index out of range");
    out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  }
  return out;
}

}  // namespace

QuadratureRule gauss_hermite_rule(int q, Eigen::Index dims) {
  if (q < 1 || q > 512) throw ConfigError("Gauss-Hermite order must be in [1, 512]");
  if (dims < 1 || dims > kMaxQuadratureDim) {
    throw ConfigError("quadrature supports 1 to 3 latent dimensions");
  }
  int per = q;
  while (std::pow(static_cast<double>(per), static_cast<double>(dims)) >
         static_cast<double>(kMaxQuadratureNodes)) {
    --per;
  }
  const Rule1d base = gauss_hermite_1d(per);
  Eigen::Index total = 1;
  for (Eigen::Index d = 0; d < dims; ++d) total *= per;

  QuadratureRule rule;
  rule.points_per_dim = per;
  rule.nodes.resize(total, dims);
  rule.log_weights.resize(total);
  for (Eigen::Index k = 0; k < total; ++k) {
    Eigen::Index rem = k;
    double lw = 0.0;
    for (Eigen::Index d = dims - 1; d >= 0; --d) {
      const Eigen::Index i = rem % per;
      rem /= per;
      rule.nodes(k, d) = base.nodes(i);
      lw += base.log_weights(i);
    }
    rule.log_weights(k) = lw;
  }
  rule.weights = rule.log_weights.array().exp().matrix();
  return rule;
}

double expected_loglik(const Vector& y, const Vector& mu, const Vector& var, double noise,
                       const OutputMixing* mixing) {
  if ((var.array() < 0.0).any()) throw NumericalError("expected_loglik: negative variance");
  if (!(noise > 0.0)) throw NumericalError("expected_loglik: noise variance must be positive");
  if (mu.size() != var.size()) throw DimensionError("expected_loglik: mean/variance lengths differ");
  const double dy = static_cast<double>(y.size());
  if (mixing == nullptr) {
    if (mu.size() != y.size()) throw DimensionError("expected_loglik: unmixed model needs L = D_y");
    return -0.5 * dy * (kLog2Pi + std::log(noise)) -
           ((y - mu).squaredNorm() + var.sum()) / (2.0 * noise);
  }
  const Matrix& p = mixing->p;
  if (p.rows() != mu.size() || p.cols() != y.size()) throw DimensionError("expected_loglik: P shape");
  const Vector resid = y - p.transpose() * mu;
  const Vector row_norms = p.rowwise().squaredNorm();
  return -0.5 * dy * (kLog2Pi + std::log(noise)) -
         (resid.squaredNorm() + var.dot(row_norms)) / (2.0 * noise);
}

double kl_latent(const GaussianLatentPosterior& q, const std::vector<int>& batch) {
  q.validate();
  const double dw = static_cast<double>(q.latent_dim());
  double kl = 0.0;
  for (int n : batch) {
    const Matrix& c = q.chol.at(static_cast<size_t>(n));
    kl += 0.5 * (c.squaredNorm() + q.mean.row(n).squaredNorm() - dw -
                 2.0 * c.diagonal().array().log().sum());
  }
  return kl;
}

LatentDraws draw_monte_carlo(Eigen::Index batch, Eigen::Index latent_dim, int samples, Rng& rng) {
  if (samples < 1) throw ConfigError("mc_samples must be >= 1");
  LatentDraws d;
  d.xi = standard_normal(batch * samples, latent_dim, rng);
  d.log_weights = Vector::Constant(samples, -std::log(static_cast<double>(samples)));
  return d;
}

LatentDraws draw_quadrature(Eigen::Index batch, const QuadratureRule& rule) {
  LatentDraws d;
  const Eigen::Index k = rule.size();
  d.xi.resize(batch * k, rule.dim());
  for (Eigen::Index b = 0; b < batch; ++b) d.xi.middleRows(b * k, k) = rule.nodes;
  d.log_weights = rule.log_weights;
  return d;
}

LatentDraws draw_for_model(const GpCdeModel& model, Eigen::Index batch, Rng& rng, bool deterministic) {
  const ModelConfig& c = model.config;
  LatentDraws d;
  if (c.latent_dim == 0) {
    d.xi.resize(batch, 0);
    d.log_weights = Vector::Zero(1);
  } else if (c.latent_mode == LatentMode::kOptimalQuadrature || deterministic ||
             c.expectation == LatentExpectation::kQuadrature) {
    d = draw_quadrature(batch, gauss_hermite_rule(c.quadrature_points, c.latent_dim));
  } else {
    d = draw_monte_carlo(batch, c.latent_dim, c.mc_samples, rng);
  }
  if (c.projection_dim > 0) {
    d.projection_eps = deterministic ? Matrix::Zero(c.projection_dim, c.input_dim)
                                     : standard_normal(c.projection_dim, c.input_dim, rng);
  }
  return d;
}

ModelVars model_vars(const GpCdeModel& model, ad::Tape& tape, const BoundParams& bound,
                     bool covariance_leaves) {
  namespace pn = param_names;
  ModelVars mv;
  mv.kernel.family = model.config.kernel;
  mv.kernel.signal_variance = bound[pn::kKernelVariance];
  mv.kernel.lengthscales = bound[pn::kLengthscales];
  mv.kernel.jitter = KernelSpec{}.jitter;
  mv.inducing.inducing_inputs = bound[pn::kInducing];
  mv.inducing.means = bound[pn::kQMean];
  for (Eigen::Index l = 0; l < model.config.num_gp_outputs(); ++l) {
    if (covariance_leaves) {
      const Matrix f = model.params.value(pn::q_sqrt(l));
      ad::Var s = tape.leaf(f * f.transpose(), "S" + std::to_string(l));
      mv.cov_leaves.push_back(s);
      mv.inducing.cov_factors.push_back(ad::cholesky(s));
    } else {
      mv.inducing.cov_factors.push_back(bound[pn::q_sqrt(l)]);
    }
  }
  mv.kzz_chol = kzz_cholesky(mv.inducing, mv.kernel);
  mv.noise = bound[pn::kNoise];
  if (model.config.projection_dim > 0) {
    mv.proj_mean = bound[pn::kProjMean];
    mv.proj_logvar = bound[pn::kProjLogvar];
  }
  if (model.config.mixing_dim > 0) mv.mixing = bound[pn::kMixing];
  return mv;
}

LatentVars latent_vars(const GpCdeModel& model, const BoundParams& bound, ad::Tape& tape,
                       const Matrix& x, const Matrix& y, const std::vector<int>& batch) {
  namespace pn = param_names;
  const ModelConfig& c = model.config;
  LatentVars lv;
  if (c.latent_mode == LatentMode::kAmortizedGaussian) {
    const Matrix yb = rows_of(y, batch);
    Matrix in;
    if (c.use_conditions) {
      const Matrix xb = rows_of(x, batch);
      in.resize(xb.rows(), xb.cols() + yb.cols());
      in << xb, yb;
    } else {
      in = yb;
    }
    const EncodedLatentVars enc =
        encode(encoder_vars(bound, c.encoder_hidden.size() + 1, pn::kEncoderPrefix), tape.constant(in));
    lv.mean = enc.mean;
    lv.log_scale = enc.logscale;
    lv.scale = ad::exp(enc.logscale);
  } else if (c.latent_mode == LatentMode::kPerPointGaussian) {
    lv.mean = ad::gather_rows(bound[pn::kQwMean], batch);
    lv.log_scale = ad::gather_rows(bound.leaves.at(pn::kQwScale), batch);
    lv.scale = ad::exp(lv.log_scale);
    if (c.latent_dim > 1) lv.offdiag = ad::gather_rows(bound[pn::kQwOffdiag], batch);
  } else {
    throw ConfigError("latent_vars: the optimal-quadrature mode has no Gaussian q(w)");
  }
  return lv;
}

LatentVars latent_vars(ad::Tape& tape, const GaussianLatentPosterior& q, const std::vector<int>& batch) {
  q.validate();
  const Eigen::Index dw = q.latent_dim();
  const Eigen::Index b = static_cast<Eigen::Index>(batch.size());
  Matrix mean(b, dw), scale(b, dw), off(b, dw * (dw - 1) / 2);
  for (Eigen::Index i = 0; i < b; ++i) {
    const int n = batch[static_cast<size_t>(i)];
    const Matrix& c = q.chol.at(static_cast<size_t>(n));
    mean.row(i) = q.mean.row(n);
    for (Eigen::Index d = 0; d < dw; ++d) {
      scale(i, d) = c(d, d);
      for (Eigen::Index e = 0; e < d; ++e) off(i, d * (d - 1) / 2 + e) = c(d, e);
    }
  }
  LatentVars lv;
  lv.mean = tape.constant(mean);
  lv.scale = tape.constant(scale);
  lv.log_scale = tape.constant(scale.array().log().matrix());
  if (dw > 1) lv.offdiag = tape.constant(off);
  return lv;
}

ad::Var expected_loglik(ad::Var y_rows, const MomentVars& f, ad::Var noise,
                        const std::optional<ad::Var>& mixing) {
  const double dy = static_cast<double>(y_rows.cols());
  ad::Var norm = (ad::log(noise) + kLog2Pi) * (-0.5 * dy);
  ad::Var sq;
  if (mixing) {
    ad::Var resid = y_rows - ad::matmul(f.mean, *mixing);
    ad::Var row_norms = ad::rowsum(ad::square(*mixing));
    sq = ad::rowsum(ad::square(resid)) + ad::matmul(f.var, row_norms);
  } else {
    if (f.mean.cols() != y_rows.cols()) throw DimensionError("expected_loglik: unmixed model needs L = D_y");
    sq = ad::rowsum(ad::square(y_rows - f.mean) + f.var);
  }
  return norm - sq / (noise * 2.0);
}

BoundTerms build_bound(ad::Tape& tape, const ModelVars& mv, const GpCdeModel& model,
                       const Matrix& x, const Matrix& y, const std::vector<int>& batch,
                       const LatentDraws& draws, const LatentVars* qw, Eigen::Index num_data) {
  const ModelConfig& c = model.config;
  const Eigen::Index b = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index k = draws.per_point();
  const Eigen::Index dw = c.latent_dim;
  if (b == 0) throw DimensionError("empty batch");
  if (draws.xi.rows() != b * k || draws.xi.cols() != dw) {
    throw DimensionError("latent draws do not match the batch");
  }
  if (y.cols() != c.output_dim) throw DimensionError("observations have the wrong number of columns");
  if (c.use_conditions && x.cols() != c.input_dim) {
    throw DimensionError("conditions have the wrong number of columns");
  }

  std::vector<int> rep(static_cast<size_t>(b * k));
  for (Eigen::Index r = 0; r < b * k; ++r) rep[static_cast<size_t>(r)] = static_cast<int>(r / k);
  auto repeat = [&](ad::Var v) { return k == 1 ? v : ad::gather_rows(v, rep); };

  std::vector<ad::Var> parts;
  if (c.use_conditions) {
    ad::Var xv = tape.constant(rows_of(x, batch));
    if (mv.proj_mean) {
      const Matrix eps = draws.projection_eps.size() > 0
                             ? draws.projection_eps
                             : Matrix::Zero(c.projection_dim, c.input_dim);
      ad::Var a = sample_projection(*mv.proj_mean, *mv.proj_logvar, eps);
      xv = ad::matmul(xv, ad::transpose(a));
    }
    parts.push_back(repeat(xv));
  }
  ad::Var kl_w = tape.constant(0.0);
  if (dw > 0) {
    ad::Var xi = tape.constant(draws.xi);
    if (qw != nullptr) {
      ad::Var mean = repeat(qw->mean);
      ad::Var scale = repeat(qw->scale);
      if (dw == 1) {
        parts.push_back(mean + scale * xi);
      } else {
        std::optional<ad::Var> off;
        if (qw->offdiag) off = repeat(*qw->offdiag);
        std::vector<ad::Var> wcols;
        for (Eigen::Index d = 0; d < dw; ++d) {
          ad::Var col = ad::cols(mean, d, 1) + ad::cols(scale, d, 1) * ad::cols(xi, d, 1);
          if (off) {
            for (Eigen::Index e = 0; e < d; ++e) {
              col = col + ad::cols(*off, d * (d - 1) / 2 + e, 1) * ad::cols(xi, e, 1);
            }
          }
          wcols.push_back(col);
        }
        parts.push_back(ad::hcat(wcols));
      }
      ad::Var per = ad::square(qw->scale) + ad::square(qw->mean) - 1.0 - 2.0 * qw->log_scale;
      ad::Var total = ad::sum(per);
      if (qw->offdiag) total = total + ad::sum(ad::square(*qw->offdiag));
      kl_w = 0.5 * total;
    } else {
      parts.push_back(xi);
    }
  }
  ad::Var gp_in = parts.size() == 1 ? parts.front() : ad::hcat(parts);
  const MomentVars f = conditional(mv.inducing, mv.kernel, mv.kzz_chol, gp_in);

  Matrix y_rows(b * k, y.cols());
  for (Eigen::Index r = 0; r < b * k; ++r) y_rows.row(r) = y.row(batch[static_cast<size_t>(r / k)]);
  ad::Var lw = expected_loglik(tape.constant(y_rows), f, mv.noise, mv.mixing);

  ad::Var data;
  if (dw > 0 && qw == nullptr) {
    ad::Var grid = ad::reshape(lw, k, b) + tape.constant(Matrix(draws.log_weights));
    data = ad::sum(ad::logsumexp_cols(grid));
  } else {
    Matrix wrep(b * k, 1);
    for (Eigen::Index r = 0; r < b * k; ++r) wrep(r, 0) = std::exp(draws.log_weights(r % k));
    data = ad::sum(lw * tape.constant(wrep));
  }

  const double scale = static_cast<double>(num_data) / static_cast<double>(b);
  BoundTerms t;
  t.data_term = data * scale;
  t.kl_latent = kl_w * scale;
  t.kl_inducing = kl_inducing(mv.inducing, mv.kzz_chol);
  t.kl_projection = mv.proj_mean ? kl_input_projection(*mv.proj_mean, *mv.proj_logvar) : tape.constant(0.0);
  t.elbo = t.data_term - t.kl_latent - t.kl_inducing - t.kl_projection;
  return t;
}

BoundTerms model_bound(ad::Tape& tape, const BoundParams& bound, const ModelVars& mv,
                       const GpCdeModel& model, const Matrix& x, const Matrix& y,
                       const std::vector<int>& batch, const LatentDraws& draws) {
  const ModelConfig& c = model.config;
  if (c.latent_dim == 0 || c.latent_mode == LatentMode::kOptimalQuadrature) {
    return build_bound(tape, mv, model, x, y, batch, draws, nullptr, y.rows());
  }
  const LatentVars lv = latent_vars(model, bound, tape, x, y, batch);
  return build_bound(tape, mv, model, x, y, batch, draws, &lv, y.rows());
}

double elbo_gaussian_qw(const GpCdeModel& model, const Matrix& x, const Matrix& y,
                        const std::vector<int>& batch, const GaussianLatentPosterior& qw,
                        const LatentDraws& draws) {
  if (qw.latent_dim() != model.config.latent_dim) throw DimensionError("q(w) has the wrong latent dimension");
  ad::Tape tape;
  const BoundParams bound = bind(tape, model.params);
  const ModelVars mv = model_vars(model, tape, bound);
  if (model.config.latent_dim == 0) {
    return build_bound(tape, mv, model, x, y, batch, draws, nullptr, y.rows()).elbo.scalar();
  }
  const LatentVars lv = latent_vars(tape, qw, batch);
  return build_bound(tape, mv, model, x, y, batch, draws, &lv, y.rows()).elbo.scalar();
}

double elbo_gaussian_qw(const GpCdeModel& model, const Matrix& x, const Matrix& y,
                        const std::vector<int>& batch, const GaussianLatentPosterior& qw,
                        int mc_samples, Rng& rng) {
  LatentDraws draws =
      draw_monte_carlo(static_cast<Eigen::Index>(batch.size()), model.config.latent_dim, mc_samples, rng);
  if (model.config.latent_dim == 0) {
    draws.xi.resize(static_cast<Eigen::Index>(batch.size()), 0);
    draws.log_weights = Vector::Zero(1);
  }
  return elbo_gaussian_qw(model, x, y, batch, qw, draws);
}

double elbo_optimal_qw(const GpCdeModel& model, const Matrix& x, const Matrix& y,
                       const std::vector<int>& batch, const QuadratureRule& rule) {
  if (model.config.latent_dim < 1) throw ConfigError("optimal bound needs latent variables");
  if (model.config.latent_dim > kMaxQuadratureDim) throw ConfigError("latent_dim too large for quadrature");
  if (rule.dim() != model.config.latent_dim) throw DimensionError("quadrature rule dimension mismatch");
  ad::Tape tape;
  const BoundParams bound = bind(tape, model.params);
  const ModelVars mv = model_vars(model, tape, bound);
  const LatentDraws draws = draw_quadrature(static_cast<Eigen::Index>(batch.size()), rule);
  return build_bound(tape, mv, model, x, y, batch, draws, nullptr, y.rows()).elbo.scalar();
}

double model_elbo(const GpCdeModel& model, const Matrix& x, const Matrix& y,
                  const std::vector<int>& batch, const LatentDraws& draws) {
  ad::Tape tape;
  const BoundParams bound = bind(tape, model.params);
  const ModelVars mv = model_vars(model, tape, bound);
  return model_bound(tape, bound, mv, model, x, y, batch, draws).elbo.scalar();
}

std::vector<int> all_indices(Eigen::Index n) {
  std::vector<int> idx(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = static_cast<int>(i);
  return idx;
}

}  // namespace gpcde
