#include "gpcde/error.hpp"
#include "gpcde/latent_bound.hpp"
#include "model_fixtures.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gpcde {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;

// ---- quadrature --------------------------------------------------------------

TEST(GaussHermite, SmallRules) {
  const QuadratureRule r1 = gauss_hermite_rule(1);
  ASSERT_EQ(r1.size(), 1);
  EXPECT_EQ(r1.nodes(0, 0), 0.0);
  EXPECT_NEAR(r1.weights(0), 1.0, 1e-15);

  const QuadratureRule r2 = gauss_hermite_rule(2);
  ASSERT_EQ(r2.size(), 2);
  EXPECT_NEAR(r2.nodes(0, 0), -1.0, 1e-14);
  EXPECT_NEAR(r2.nodes(1, 0), 1.0, 1e-14);
  EXPECT_NEAR(r2.weights(0), 0.5, 1e-14);
  EXPECT_NEAR(r2.weights(1), 0.5, 1e-14);
}

double double_factorial(int k) {
  double r = 1.0;
  for (int i = k; i > 1; i -= 2) r *= i;
  return r;
}

TEST(GaussHermite, PolynomialExactness) {
  for (int q : {2, 3, 5, 10, 20, 40}) {
    const QuadratureRule r = gauss_hermite_rule(q);
    EXPECT_NEAR(r.weights.sum(), 1.0, 1e-13);
    for (int deg = 0; deg <= std::min(2 * q - 1, 30); ++deg) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < r.size(); ++i) s += r.weights(i) * std::pow(r.nodes(i, 0), deg);
      // Odd moments cancel; the rounding scale is that of the neighbouring even moment.
      const double exact = deg % 2 == 1 ? 0.0 : double_factorial(deg - 1);
      const double scale = std::max(1.0, double_factorial(deg % 2 == 1 ? deg : deg - 1));
      EXPECT_NEAR(s, exact, 1e-12 * scale) << "Q=" << q << " degree " << deg;
    }
  }
}

TEST(GaussHermite, SecondMomentIsOneForAnyOrder) {
  for (int q = 2; q <= 512; q += 17) {
    const QuadratureRule r = gauss_hermite_rule(q);
    const double m2 = r.weights.dot(r.nodes.col(0).cwiseAbs2());
    EXPECT_NEAR(m2, 1.0, 1e-10) << q;
  }
}

TEST(GaussHermite, GaussianIntegralInLogDomain) {
  const QuadratureRule r = gauss_hermite_rule(100);
  const Vector terms = r.log_weights - 0.5 * r.nodes.col(0).cwiseAbs2();
  const double m = terms.maxCoeff();
  const double lse = m + std::log((terms.array() - m).exp().sum());
  EXPECT_NEAR(lse, -0.5 * std::log(2.0), 1e-10);
}

TEST(GaussHermite, TensorProductGrid) {
  const QuadratureRule r2 = gauss_hermite_rule(10, 2);
  EXPECT_EQ(r2.size(), 100);
  EXPECT_NEAR(r2.weights.sum(), 1.0, 1e-13);
  // E[w1^2 w2^2] = 1, E[w1 w2] = 0.
  EXPECT_NEAR(r2.weights.dot(Vector(r2.nodes.col(0).cwiseAbs2().cwiseProduct(r2.nodes.col(1).cwiseAbs2()))), 1.0,
              1e-12);
  EXPECT_NEAR(r2.weights.dot(Vector(r2.nodes.col(0).cwiseProduct(r2.nodes.col(1)))), 0.0, 1e-12);

  const QuadratureRule r3 = gauss_hermite_rule(100, 3);
  EXPECT_LE(r3.size(), kMaxQuadratureNodes);
  EXPECT_EQ(r3.points_per_dim, 21);
  EXPECT_NEAR(r3.weights.sum(), 1.0, 1e-12);
}

TEST(GaussHermite, RangeErrors) {
  EXPECT_THROW(gauss_hermite_rule(0), ConfigError);
  EXPECT_THROW(gauss_hermite_rule(513), ConfigError);
  EXPECT_THROW(gauss_hermite_rule(10, 4), ConfigError);
}

// ---- expected log-likelihood ------------------------------------------------

TEST(ExpectedLoglik, HandValues) {
  const Vector z = Vector::Zero(1);
  EXPECT_NEAR(expected_loglik(z, z, z, 1.0), -0.5 * kLog2Pi, 1e-15);
  const Vector one = Vector::Ones(1);
  EXPECT_NEAR(expected_loglik(one, one, Vector::Constant(1, 0.5), 1.0), -0.5 * kLog2Pi - 0.25, 1e-15);
}

TEST(ExpectedLoglik, RejectsNegativeVariance) {
  const Vector z = Vector::Zero(1);
  EXPECT_THROW(expected_loglik(z, z, Vector::Constant(1, -1e-3), 1.0), NumericalError);
}

TEST(ExpectedLoglik, IdentityMixingEqualsUnmixed) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector y = standard_normal(4, 1, rng);
    const Vector mu = standard_normal(4, 1, rng);
    const Vector var = testing::uniform(4, 1, rng, 0.0, 2.0);
    const OutputMixing id = init_mixing_identity(4, 4);
    EXPECT_NEAR(expected_loglik(y, mu, var, 0.3, &id), expected_loglik(y, mu, var, 0.3), 1e-12);
  }
}

double log_normal_iso(const Vector& y, const Vector& mean, double noise) {
  return -0.5 * static_cast<double>(y.size()) * (kLog2Pi + std::log(noise)) -
         (y - mean).squaredNorm() / (2.0 * noise);
}

TEST(ExpectedLoglik, MatchesMonteCarlo) {
  Rng rng(2);
  for (int trial = 0; trial < 6; ++trial) {
    const bool mixed = trial % 2 == 1;
    const Eigen::Index l = mixed ? 2 : 3;
    const Eigen::Index dy = 3;
    const Vector y = standard_normal(dy, 1, rng);
    const Vector mu = standard_normal(l, 1, rng);
    const Vector var = testing::uniform(l, 1, rng, 0.1, 1.5);
    const double noise = 0.5;
    const OutputMixing p{standard_normal(l, dy, rng)};
    const OutputMixing* mix = mixed ? &p : nullptr;
    const int n = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int s = 0; s < n; ++s) {
      const Vector f = mu + (var.cwiseSqrt().array() * standard_normal(l, 1, rng).array()).matrix();
      const Vector mean = mixed ? Vector(p.p.transpose() * f) : f;
      const double v = log_normal_iso(y, mean, noise);
      sum += v;
      sumsq += v * v;
    }
    const double mc = sum / n;
    const double se = std::sqrt((sumsq / n - mc * mc) / n);
    EXPECT_LT(std::abs(expected_loglik(y, mu, var, noise, mix) - mc), 3.0 * se);
  }
}

TEST(ExpectedLoglik, GraphMatchesPlain) {
  Rng rng(3);
  const Matrix y = standard_normal(4, 3, rng);
  const Matrix mu = standard_normal(4, 2, rng);
  const Matrix var = testing::uniform(4, 2, rng, 0.1, 1.0);
  const OutputMixing p{standard_normal(2, 3, rng)};
  ad::Tape t;
  const ad::Var out = expected_loglik(t.constant(y), MomentVars{t.constant(mu), t.constant(var)},
                                      t.constant(0.4), t.constant(p.p));
  for (Eigen::Index r = 0; r < 4; ++r) {
    EXPECT_NEAR(out.value()(r, 0),
                expected_loglik(y.row(r).transpose(), mu.row(r).transpose(), var.row(r).transpose(), 0.4, &p),
                1e-12);
  }
}

// ---- latent KL ---------------------------------------------------------------

TEST(KlLatent, HandValues) {
  GaussianLatentPosterior q = testing::prior_latent_posterior(3, 2);
  EXPECT_NEAR(kl_latent(q, {0, 1, 2}), 0.0, 1e-15);
  GaussianLatentPosterior one{Matrix::Ones(1, 1), {Matrix::Ones(1, 1)}};
  EXPECT_NEAR(kl_latent(one, {0}), 0.5, 1e-15);
}

TEST(KlLatent, MatchesGenericGaussianKl) {
  Rng rng(4);
  const GaussianLatentPosterior q = testing::random_latent_posterior(5, 3, rng);
  double oracle = 0.0;
  for (int n = 0; n < 5; ++n) {
    const Matrix s = q.chol[static_cast<size_t>(n)] * q.chol[static_cast<size_t>(n)].transpose();
    const Vector m = q.mean.row(n).transpose();
    oracle += 0.5 * (s.trace() + m.squaredNorm() - 3.0 - std::log(s.determinant()));
  }
  EXPECT_NEAR(kl_latent(q, {0, 1, 2, 3, 4}), oracle, 1e-10);
}

// ---- bounds ------------------------------------------------------------------

ModelConfig small_config(Eigen::Index dw, LatentMode mode = LatentMode::kPerPointGaussian) {
  ModelConfig c;
  c.input_dim = 1;
  c.output_dim = 1;
  c.latent_dim = dw;
  c.latent_mode = mode;
  c.num_inducing = 3;
  c.encoder_hidden = {4};
  return c;
}

TEST(Bounds, NoLatentsCollapsesToSparseGp) {
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    ModelConfig c = small_config(0);
    c.input_dim = 2;
    c.output_dim = 2;
    c.num_inducing = 4;
    testing::ToyProblem p = testing::random_problem(c, 9, rng);
    const auto batch = all_indices(9);
    const double oracle = testing::svgp_elbo_oracle(p.model, p.x, p.y);
    EXPECT_NEAR(elbo_gaussian_qw(p.model, p.x, p.y, batch, GaussianLatentPosterior{Matrix(9, 0), std::vector<Matrix>(9)}, 1, rng),
                oracle, 1e-10);
    EXPECT_NEAR(model_elbo(p.model, p.x, p.y, batch, draw_for_model(p.model, 9, rng)), oracle, 1e-10);
  }
}

TEST(Bounds, LatentKlGrowsAsPosteriorNarrows) {
  Rng rng(6);
  testing::ToyProblem p = testing::random_problem(small_config(1), 5, rng);
  const auto batch = all_indices(5);
  const QuadratureRule rule = gauss_hermite_rule(40);
  double prev_kl = -1.0;
  for (double s : {1.0, 0.3, 0.1, 0.03, 0.01, 1e-3}) {
    GaussianLatentPosterior q = testing::prior_latent_posterior(5, 1);
    q.mean.setConstant(0.4);
    for (auto& c : q.chol) c(0, 0) = s;
    const double kl = kl_latent(q, batch);
    EXPECT_GT(kl, prev_kl);
    prev_kl = kl;
    // The bound stays finite; the data term approaches L at the mean.
    EXPECT_TRUE(std::isfinite(elbo_gaussian_qw(p.model, p.x, p.y, batch, q, draw_quadrature(5, rule))));
  }
}

TEST(Bounds, MonteCarloAtPriorMatchesQuadrature) {
  Rng rng(7);
  testing::ToyProblem p = testing::random_problem(small_config(1), 5, rng);
  const auto batch = all_indices(5);
  const GaussianLatentPosterior prior = testing::prior_latent_posterior(5, 1);
  const double quad = elbo_gaussian_qw(p.model, p.x, p.y, batch, prior, draw_quadrature(5, gauss_hermite_rule(100)));
  const int n = 10000;
  double sum = 0.0, sumsq = 0.0;
  for (int s = 0; s < n; ++s) {
    const double v = elbo_gaussian_qw(p.model, p.x, p.y, batch, prior, 1, rng);
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sumsq / n - mean * mean) / n);
  EXPECT_LT(std::abs(mean - quad), 3.0 * se);
}

TEST(Bounds, ConstantLatentLikelihoodGivesConstantOptimalTerm) {
  // A huge latent lengthscale makes L_w independent of w, so both bounds agree
  // when q(w) is the prior.
  Rng rng(8);
  testing::ToyProblem p = testing::random_problem(small_config(1), 6, rng);
  Matrix ls = p.model.params.value(param_names::kLengthscales);
  ls(0, 1) = 1e8;
  p.model.params.set_value(param_names::kLengthscales, ls);
  const auto batch = all_indices(6);
  const QuadratureRule rule = gauss_hermite_rule(100);
  const double opt = elbo_optimal_qw(p.model, p.x, p.y, batch, rule);
  const double gauss = elbo_gaussian_qw(p.model, p.x, p.y, batch, testing::prior_latent_posterior(6, 1),
                                        draw_quadrature(6, rule));
  EXPECT_NEAR(opt, gauss, 1e-9);
}

// Per-point L_w(w) through the plain-matrix path.
double plain_loglik(const GpCdeModel& model, const InducingVariational& q, const KernelSpec& k,
                    const Vector& x, const Vector& y, double w) {
  Matrix in(1, x.size() + 1);
  in << x.transpose(), w;
  const MarginalMoments mm = conditional(q, k, in);
  return expected_loglik(y, mm.mean.row(0).transpose(), mm.var.row(0).transpose(), model.noise_variance());
}

TEST(Bounds, OptimalBoundMatchesTrapezoidIntegration) {
  Rng rng(9);
  for (int trial = 0; trial < 3; ++trial) {
    testing::ToyProblem p = testing::broad_latent_problem(4, rng);
    const auto batch = all_indices(4);
    const KernelSpec k = p.model.kernel();
    const InducingVariational q = p.model.inducing();
    double total = 0.0;
    const int steps = 20000;
    const double h = 20.0 / steps;
    for (Eigen::Index n = 0; n < 4; ++n) {
      std::vector<double> logf(steps + 1);
      for (int i = 0; i <= steps; ++i) {
        const double w = -10.0 + h * i;
        logf[static_cast<size_t>(i)] = plain_loglik(p.model, q, k, p.x.row(n).transpose(),
                                                    p.y.row(n).transpose(), w) -
                                       0.5 * w * w - 0.5 * kLog2Pi;
      }
      const double m = *std::max_element(logf.begin(), logf.end());
      double s = 0.0;
      for (int i = 0; i <= steps; ++i) {
        s += (i == 0 || i == steps ? 0.5 : 1.0) * std::exp(logf[static_cast<size_t>(i)] - m);
      }
      total += m + std::log(s * h);
    }
    total -= kl_inducing(q, k);
    EXPECT_NEAR(elbo_optimal_qw(p.model, p.x, p.y, batch, gauss_hermite_rule(100)), total, 1e-8);
  }
}

TEST(Bounds, OptimalBoundDominatesGaussianBound) {
  Rng rng(10);
  const QuadratureRule rule = gauss_hermite_rule(60);
  for (int trial = 0; trial < 5; ++trial) {
    testing::ToyProblem p = testing::random_problem(small_config(1), 7, rng);
    const auto batch = all_indices(7);
    const double opt = elbo_optimal_qw(p.model, p.x, p.y, batch, rule);
    for (int j = 0; j < 5; ++j) {
      const GaussianLatentPosterior q = testing::random_latent_posterior(7, 1, rng);
      EXPECT_GE(opt - elbo_gaussian_qw(p.model, p.x, p.y, batch, q, draw_quadrature(7, rule)), -1e-8);
    }
  }
}

TEST(Bounds, PermutationInvariance) {
  Rng rng(11);
  testing::ToyProblem p = testing::random_problem(small_config(1), 6, rng);
  const GaussianLatentPosterior q = testing::random_latent_posterior(6, 1, rng);
  const QuadratureRule rule = gauss_hermite_rule(30);
  const auto batch = all_indices(6);
  std::vector<int> perm{3, 1, 5, 0, 2, 4};
  Matrix xp(6, 1), yp(6, 1);
  GaussianLatentPosterior qp;
  qp.mean.resize(6, 1);
  for (int i = 0; i < 6; ++i) {
    xp.row(i) = p.x.row(perm[static_cast<size_t>(i)]);
    yp.row(i) = p.y.row(perm[static_cast<size_t>(i)]);
    qp.mean.row(i) = q.mean.row(perm[static_cast<size_t>(i)]);
    qp.chol.push_back(q.chol[static_cast<size_t>(perm[static_cast<size_t>(i)])]);
  }
  EXPECT_NEAR(elbo_optimal_qw(p.model, p.x, p.y, batch, rule), elbo_optimal_qw(p.model, xp, yp, batch, rule),
              1e-10);
  EXPECT_NEAR(elbo_gaussian_qw(p.model, p.x, p.y, batch, q, draw_quadrature(6, rule)),
              elbo_gaussian_qw(p.model, xp, yp, batch, qp, draw_quadrature(6, rule)), 1e-10);
}

TEST(Bounds, MinibatchEstimatorIsUnbiased) {
  Rng rng(12);
  testing::ToyProblem p = testing::random_problem(small_config(1), 6, rng);
  const GaussianLatentPosterior q = testing::random_latent_posterior(6, 1, rng);
  const QuadratureRule rule = gauss_hermite_rule(30);
  const double full = elbo_gaussian_qw(p.model, p.x, p.y, all_indices(6), q, draw_quadrature(6, rule));
  double sum = 0.0;
  int count = 0;
  for (int a = 0; a < 6; ++a) {
    for (int b = a + 1; b < 6; ++b) {
      sum += elbo_gaussian_qw(p.model, p.x, p.y, {a, b}, q, draw_quadrature(2, rule));
      ++count;
    }
  }
  EXPECT_NEAR(sum / count, full, 1e-10);
}

TEST(Bounds, ZeroVarianceProjectionEqualsPremultipliedInputs) {
  Rng rng(13);
  ModelConfig c = small_config(1);
  c.input_dim = 3;
  c.projection_dim = 2;
  testing::ToyProblem p = testing::random_problem(c, 6, rng);
  p.model.params.set_value(param_names::kProjLogvar, Matrix::Constant(2, 3, -80.0));
  const Matrix a = p.model.params.value(param_names::kProjMean);

  ModelConfig c2 = c;
  c2.input_dim = 2;
  c2.projection_dim = 0;
  GpCdeModel plain = make_model(c2, 6, p.model.params.value(param_names::kInducing), p.model.kernel(), rng);
  for (const auto& name : plain.params.names()) plain.params.set_raw(name, p.model.params.raw(name));
  const Matrix xa = p.x * a.transpose();

  const auto batch = all_indices(6);
  const LatentDraws draws = draw_quadrature(6, gauss_hermite_rule(20));
  LatentDraws with_eps = draws;
  with_eps.projection_eps = standard_normal(2, 3, rng);

  ad::Tape t;
  const BoundParams b = bind(t, p.model.params);
  const BoundTerms terms = model_bound(t, b, model_vars(p.model, t, b), p.model, p.x, p.y, batch, with_eps);
  EXPECT_NEAR(terms.elbo.scalar() + terms.kl_projection.scalar(), model_elbo(plain, xa, p.y, batch, draws), 1e-10);
}

TEST(Bounds, LvmMatchesCdeWithConstantConditions) {
  Rng rng(14);
  ModelConfig lvm = small_config(1);
  lvm.use_conditions = false;
  lvm.input_dim = 0;
  testing::ToyProblem p = testing::random_problem(lvm, 6, rng);

  ModelConfig cde = small_config(1);
  const double cval = 0.7;
  const KernelSpec k0 = p.model.kernel();
  KernelSpec k = k0;
  k.lengthscales = Vector(2);
  k.lengthscales << 1.3, k0.lengthscales(0);
  Matrix z(3, 2);
  z << Matrix::Constant(3, 1, cval), p.model.params.value(param_names::kInducing);
  GpCdeModel m2 = make_model(cde, 6, z, k, rng);
  for (const auto& name : {param_names::kQMean, param_names::q_sqrt(0), param_names::kNoise,
                           param_names::kQwMean, param_names::kQwScale}) {
    m2.params.set_raw(name, p.model.params.raw(name));
  }
  const Matrix xc = Matrix::Constant(6, 1, cval);
  const auto batch = all_indices(6);
  const QuadratureRule rule = gauss_hermite_rule(30);
  const LatentDraws draws = draw_quadrature(6, rule);
  EXPECT_NEAR(model_elbo(p.model, Matrix(6, 0), p.y, batch, draws), model_elbo(m2, xc, p.y, batch, draws), 1e-8);
  EXPECT_NEAR(elbo_optimal_qw(p.model, Matrix(6, 0), p.y, batch, rule), elbo_optimal_qw(m2, xc, p.y, batch, rule),
              1e-8);
}

// Gradients of every bound variant against central differences.
struct VariantCase {
  std::string name;
  ModelConfig config;
};

std::vector<VariantCase> variants() {
  std::vector<VariantCase> v;
  ModelConfig base = small_config(1);
  v.push_back({"svgp", small_config(0)});
  v.push_back({"perpoint_mc", base});
  ModelConfig quad = base;
  quad.expectation = LatentExpectation::kQuadrature;
  quad.quadrature_points = 12;
  v.push_back({"perpoint_quadrature", quad});
  v.push_back({"amortized", small_config(1, LatentMode::kAmortizedGaussian)});
  ModelConfig opt = small_config(1, LatentMode::kOptimalQuadrature);
  opt.quadrature_points = 12;
  v.push_back({"optimal", opt});
  ModelConfig full = small_config(2);
  full.input_dim = 3;
  full.output_dim = 3;
  full.projection_dim = 2;
  full.mixing_dim = 2;
  full.kernel = KernelFamily::kMatern52;
  v.push_back({"projection_mixing_matern", full});
  return v;
}

class BoundGradient : public ::testing::TestWithParam<VariantCase> {};

TEST_P(BoundGradient, MatchesCentralDifferences) {
  const VariantCase& vc = GetParam();
  for (int trial = 0; trial < 2; ++trial) {
    Rng rng(100 + static_cast<unsigned>(trial));
    testing::ToyProblem p = testing::random_problem(vc.config, 5, rng);
    const auto batch = all_indices(5);
    const LatentDraws draws = draw_for_model(p.model, 5, rng);
    GraphBuilder build = [&](ad::Tape& t, const BoundParams& b) {
      return model_bound(t, b, model_vars(p.model, t, b), p.model, p.x, p.y, batch, draws).elbo;
    };
    const FiniteDiffReport rep = finite_diff_check(build, p.model.params, 1e-5);
    for (const auto& e : rep.entries) {
      EXPECT_LT(e.max_rel_error, 1e-4) << vc.name << " " << e.name << " ad=" << e.ad_grad << " fd=" << e.fd_grad;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(AllVariants, BoundGradient, ::testing::ValuesIn(variants()),
                         [](const auto& info) { return info.param.name; });

TEST(Bounds, RejectsBadInputs) {
  Rng rng(15);
  testing::ToyProblem p = testing::random_problem(small_config(1), 4, rng);
  const QuadratureRule rule = gauss_hermite_rule(10);
  EXPECT_THROW(elbo_optimal_qw(p.model, p.x, p.y, all_indices(4), gauss_hermite_rule(10, 2)), DimensionError);
  EXPECT_THROW(model_elbo(p.model, p.x, p.y, {}, draw_quadrature(0, rule)), DimensionError);
  EXPECT_THROW(model_elbo(p.model, p.x, Matrix::Zero(4, 2), all_indices(4), draw_quadrature(4, rule)),
               DimensionError);
}

}  // namespace
}  // namespace gpcde
