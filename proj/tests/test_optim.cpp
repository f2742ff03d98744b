#include "gpcde/error.hpp"
#include "gpcde/optim.hpp"
#include "model_fixtures.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace gpcde {
namespace {

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  ParamRegistry reg;
  reg.add({"a", 2, 2, Constraint::kFree}, Matrix::Constant(2, 2, 0.3));
  const ParamRegistry before = reg;
  Adam adam;
  for (int i = 0; i < 5; ++i) adam.step(reg, {{"a", Matrix::Zero(2, 2)}});
  EXPECT_TRUE(reg == before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamRegistry reg;
  reg.add({"a", 1, 3, Constraint::kFree}, Matrix::Zero(1, 3));
  Adam adam(AdamOptions{0.05});
  Matrix g(1, 3);
  g << 2.0, -0.1, 7.0;
  adam.step(reg, {{"a", g}});
  const Matrix moved = reg.raw("a");
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(std::abs(moved(0, i)), 0.05, 1e-8);
  EXPECT_LT(moved(0, 0), 0.0);
  EXPECT_GT(moved(0, 1), 0.0);
}

TEST(Adam, DecayHalvesLearningRateAfterInterval) {
  AdamOptions o;
  o.learning_rate = 0.01;
  o.decay = 0.5;
  o.decay_steps = 10;
  Adam adam(o);
  ParamRegistry reg;
  reg.add({"a", 1, 1, Constraint::kFree}, Matrix::Zero(1, 1));
  EXPECT_DOUBLE_EQ(adam.learning_rate(), 0.01);
  for (int i = 0; i < 10; ++i) adam.step(reg, {{"a", Matrix::Ones(1, 1)}});
  EXPECT_NEAR(adam.learning_rate(), 0.005, 1e-15);
}

TEST(Adam, RejectsShapeMismatch) {
  ParamRegistry reg;
  reg.add({"a", 1, 2, Constraint::kFree}, Matrix::Zero(1, 2));
  Adam adam;
  EXPECT_THROW(adam.step(reg, {{"a", Matrix::Zero(2, 1)}}), DimensionError);
}

TEST(NatGrad, ZeroGradientIsIdentity) {
  Rng rng(1);
  const Matrix s = testing::random_spd(4, rng);
  const Vector m = standard_normal(4, 1, rng);
  const GaussianMoments out = natgrad_step(m, s, Vector::Zero(4), Matrix::Zero(4, 4), 0.7);
  EXPECT_LT((out.mean - m).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((out.cov - s).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(NatGrad, OversizedStepIsReported) {
  const Matrix s = Matrix::Identity(2, 2);
  // dL/dS = I pushes the precision S^-1 - 2I negative.
  EXPECT_THROW(natgrad_step(Vector::Zero(2), s, Vector::Zero(2), Matrix::Identity(2, 2), 1.0), NumericalError);
  EXPECT_THROW(natgrad_step(Vector::Zero(2), s, Vector::Zero(2), Matrix::Zero(2, 2), 1.5), ConfigError);
}

ModelConfig conjugate_config(Eigen::Index dw) {
  ModelConfig c;
  c.input_dim = 1;
  c.output_dim = 2;
  c.latent_dim = dw;
  c.latent_mode = LatentMode::kPerPointGaussian;
  c.expectation = LatentExpectation::kQuadrature;
  c.quadrature_points = 8;
  c.num_inducing = 4;
  return c;
}

double grad_norm(const VariationalGradients& g) {
  double s = g.d_mean.squaredNorm();
  for (const Matrix& d : g.d_cov) s += d.squaredNorm();
  return std::sqrt(s);
}

TEST(NatGrad, UnitStepLandsOnAnalyticOptimum) {
  for (Eigen::Index dw : {0, 1, 2}) {
    Rng rng(10 + static_cast<unsigned>(dw));
    for (int trial = 0; trial < 3; ++trial) {
      testing::ToyProblem p = testing::random_problem(conjugate_config(dw), 7, rng);
      const auto batch = all_indices(7);
      const LatentDraws draws = draw_for_model(p.model, 7, rng, true);
      const auto analytic = analytic_optimal_qu(p.model, p.x, p.y, draws);

      natgrad_update(p.model, variational_gradients(p.model, p.x, p.y, batch, draws), NatGradOptions{1.0});
      const InducingVariational q = p.model.inducing();
      for (Eigen::Index l = 0; l < 2; ++l) {
        EXPECT_LT((q.means.col(l) - analytic[static_cast<size_t>(l)].mean).cwiseAbs().maxCoeff(), 1e-6);
        EXPECT_LT((q.covariance(l) - analytic[static_cast<size_t>(l)].cov).cwiseAbs().maxCoeff(), 1e-6);
      }
      EXPECT_LT(grad_norm(variational_gradients(p.model, p.x, p.y, batch, draws)), 1e-6) << "D_w=" << dw;
    }
  }
}

TEST(NatGrad, SmallStepsKeepCovariancePositiveDefinite) {
  Rng rng(20);
  for (int model_i = 0; model_i < 5; ++model_i) {
    testing::ToyProblem p = testing::random_problem(conjugate_config(1), 5, rng);
    const LatentDraws draws = draw_for_model(p.model, 5, rng, true);
    for (int step = 0; step < 200; ++step) {
      const double gamma = testing::uniform(1, 1, rng, 0.001, 0.1)(0, 0);
      const NatGradReport r =
          natgrad_update(p.model, variational_gradients(p.model, p.x, p.y, all_indices(5), draws), NatGradOptions{gamma, 0});
      ASSERT_EQ(r.skipped, 0);
      for (Eigen::Index l = 0; l < 2; ++l) {
        ASSERT_EQ(Eigen::LLT<Matrix>(p.model.inducing().covariance(l)).info(), Eigen::Success);
      }
    }
  }
}

TEST(NatGrad, UnitStepNeverDecreasesBound) {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    testing::ToyProblem p = testing::random_problem(conjugate_config(1), 6, rng);
    const auto batch = all_indices(6);
    const LatentDraws draws = draw_for_model(p.model, 6, rng, true);
    const double before = model_elbo(p.model, p.x, p.y, batch, draws);
    natgrad_update(p.model, variational_gradients(p.model, p.x, p.y, batch, draws), NatGradOptions{1.0});
    EXPECT_GE(model_elbo(p.model, p.x, p.y, batch, draws), before - 1e-9);
  }
}

TEST(AnalyticQu, BeatsRandomPerturbations) {
  Rng rng(30);
  testing::ToyProblem p = testing::random_problem(conjugate_config(1), 6, rng);
  const auto batch = all_indices(6);
  const LatentDraws draws = draw_for_model(p.model, 6, rng, true);
  set_optimal_qu(p.model, p.x, p.y, draws);
  const double best = model_elbo(p.model, p.x, p.y, batch, draws);
  const InducingVariational q = p.model.inducing();
  for (int i = 0; i < 1000; ++i) {
    GpCdeModel other = p.model;
    const double scale = i < 500 ? 1e-3 : 1e-1;
    for (Eigen::Index l = 0; l < 2; ++l) {
      const Vector m = q.means.col(l) + standard_normal(4, 1, rng) * scale;
      const Matrix b = standard_normal(4, 4, rng) * scale;
      Matrix s = q.covariance(l) + b * b.transpose();
      if (i % 2 == 1) {
        // Shrink instead of inflate.
        s = q.covariance(l) * (1.0 - scale);
      }
      other.set_inducing_posterior(l, m, s);
    }
    EXPECT_LE(model_elbo(other, p.x, p.y, batch, draws), best + 1e-10);
  }
}

TEST(AnalyticQu, NonSparseLimitRecoversExactGpMean) {
  Rng rng(31);
  ModelConfig c = conjugate_config(0);
  c.output_dim = 1;
  c.num_inducing = 8;
  testing::ToyProblem p = testing::random_problem(c, 8, rng);
  p.x = testing::uniform(8, 1, rng, -3.0, 3.0);
  p.model.params.set_value(param_names::kInducing, p.x);
  const KernelSpec k = p.model.kernel();
  const double noise = p.model.noise_variance();
  set_optimal_qu(p.model, p.x, p.y, draw_for_model(p.model, 8, rng, true));
  const MarginalMoments mm = conditional(p.model.inducing(), k, p.x);
  Matrix kxx = kernel_matrix(k, p.x, p.x);
  const Matrix exact = kxx * (kxx + noise * Matrix::Identity(8, 8)).ldlt().solve(p.y);
  EXPECT_LT((mm.mean - exact).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(AnalyticQu, RejectsUnsupportedModels) {
  Rng rng(32);
  ModelConfig c = conjugate_config(1);
  c.mixing_dim = 1;
  c.variational_update = VariationalUpdate::kAdam;
  testing::ToyProblem p = testing::random_problem(c, 4, rng);
  EXPECT_THROW(analytic_optimal_qu(p.model, p.x, p.y, draw_for_model(p.model, 4, rng, true)), ConfigError);
}

}  // namespace
}  // namespace gpcde
