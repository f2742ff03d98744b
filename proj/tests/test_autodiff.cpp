#include "gpcde/autodiff.hpp"
#include "gpcde/error.hpp"
#include "gpcde/params.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <string>

namespace gpcde {
namespace {

using ad::Var;

TEST(Autodiff, SquareAtThree) {
  ad::Tape t;
  Var p = t.leaf(Matrix::Constant(1, 1, 3.0), "p");
  Var f = p * p;
  t.backward(f);
  EXPECT_DOUBLE_EQ(f.scalar(), 9.0);
  EXPECT_DOUBLE_EQ(t.grad(p)(0, 0), 6.0);
}

TEST(Autodiff, LogOfExpHasUnitGradient) {
  for (double v : {-3.0, 0.0, 0.7, 5.0}) {
    ad::Tape t;
    Var p = t.leaf(Matrix::Constant(1, 1, v), "p");
    Var f = ad::log(ad::exp(p));
    t.backward(f);
    EXPECT_NEAR(t.grad(p)(0, 0), 1.0, 1e-14);
  }
}

TEST(Autodiff, NonScalarTargetIsRejected) {
  ad::Tape t;
  Var p = t.leaf(Matrix::Ones(2, 2), "p");
  EXPECT_THROW(t.backward(p * 2.0), DimensionError);
}

TEST(Autodiff, NonFiniteForwardValueNamesTheOp) {
  ad::Tape t;
  Var p = t.leaf(Matrix::Constant(1, 1, -1.0), "p");
  try {
    ad::log(p);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("log"), std::string::npos);
  }
}

TEST(Autodiff, CholeskyOfIndefiniteMatrixThrows) {
  ad::Tape t;
  Matrix a(2, 2);
  a << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(ad::cholesky(t.leaf(a, "a")), NumericalError);
}

TEST(Autodiff, ConstantsReceiveNoGradient) {
  ad::Tape t;
  Var c = t.constant(Matrix::Ones(2, 2));
  Var p = t.leaf(Matrix::Ones(2, 2), "p");
  t.backward(ad::sum(c * p));
  EXPECT_EQ(t.grad(c), Matrix::Zero(2, 2));
  EXPECT_EQ(t.grad(p), Matrix::Ones(2, 2));
}

// Every primitive, wrapped as sum(R .* op(inputs)) with a random R, against
// central differences.
struct PrimitiveCase {
  std::string name;
  std::function<void(ParamRegistry&, Rng&)> setup;
  std::function<Var(ad::Tape&, const BoundParams&)> op;
};

class PrimitiveGradient : public ::testing::TestWithParam<PrimitiveCase> {};

TEST_P(PrimitiveGradient, MatchesCentralDifferences) {
  const PrimitiveCase& c = GetParam();
  for (int trial = 0; trial < 3; ++trial) {
    Rng rng(1000 + static_cast<unsigned>(trial));
    ParamRegistry reg;
    c.setup(reg, rng);
    ad::Tape probe;
    const Var shape = c.op(probe, bind(probe, reg));
    const Matrix r = testing::uniform(shape.rows(), shape.cols(), rng);
    GraphBuilder build = [&](ad::Tape& t, const BoundParams& b) {
      return ad::sum(c.op(t, b) * t.constant(r));
    };
    const FiniteDiffReport rep = finite_diff_check(build, reg, 1e-5);
    for (const auto& e : rep.entries) {
      EXPECT_LT(e.max_rel_error, 1e-4) << c.name << " param " << e.name << " ad=" << e.ad_grad
                                       << " fd=" << e.fd_grad;
    }
  }
}

void add_free(ParamRegistry& reg, const std::string& name, const Matrix& v) {
  reg.add({name, v.rows(), v.cols(), Constraint::kFree}, v);
}

std::vector<PrimitiveCase> primitive_cases() {
  using testing::uniform;
  auto ab = [](Eigen::Index r1, Eigen::Index c1, Eigen::Index r2, Eigen::Index c2) {
    return [=](ParamRegistry& reg, Rng& rng) {
      add_free(reg, "a", uniform(r1, c1, rng));
      add_free(reg, "b", uniform(r2, c2, rng, 0.5, 1.5));
    };
  };
  auto a_only = [](Eigen::Index r, Eigen::Index c, double lo = -1.0, double hi = 1.0) {
    return [=](ParamRegistry& reg, Rng& rng) { add_free(reg, "a", uniform(r, c, rng, lo, hi)); };
  };
  return {
      {"add", ab(3, 2, 3, 2), [](ad::Tape&, const BoundParams& b) { return b["a"] + b["b"]; }},
      {"add_row_broadcast", ab(3, 2, 1, 2), [](ad::Tape&, const BoundParams& b) { return b["a"] + b["b"]; }},
      {"sub_col_broadcast", ab(3, 2, 3, 1), [](ad::Tape&, const BoundParams& b) { return b["a"] - b["b"]; }},
      {"mul_scalar_broadcast", ab(3, 2, 1, 1), [](ad::Tape&, const BoundParams& b) { return b["a"] * b["b"]; }},
      {"mul", ab(3, 2, 3, 2), [](ad::Tape&, const BoundParams& b) { return b["a"] * b["b"]; }},
      {"div", ab(3, 2, 1, 2), [](ad::Tape&, const BoundParams& b) { return b["a"] / b["b"]; }},
      {"exp", a_only(2, 3), [](ad::Tape&, const BoundParams& b) { return ad::exp(b["a"]); }},
      {"log", a_only(2, 3, 0.5, 2.0), [](ad::Tape&, const BoundParams& b) { return ad::log(b["a"]); }},
      {"square", a_only(2, 3), [](ad::Tape&, const BoundParams& b) { return ad::square(b["a"]); }},
      {"tanh", a_only(2, 3), [](ad::Tape&, const BoundParams& b) { return ad::tanh(b["a"]); }},
      {"neg", a_only(2, 3), [](ad::Tape&, const BoundParams& b) { return -b["a"]; }},
      {"clamp_min", a_only(2, 3, 0.2, 1.0),
       [](ad::Tape&, const BoundParams& b) { return ad::clamp_min(b["a"], 0.1); }},
      {"sum", a_only(2, 3), [](ad::Tape&, const BoundParams& b) { return ad::sum(b["a"]); }},
      {"rowsum", a_only(2, 3), [](ad::Tape&, const BoundParams& b) { return ad::rowsum(b["a"]); }},
      {"colsum", a_only(2, 3), [](ad::Tape&, const BoundParams& b) { return ad::colsum(b["a"]); }},
      {"diag", a_only(3, 3), [](ad::Tape&, const BoundParams& b) { return ad::diag(b["a"]); }},
      {"transpose", a_only(2, 3), [](ad::Tape&, const BoundParams& b) { return ad::transpose(b["a"]); }},
      {"matmul", ab(2, 3, 3, 4), [](ad::Tape&, const BoundParams& b) { return ad::matmul(b["a"], b["b"]); }},
      {"hcat", ab(3, 2, 3, 1), [](ad::Tape&, const BoundParams& b) { return ad::hcat({b["a"], b["b"], b["a"]}); }},
      {"cols", a_only(2, 4), [](ad::Tape&, const BoundParams& b) { return ad::cols(b["a"], 1, 2); }},
      {"gather_rows", a_only(3, 2),
       [](ad::Tape&, const BoundParams& b) { return ad::gather_rows(b["a"], {2, 0, 2, 1, 2}); }},
      {"reshape", a_only(6, 1), [](ad::Tape&, const BoundParams& b) { return ad::reshape(b["a"], 2, 3); }},
      {"logsumexp_cols", a_only(4, 3, -3.0, 3.0),
       [](ad::Tape&, const BoundParams& b) { return ad::logsumexp_cols(b["a"]); }},
      {"cholesky", a_only(4, 4),
       [](ad::Tape& t, const BoundParams& b) {
         Var a = b["a"];
         Var spd = ad::matmul(a, ad::transpose(a)) + t.constant(Matrix::Identity(4, 4));
         return ad::cholesky(spd);
       }},
      {"solve_lower",
       [](ParamRegistry& reg, Rng& rng) {
         reg.add({"l", 3, 3, Constraint::kLowerTriangularPositiveDiagonal}, testing::random_lower(3, rng));
         add_free(reg, "b", uniform(3, 2, rng));
       },
       [](ad::Tape&, const BoundParams& b) { return ad::solve_lower(b["l"], b["b"]); }},
      {"solve_lower_transposed",
       [](ParamRegistry& reg, Rng& rng) {
         reg.add({"l", 3, 3, Constraint::kLowerTriangularPositiveDiagonal}, testing::random_lower(3, rng));
         add_free(reg, "b", uniform(3, 2, rng));
       },
       [](ad::Tape&, const BoundParams& b) { return ad::solve_lower_transposed(b["l"], b["b"]); }},
      {"sqdist", ab(3, 2, 4, 2), [](ad::Tape&, const BoundParams& b) { return ad::sqdist(b["a"], b["b"]); }},
      {"sqdist_self", a_only(3, 2), [](ad::Tape&, const BoundParams& b) { return ad::sqdist(b["a"], b["a"]); }},
      {"matern52", a_only(3, 3, 0.0, 4.0),
       [](ad::Tape&, const BoundParams& b) { return ad::matern52_from_sqdist(b["a"]); }},
      {"lower_tri_exp_diag", a_only(3, 3),
       [](ad::Tape&, const BoundParams& b) { return ad::lower_tri_exp_diag(b["a"]); }},
  };
}

INSTANTIATE_TEST_SUITE_P(AllPrimitives, PrimitiveGradient, ::testing::ValuesIn(primitive_cases()),
                         [](const auto& info) { return info.param.name; });

TEST(Autodiff, MaternGradientIsFiniteAtZeroDistance) {
  ad::Tape t;
  Var d = t.leaf(Matrix::Zero(1, 1), "d");
  Var k = ad::matern52_from_sqdist(d);
  t.backward(k);
  EXPECT_DOUBLE_EQ(k.scalar(), 1.0);
  EXPECT_NEAR(t.grad(d)(0, 0), -5.0 / 6.0, 1e-14);
}

TEST(FiniteDiffCheck, LinearTargetIsExactToRoundoff) {
  ParamRegistry reg;
  reg.add({"a", 2, 2, Constraint::kFree}, Matrix::Constant(2, 2, 0.3));
  const Matrix coef = (Matrix(2, 2) << 1.0, -2.0, 0.5, 3.0).finished();
  GraphBuilder build = [&](ad::Tape& t, const BoundParams& b) {
    return ad::sum(b["a"] * t.constant(coef));
  };
  EXPECT_LT(finite_diff_check(build, reg, 1e-5).worst(), 1e-9);
}

TEST(FiniteDiffCheck, ConstantTargetHasZeroGradients) {
  ParamRegistry reg;
  reg.add({"a", 1, 3, Constraint::kFree}, Matrix::Ones(1, 3));
  GraphBuilder build = [](ad::Tape& t, const BoundParams&) { return t.constant(4.0); };
  const FiniteDiffReport rep = finite_diff_check(build, reg, 1e-5);
  ASSERT_EQ(rep.entries.size(), 1u);
  EXPECT_EQ(rep.entries[0].ad_grad, 0.0);
  EXPECT_EQ(rep.entries[0].fd_grad, 0.0);
  EXPECT_EQ(rep.worst(), 0.0);
}

TEST(FiniteDiffCheck, RejectsNonPositiveStep) {
  ParamRegistry reg;
  reg.add({"a", 1, 1, Constraint::kFree}, Matrix::Ones(1, 1));
  GraphBuilder build = [](ad::Tape&, const BoundParams& b) { return b["a"]; };
  EXPECT_THROW(finite_diff_check(build, reg, 0.0), ConfigError);
}

TEST(Params, PositiveBijectionObeysChainRule) {
  // f(p) = p^3 with p = exp(u): df/du = exp(u) * 3 p^2.
  ParamRegistry reg;
  reg.add({"p", 1, 1, Constraint::kPositive}, Matrix::Constant(1, 1, 1.7));
  GraphBuilder build = [](ad::Tape&, const BoundParams& b) { return b["p"] * b["p"] * b["p"]; };
  const ValueAndGrad vg = evaluate_with_grad(build, reg);
  const double p = 1.7;
  EXPECT_NEAR(vg.value, p * p * p, 1e-12);
  EXPECT_NEAR(vg.grads.at("p")(0, 0), p * 3.0 * p * p, 1e-12);
}

TEST(Params, LowerTriangularValueHasPositiveDiagonal) {
  ParamRegistry reg;
  Rng rng(3);
  reg.add({"l", 3, 3, Constraint::kLowerTriangularPositiveDiagonal}, testing::random_lower(3, rng));
  reg.set_raw("l", testing::uniform(3, 3, rng, -5.0, 5.0));
  const Matrix v = reg.value("l");
  EXPECT_TRUE((v.diagonal().array() > 0.0).all());
  EXPECT_EQ(Matrix(v.triangularView<Eigen::StrictlyUpper>()), Matrix::Zero(3, 3));
}

TEST(Params, FlattenRoundTrip) {
  Rng rng(5);
  ParamRegistry reg;
  reg.add({"a", 2, 3, Constraint::kFree}, testing::uniform(2, 3, rng));
  reg.add({"b", 1, 2, Constraint::kPositive}, Matrix::Constant(1, 2, 0.5));
  const ParamRegistry before = reg;
  const Vector flat = reg.flatten();
  EXPECT_EQ(flat.size(), 8);
  reg.unflatten(flat * 2.0);
  reg.unflatten(flat);
  EXPECT_TRUE(reg == before);
  EXPECT_THROW(reg.unflatten(Vector::Zero(3)), DimensionError);
}

TEST(Params, RejectsInvalidInitialValues) {
  ParamRegistry reg;
  EXPECT_THROW(reg.add({"p", 1, 1, Constraint::kPositive}, Matrix::Constant(1, 1, -1.0)), ConfigError);
  EXPECT_THROW(reg.add({"q", 2, 2, Constraint::kFree}, Matrix::Zero(1, 1)), DimensionError);
  reg.add({"r", 1, 1, Constraint::kFree}, Matrix::Zero(1, 1));
  EXPECT_THROW(reg.add({"r", 1, 1, Constraint::kFree}, Matrix::Zero(1, 1)), ConfigError);
}

TEST(Autodiff, RepeatedForwardPassesAreBitIdentical) {
  Rng rng(9);
  const Matrix a = testing::uniform(5, 5, rng);
  auto run = [&] {
    ad::Tape t;
    Var x = t.leaf(a, "a");
    Var s = ad::matmul(x, ad::transpose(x)) + t.constant(Matrix::Identity(5, 5));
    Var l = ad::cholesky(s);
    Var f = ad::sum(ad::log(ad::diag(l))) + ad::sum(ad::tanh(ad::solve_lower(l, x)));
    t.backward(f);
    return std::make_pair(f.scalar(), t.grad(x));
  };
  const auto r1 = run();
  const auto r2 = run();
  EXPECT_EQ(r1.first, r2.first);
  EXPECT_EQ(r1.second, r2.second);
}

}  // namespace
}  // namespace gpcde
