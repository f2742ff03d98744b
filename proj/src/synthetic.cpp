#include "gpcde/synthetic.hpp"

#include <cmath>
#include <random>

namespace gpcde {

ConditionedDataset heteroscedastic_sinusoid(Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> ux(-3.0, 3.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  ConditionedDataset d;
  d.x.resize(n, 1);
  d.y.resize(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = ux(rng);
    const double e = (coin(rng) ? 1.0 : -1.0) + 0.25 * normal(rng);
    d.x(i, 0) = x;
    d.y(i, 0) = std::sin(1.5 * x) + (0.1 + (x + 3.0) / 12.0) * e;
  }
  d.x_names = {"x"};
  d.y_names = {"y"};
  return d;
}

ConditionedDataset mini_taxi(Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  ConditionedDataset d;
  d.x.resize(n, 2);
  d.y.resize(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x1 = u(rng);
    const double x2 = u(rng);
    const bool north_south = u01(rng) < 1.0 / (1.0 + std::exp(-3.0 * x1));
    const double e1 = normal(rng);
    const double e2 = normal(rng);
    d.x(i, 0) = x1;
    d.x(i, 1) = x2;
    if (north_south) {
      d.y(i, 0) = 0.8 * x2 + 0.05 * e1;
      d.y(i, 1) = 1.2 + 0.3 * x1 + 0.35 * e2;
    } else {
      d.y(i, 0) = -1.2 + 0.3 * x2 + 0.35 * e1;
      d.y(i, 1) = 0.8 * x1 + 0.05 * e2;
    }
  }
  d.x_names = {"px", "py"};
  d.y_names = {"dx", "dy"};
  return d;
}

ConditionedDataset digit_like(Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double pi = std::acos(-1.0);
  ConditionedDataset d;
  d.x.resize(n, 0);
  d.y.resize(n, 16);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double angle = pi / 3.0 * std::tanh(normal(rng));
    // Unit normal of a bar through the origin, vertical at angle 0.
    const double nx = std::cos(angle);
    const double ny = std::sin(angle);
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) {
        const double px = -1.5 + c;
        const double py = 1.5 - r;
        const double dist = px * nx + py * ny;
        d.y(i, r * 4 + c) = std::exp(-dist * dist / (2.0 * 0.35 * 0.35)) + 0.1 * normal(rng);
      }
    }
  }
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) d.y_names.push_back("p" + std::to_string(r) + std::to_string(c));
  }
  return d;
}

}  // namespace gpcde
