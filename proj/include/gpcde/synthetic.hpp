#pragma once

// Seeded generators for the bundled synthetic data sets.

#include "gpcde/data.hpp"

#include <cstdint>

namespace gpcde {

/// 1D heteroscedastic sinusoid. x ~ U(-3, 3) and
///   y = sin(1.5 x) + s(x) * e,   s(x) = 0.1 + (x + 3) / 12,
/// where e is an equal mixture of N(-1, 0.25^2) and N(1, 0.25^2), so the
/// noise is both input dependent and bimodal. Columns: x, y.
ConditionedDataset heteroscedastic_sinusoid(Eigen::Index n, std::uint64_t seed);

/// "Mini-taxi": 2D pickup x ~ U(-1, 1)^2 and a 2D drop-off drawn from a
/// two-component mixture. With probability sigmoid(3 x_1) the trip runs
/// along a north-south street, y ~ N((0.8 x_2, 1.2 + 0.3 x_1), diag(0.05^2, 0.35^2)),
/// otherwise along an east-west one, y ~ N((-1.2 + 0.3 x_2, 0.8 x_1), diag(0.35^2, 0.05^2)).
/// Columns: px, py, dx, dy.
ConditionedDataset mini_taxi(Eigen::Index n, std::uint64_t seed);

/// Unconditional "digit-like" vectors: 4x4 images of a bar through the
/// centre whose angle is (pi/3) tanh(t) for t ~ N(0, 1). Pixel intensity is
/// exp(-d^2 / (2 * 0.35^2)) for pixel-to-bar distance d on a [-1.5, 1.5]^2
/// grid, plus N(0, 0.1^2) noise. Columns: p00 .. p33.
ConditionedDataset digit_like(Eigen::Index n, std::uint64_t seed);

}  // namespace gpcde
