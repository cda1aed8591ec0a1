// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "sixdgs/gaussian.hpp"

#include <array>
#include <span>

namespace sixdgs {

/// Real spherical harmonics up to degree 3, orthonormal on the unit sphere,
/// l-major with m running -l..l, no Condon-Shortley phase:
///   Y_1^{-1} = c1*y, Y_1^0 = c1*z, Y_1^1 = c1*x, and so on.
using ShBasis = std::array<double, kShBasisCount>;

/// Normalizes `dir` first, so non-unit input is accepted.
ShBasis eval_sh_basis(const Vec3 &dir);

/// Basis values plus their gradient with respect to the (already unit)
/// direction, treating x, y, z as independent. Only the tangential part of
/// each gradient is meaningful.
void eval_sh_basis_grad(const Vec3 &unit_dir, ShBasis &values,
                        std::array<Vec3, kShBasisCount> &grads);

/// sigmoid(sum_k beta[c][k] * Y_k(dir)) per channel.
Vec3 eval_color(std::span<const double, kShCoeffCount> beta, const Vec3 &dir);

/// Band index l of basis slot k.
constexpr int sh_band(int k) { return k == 0 ? 0 : (k < 4 ? 1 : (k < 9 ? 2 : 3)); }

} // namespace sixdgs
