// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>

namespace sixdgs {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Inverse of a symmetric positive-definite 3x3 block through a Cholesky
/// solve. When the factorization fails or a pivot collapses below
/// 1e-14 * trace, the matrix is retried with jitter 1e-8 * trace / 3 on the
/// diagonal; if that also fails a NumericDegeneracyError is thrown.
Mat3 inverse_spd3(const Mat3 &m, std::optional<std::size_t> gaussian_index = std::nullopt);

/// Number of inverse_spd3 calls made on the calling thread.
std::uint64_t spd_inversion_count() noexcept;
void reset_spd_inversion_count() noexcept;

} // namespace sixdgs
