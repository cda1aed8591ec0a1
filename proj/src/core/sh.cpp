// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#include "sixdgs/sh.hpp"

#include <cmath>

namespace sixdgs {

namespace {

constexpr double kC0 = 0.28209479177387814;
constexpr double kC1 = 0.4886025119029199;
constexpr double kC2a = 1.0925484305920792; // xy, yz, xz
constexpr double kC2b = 0.31539156525252005; // 3z^2 - 1
constexpr double kC2c = 0.5462742152960396; // x^2 - y^2
constexpr double kC3a = 0.5900435899266435; // y(3x^2 - y^2), x(x^2 - 3y^2)
constexpr double kC3b = 2.890611442640554;  // xyz
constexpr double kC3c = 0.4570457994644658; // y(5z^2 - 1), x(5z^2 - 1)
constexpr double kC3d = 0.3731763325901154; // z(5z^2 - 3)
constexpr double kC3e = 1.445305721320277;  // z(x^2 - y^2)

} // namespace

void eval_sh_basis_grad(const Vec3 &d, ShBasis &Y, std::array<Vec3, kShBasisCount> &G) {
    const double x = d.x(), y = d.y(), z = d.z();
    const double xx = x * x, yy = y * y, zz = z * z;

    Y[0] = kC0;
    G[0] = Vec3::Zero();

    Y[1] = kC1 * y;
    G[1] = Vec3(0.0, kC1, 0.0);
    Y[2] = kC1 * z;
    G[2] = Vec3(0.0, 0.0, kC1);
    Y[3] = kC1 * x;
    G[3] = Vec3(kC1, 0.0, 0.0);

    Y[4] = kC2a * x * y;
    G[4] = kC2a * Vec3(y, x, 0.0);
    Y[5] = kC2a * y * z;
    G[5] = kC2a * Vec3(0.0, z, y);
    Y[6] = kC2b * (3.0 * zz - 1.0);
    G[6] = kC2b * Vec3(0.0, 0.0, 6.0 * z);
    Y[7] = kC2a * x * z;
    G[7] = kC2a * Vec3(z, 0.0, x);
    Y[8] = kC2c * (xx - yy);
    G[8] = kC2c * Vec3(2.0 * x, -2.0 * y, 0.0);

    Y[9]  = kC3a * y * (3.0 * xx - yy);
    G[9]  = kC3a * Vec3(6.0 * x * y, 3.0 * xx - 3.0 * yy, 0.0);
    Y[10] = kC3b * x * y * z;
    G[10] = kC3b * Vec3(y * z, x * z, x * y);
    Y[11] = kC3c * y * (5.0 * zz - 1.0);
    G[11] = kC3c * Vec3(0.0, 5.0 * zz - 1.0, 10.0 * y * z);
    Y[12] = kC3d * z * (5.0 * zz - 3.0);
    G[12] = kC3d * Vec3(0.0, 0.0, 15.0 * zz - 3.0);
    Y[13] = kC3c * x * (5.0 * zz - 1.0);
    G[13] = kC3c * Vec3(5.0 * zz - 1.0, 0.0, 10.0 * x * z);
    Y[14] = kC3e * z * (xx - yy);
    G[14] = kC3e * Vec3(2.0 * x * z, -2.0 * y * z, xx - yy);
    Y[15] = kC3a * x * (xx - 3.0 * yy);
    G[15] = kC3a * Vec3(3.0 * xx - 3.0 * yy, -6.0 * x * y, 0.0);
}

ShBasis eval_sh_basis(const Vec3 &dir) {
    const double n = dir.norm();
    const Vec3 d   = n > 0.0 ? Vec3(dir / n) : Vec3(0.0, 0.0, 1.0);
    ShBasis Y;
    std::array<Vec3, kShBasisCount> unused;
    eval_sh_basis_grad(d, Y, unused);
    return Y;
}

Vec3 eval_color(std::span<const double, kShCoeffCount> beta, const Vec3 &dir) {
    const ShBasis Y = eval_sh_basis(dir);
    Vec3 rgb;
    for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = 0; k < kShBasisCount; ++k) acc += beta[c * kShBasisCount + k] * Y[k];
        rgb[c] = sigmoid(acc);
    }
    return rgb;
}

} // namespace sixdgs
