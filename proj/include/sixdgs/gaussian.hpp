// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "sixdgs/linalg.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace sixdgs {

constexpr int kShBasisCount   = 16; // degree <= 3
constexpr int kShCoeffCount   = 3 * kShBasisCount;
constexpr int kCholeskyCount  = 21; // 6 diagonal + 15 strictly-lower entries
constexpr int kParamCount     = 3 + 3 + kCholeskyCount + 1 + kShCoeffCount + 1;

/// Offsets of each parameter group inside the flat packed vector. The order
/// is fixed: position, direction mean, L diagonal, L off-diagonal, opacity,
/// SH coefficients (channel-major), view-dependency strength.
namespace param {
constexpr int kMuP      = 0;
constexpr int kMuD      = 3;
constexpr int kLDiag    = 6;
constexpr int kLOffDiag = 12;
constexpr int kAlpha    = 27;
constexpr int kSh       = 28;
constexpr int kLambda   = 76;
} // namespace param

using PackedParams = std::array<double, kParamCount>;

/// One spatial-angular Gaussian, stored as raw (pre-activation) parameters.
struct Gaussian6D {
    Vec3 raw_mu_p = Vec3::Zero();
    Vec3 raw_mu_d = Vec3::Zero();
    /// Diagonal entries first (pre-exp), then the 15 strictly-lower entries
    /// in row-major order (1,0) (2,0) (2,1) (3,0) ... (5,4), pre-tanh.
    std::array<double, kCholeskyCount> raw_L{};
    double raw_alpha = 0.0;
    /// sh[channel * 16 + basis]
    std::array<double, kShCoeffCount> sh{};
    /// Pre-sigmoid. -infinity encodes a view-independent Gaussian (lambda = 0).
    double raw_lambda_opa = 0.0;

    friend bool operator==(const Gaussian6D &, const Gaussian6D &) = default;
};

struct Bbox {
    Vec3 min = Vec3::Constant(-1.0);
    Vec3 max = Vec3::Constant(1.0);

    Vec3 center() const { return 0.5 * (min + max); }
    Vec3 extent() const { return max - min; }
    /// Box grown about its center by `factor`.
    Bbox expanded(double factor) const;
    bool contains(const Vec3 &p) const;
};

struct Scene {
    std::vector<Gaussian6D> gaussians;
    Vec3 background = Vec3::Zero();
    Bbox bbox;
};

struct ModelOptions {
    /// Project mu_d onto the unit sphere before use. Off keeps mu_d in R^3.
    bool normalize_direction_mean = false;
};

/// Strictly-lower index pair (row, col) of packed off-diagonal slot k.
std::pair<int, int> offdiag_index(int k);

/// exp on the diagonal, tanh below it, zero above.
/// Throws ParameterDomainError on non-finite input.
Mat6 activate_cholesky(std::span<const double, kCholeskyCount> raw_L);

/// Sigma = L L^T, symmetrised.
Mat6 covariance(const Mat6 &L);

double sigmoid(double raw);
double logit(double p);

/// Activated quantities of one Gaussian.
double activated_alpha(const Gaussian6D &g);
double activated_lambda(const Gaussian6D &g);
Vec3 effective_mu_d(const Gaussian6D &g, const ModelOptions &opts);
Mat6 gaussian_covariance(const Gaussian6D &g);

PackedParams pack(const Gaussian6D &g);
Gaussian6D unpack(const PackedParams &p);

/// Raw Cholesky vector whose activation is exactly L (L lower-triangular,
/// positive diagonal, |off-diagonal| < 1).
std::array<double, kCholeskyCount> pack_cholesky(const Mat6 &L);

/// Names of the 77 packed parameters, in packing order.
const std::array<const char *, kParamCount> &param_names();

} // namespace sixdgs
