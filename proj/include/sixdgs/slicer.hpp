// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "sixdgs/gaussian.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace sixdgs {

/// A 6D Gaussian conditioned on one view direction.
struct ConditionalGaussian3D {
    Vec3 mu_cond    = Vec3::Zero();
    Mat3 sigma_cond = Mat3::Identity();
    double alpha_cond = 0.0;
    Vec3 color      = Vec3::Constant(0.5);
    std::optional<Vec3> scale;
    std::optional<Mat3> rotation;
};

struct CovarianceBlocks {
    Mat3 p;  // position-position
    Mat3 pd; // position-direction (top-right)
    Mat3 d;  // direction-direction
};

CovarianceBlocks partition(const Mat6 &sigma);

Vec3 conditional_mean(const Vec3 &mu_p, const Vec3 &mu_d, const Mat3 &sigma_pd,
                      const Mat3 &sigma_d, const Vec3 &dir,
                      std::optional<std::size_t> gaussian_index = std::nullopt);

/// Schur complement of sigma_d. Does not depend on the view direction.
Mat3 conditional_cov(const Mat3 &sigma_p, const Mat3 &sigma_pd, const Mat3 &sigma_d,
                     std::optional<std::size_t> gaussian_index = std::nullopt);

/// (d - mu_d)^T sigma_d^-1 (d - mu_d), clamped at zero. A negative value
/// (round-off) bumps mahalanobis_clamp_count().
double mahalanobis_sq(const Vec3 &dir, const Vec3 &mu_d, const Mat3 &sigma_d_inv);

/// exp(-lambda * D) with the exponent floored at -700.
double f_cond(double mahalanobis, double lambda);

double conditional_opacity(double alpha, const Vec3 &mu_d, const Mat3 &sigma_d,
                           const Vec3 &dir, double lambda,
                           std::optional<std::size_t> gaussian_index = std::nullopt);

/// Per-thread count of Mahalanobis distances clamped from below.
std::uint64_t mahalanobis_clamp_count() noexcept;

struct ScaleRotation {
    Vec3 scale;    // descending
    Mat3 rotation; // det +1
};

/// Spectral decomposition of a symmetric PSD 3x3 (its SVD), singular values
/// descending, last column flipped when needed for a right-handed frame.
ScaleRotation extract_scale_rotation(const Mat3 &sigma_cond);

ConditionalGaussian3D slice(const Gaussian6D &g, const Vec3 &dir, bool want_scale_rotation,
                            const ModelOptions &opts = {},
                            std::optional<std::size_t> gaussian_index = std::nullopt);

/// Direction-independent part of a slice. With it, slicing for a new view
/// only needs one matrix-vector product and one quadratic form.
struct InferenceCache {
    Vec3 mu_p;
    Vec3 mu_d;
    Mat3 sigma_cond;
    Mat3 regression;  // sigma_pd * sigma_d^-1
    Mat3 sigma_d_inv;
    double alpha  = 0.0;
    double lambda = 0.0;
    std::array<double, kShCoeffCount> sh{};
};

InferenceCache precompute_inference(const Gaussian6D &g, const ModelOptions &opts = {},
                                    std::optional<std::size_t> gaussian_index = std::nullopt);

/// Bitwise identical mu_cond and alpha_cond to slice(); no matrix inversion.
ConditionalGaussian3D slice_cached(const InferenceCache &cache, const Vec3 &dir);

/// Unit direction from the camera center towards the Gaussian's
/// unconditional position.
Vec3 view_direction(const Vec3 &mu_p, const Vec3 &camera_center);

/// Slice every Gaussian of the scene for a camera at `camera_center`.
std::vector<ConditionalGaussian3D> slice_scene(std::span<const Gaussian6D> gaussians,
                                               const Vec3 &camera_center,
                                               const ModelOptions &opts = {});

std::vector<InferenceCache> precompute_scene(std::span<const Gaussian6D> gaussians,
                                             const ModelOptions &opts = {});

std::vector<ConditionalGaussian3D> slice_scene_cached(std::span<const InferenceCache> caches,
                                                      const Vec3 &camera_center);

} // namespace sixdgs
