// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "sixdgs/camera.hpp"
#include "sixdgs/image.hpp"
#include "sixdgs/slicer.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace sixdgs {

constexpr int kTileSize          = 16;
constexpr double kAlphaClamp     = 0.99;
constexpr double kMinAlpha       = 1.0 / 255.0;
constexpr double kMinTransmittance = 1e-4;
constexpr double kDilation       = 0.3;

struct RasterOptions {
    /// Add kDilation * I (pixels^2) to every screen-space covariance.
    bool dilation = true;
};

/// Screen-space footprint of one conditional Gaussian.
struct Splat2D {
    Vec2 mean2d;
    Mat2 cov2d;
    Mat2 conic; // cov2d^-1
    double depth = 0.0;
    double alpha = 0.0;
    Vec3 color;
    /// Half extents of the region where the splat can reach kMinAlpha.
    double extent_x = 0.0;
    double extent_y = 0.0;
};

/// EWA projection of a conditional Gaussian. Absent when the mean is outside
/// (near, far), when the splat cannot reach kMinAlpha on any pixel, or when
/// any input is non-finite.
std::optional<Splat2D> project_gaussian(const ConditionalGaussian3D &cg, const Camera &cam,
                                        const RasterOptions &opts = {});

struct RasterStats {
    std::size_t visible    = 0;
    std::size_t culled     = 0;
    std::size_t non_finite = 0;
};

/// Everything the backward pass needs from a tile render.
struct ForwardState {
    Image image;
    Camera camera;
    Vec3 background = Vec3::Zero();
    RasterOptions options;
    std::vector<Splat2D> splats;          // visible splats only
    std::vector<std::size_t> source;      // splat -> input index
    std::size_t input_count = 0;
    int tiles_x = 0;
    int tiles_y = 0;
    std::vector<std::vector<std::uint32_t>> tile_lists; // depth-sorted splat ids
    std::vector<double> final_transmittance;            // per pixel
    std::vector<std::uint32_t> last_contributor;        // per pixel, list position + 1
    RasterStats stats;
};

/// Tile-based renderer (16x16 tiles, parallel over tiles).
ForwardState render_forward(std::span<const ConditionalGaussian3D> gaussians, const Camera &cam,
                            const Vec3 &background, const RasterOptions &opts = {});

Image rasterize(std::span<const ConditionalGaussian3D> gaussians, const Camera &cam,
                const Vec3 &background, const RasterOptions &opts = {},
                RasterStats *stats = nullptr);

/// Reference renderer: every pixel walks every splat in global depth order.
Image rasterize_reference(std::span<const ConditionalGaussian3D> gaussians, const Camera &cam,
                          const Vec3 &background, const RasterOptions &opts = {});

struct SplatGrad {
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d  = Mat2::Zero();
    double alpha = 0.0;
    Vec3 color  = Vec3::Zero();
};

/// Gradients of a scalar loss with respect to each visible splat, given the
/// loss gradient with respect to the rendered image. Indexed like
/// ForwardState::splats.
std::vector<SplatGrad> rasterize_backward(const ForwardState &state, const Image &grad_image);

struct ConditionalGrad {
    Vec3 mu_cond    = Vec3::Zero();
    Mat3 sigma_cond = Mat3::Zero();
    double alpha_cond = 0.0;
    Vec3 color      = Vec3::Zero();
};

/// Chain rule through project_gaussian for one splat.
ConditionalGrad project_backward(const ConditionalGaussian3D &cg, const Camera &cam,
                                 const RasterOptions &opts, const SplatGrad &grad);

} // namespace sixdgs
