// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#include "sixdgs/slicer.hpp"

#include "sixdgs/error.hpp"
#include "sixdgs/parallel.hpp"
#include "sixdgs/sh.hpp"

#include <algorithm>
#include <cmath>

namespace sixdgs {

namespace {

thread_local std::uint64_t g_clamped = 0;

constexpr double kMinExponent = -700.0;

Mat3 symmetrize(const Mat3 &m) { return 0.5 * (m + m.transpose()); }

// Shared by the cached and uncached paths so both produce identical bits.
Vec3 regress_mean(const Vec3 &mu_p, const Mat3 &regression, const Vec3 &offset) {
    return mu_p + regression * offset;
}

Mat3 schur(const Mat3 &sigma_p, const Mat3 &regression, const Mat3 &sigma_pd) {
    return symmetrize(sigma_p - regression * sigma_pd.transpose());
}

} // namespace

CovarianceBlocks partition(const Mat6 &sigma) {
    return CovarianceBlocks{sigma.topLeftCorner<3, 3>(), sigma.topRightCorner<3, 3>(),
                            sigma.bottomRightCorner<3, 3>()};
}

Vec3 conditional_mean(const Vec3 &mu_p, const Vec3 &mu_d, const Mat3 &sigma_pd,
                      const Mat3 &sigma_d, const Vec3 &dir,
                      std::optional<std::size_t> gaussian_index) {
    const Mat3 regression = sigma_pd * inverse_spd3(sigma_d, gaussian_index);
    return regress_mean(mu_p, regression, dir - mu_d);
}

Mat3 conditional_cov(const Mat3 &sigma_p, const Mat3 &sigma_pd, const Mat3 &sigma_d,
                     std::optional<std::size_t> gaussian_index) {
    const Mat3 regression = sigma_pd * inverse_spd3(sigma_d, gaussian_index);
    return schur(sigma_p, regression, sigma_pd);
}

double mahalanobis_sq(const Vec3 &dir, const Vec3 &mu_d, const Mat3 &sigma_d_inv) {
    const Vec3 r   = dir - mu_d;
    const double D = r.dot(sigma_d_inv * r);
    if (D < 0.0) {
        ++g_clamped;
        return 0.0;
    }
    return D;
}

double f_cond(double mahalanobis, double lambda) {
    return std::exp(std::max(-lambda * mahalanobis, kMinExponent));
}

double conditional_opacity(double alpha, const Vec3 &mu_d, const Mat3 &sigma_d, const Vec3 &dir,
                           double lambda, std::optional<std::size_t> gaussian_index) {
    const Mat3 inv = inverse_spd3(sigma_d, gaussian_index);
    return alpha * f_cond(mahalanobis_sq(dir, mu_d, inv), lambda);
}

std::uint64_t mahalanobis_clamp_count() noexcept { return g_clamped; }

ScaleRotation extract_scale_rotation(const Mat3 &sigma_cond) {
    Eigen::SelfAdjointEigenSolver<Mat3> solver(symmetrize(sigma_cond));
    if (solver.info() != Eigen::Success) {
        throw NumericDegeneracyError("eigen decomposition of conditional covariance failed",
                                     std::nullopt);
    }
    // Eigen returns ascending eigenvalues; reverse to descending.
    const Vec3 values = solver.eigenvalues();
    const Mat3 vectors = solver.eigenvectors();
    ScaleRotation out;
    for (int i = 0; i < 3; ++i) {
        out.scale[i]          = std::sqrt(std::max(values[2 - i], 0.0));
        out.rotation.col(i) = vectors.col(2 - i);
    }
    if (out.rotation.determinant() < 0.0) out.rotation.col(2) *= -1.0;
    return out;
}

ConditionalGaussian3D slice(const Gaussian6D &g, const Vec3 &dir, bool want_scale_rotation,
                            const ModelOptions &opts, std::optional<std::size_t> gaussian_index) {
    const CovarianceBlocks blocks = partition(gaussian_covariance(g));
    const Vec3 mu_d               = effective_mu_d(g, opts);
    const Mat3 sigma_d_inv        = inverse_spd3(blocks.d, gaussian_index);
    const Mat3 regression         = blocks.pd * sigma_d_inv;

    ConditionalGaussian3D out;
    out.sigma_cond = schur(blocks.p, regression, blocks.pd);
    out.mu_cond    = regress_mean(g.raw_mu_p, regression, dir - mu_d);
    out.alpha_cond =
        activated_alpha(g) * f_cond(mahalanobis_sq(dir, mu_d, sigma_d_inv), activated_lambda(g));
    out.color = eval_color(g.sh, dir);
    if (want_scale_rotation) {
        const ScaleRotation sr = extract_scale_rotation(out.sigma_cond);
        out.scale    = sr.scale;
        out.rotation = sr.rotation;
    }
    return out;
}

InferenceCache precompute_inference(const Gaussian6D &g, const ModelOptions &opts,
                                    std::optional<std::size_t> gaussian_index) {
    const CovarianceBlocks blocks = partition(gaussian_covariance(g));
    InferenceCache cache;
    cache.mu_p        = g.raw_mu_p;
    cache.mu_d        = effective_mu_d(g, opts);
    cache.sigma_d_inv = inverse_spd3(blocks.d, gaussian_index);
    cache.regression  = blocks.pd * cache.sigma_d_inv;
    cache.sigma_cond  = schur(blocks.p, cache.regression, blocks.pd);
    cache.alpha       = activated_alpha(g);
    cache.lambda      = activated_lambda(g);
    cache.sh          = g.sh;
    return cache;
}

ConditionalGaussian3D slice_cached(const InferenceCache &cache, const Vec3 &dir) {
    ConditionalGaussian3D out;
    out.sigma_cond = cache.sigma_cond;
    out.mu_cond    = regress_mean(cache.mu_p, cache.regression, dir - cache.mu_d);
    out.alpha_cond =
        cache.alpha * f_cond(mahalanobis_sq(dir, cache.mu_d, cache.sigma_d_inv), cache.lambda);
    out.color = eval_color(cache.sh, dir);
    return out;
}

Vec3 view_direction(const Vec3 &mu_p, const Vec3 &camera_center) {
    const Vec3 v   = mu_p - camera_center;
    const double n = v.norm();
    if (n == 0.0) return Vec3(0.0, 0.0, 1.0);
    return v / n;
}

std::vector<ConditionalGaussian3D> slice_scene(std::span<const Gaussian6D> gaussians,
                                               const Vec3 &camera_center,
                                               const ModelOptions &opts) {
    std::vector<ConditionalGaussian3D> out(gaussians.size());
    const auto n = static_cast<std::ptrdiff_t>(gaussians.size());
    ParallelErrors errors;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        errors.run([&] {
            const auto idx = static_cast<std::size_t>(i);
            const auto &g  = gaussians[idx];
            out[idx] = slice(g, view_direction(g.raw_mu_p, camera_center), false, opts, idx);
        });
    }
    errors.rethrow();
    return out;
}

std::vector<InferenceCache> precompute_scene(std::span<const Gaussian6D> gaussians,
                                             const ModelOptions &opts) {
    std::vector<InferenceCache> out(gaussians.size());
    const auto n = static_cast<std::ptrdiff_t>(gaussians.size());
    ParallelErrors errors;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        errors.run([&] {
            const auto idx = static_cast<std::size_t>(i);
            out[idx]       = precompute_inference(gaussians[idx], opts, idx);
        });
    }
    errors.rethrow();
    return out;
}

std::vector<ConditionalGaussian3D> slice_scene_cached(std::span<const InferenceCache> caches,
                                                      const Vec3 &camera_center) {
    std::vector<ConditionalGaussian3D> out(caches.size());
    const auto n = static_cast<std::ptrdiff_t>(caches.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto &c = caches[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(i)] = slice_cached(c, view_direction(c.mu_p, camera_center));
    }
    return out;
}

} // namespace sixdgs
