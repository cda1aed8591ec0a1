// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#include "sixdgs/optim.hpp"
#include "sixdgs/parallel.hpp"
#include "sixdgs/sh.hpp"
#include "sixdgs/slicer.hpp"

#include <algorithm>
#include <cmath>

namespace sixdgs {

void GradientSet::reset(std::size_t n) {
    params.assign(n, PackedParams{});
    view_grad_norm.assign(n, 0.0);
    visible_count.assign(n, 0);
    max_alpha_cond.assign(n, 0.0);
}

PackedParams slice_backward(const Gaussian6D &g, const Vec3 &camera_center,
                            const ConditionalGrad &grad, const GradientOptions &opts) {
    // Forward recomputation.
    const Mat6 L                  = activate_cholesky(g.raw_L);
    const CovarianceBlocks blocks = partition(covariance(L));
    const Vec3 mu_d               = effective_mu_d(g, opts.model);
    const Mat3 P_inv              = inverse_spd3(blocks.d);
    const Mat3 A                  = blocks.pd * P_inv;

    const Vec3 v    = g.raw_mu_p - camera_center;
    const double vn = v.norm();
    const Vec3 d    = vn > 0.0 ? Vec3(v / vn) : Vec3(0.0, 0.0, 1.0);
    const Vec3 r    = d - mu_d;
    const Vec3 q    = P_inv * r;
    const double D_raw = r.dot(q);
    const double D  = std::max(D_raw, 0.0);
    const double alpha  = activated_alpha(g);
    const double lambda = activated_lambda(g);
    const double expo   = -lambda * D;
    const double f      = f_cond(D, lambda);

    PackedParams out{};

    // alpha_cond = alpha * f
    const double g_alpha = grad.alpha_cond * f;
    double g_lambda = 0.0;
    double g_D      = 0.0;
    if (expo > -700.0 && D_raw >= 0.0) {
        const double g_f = grad.alpha_cond * alpha;
        g_D              = g_f * f * (-lambda);
        g_lambda         = g_f * f * (-D);
    }

    // mu_cond = mu_p + Sigma_pd q, q = P^-1 r
    Vec3 g_mu_p    = grad.mu_cond;
    Mat3 g_pd      = grad.mu_cond * q.transpose();
    const Vec3 g_q = blocks.pd.transpose() * grad.mu_cond;
    Vec3 g_r       = 2.0 * g_D * q + P_inv * g_q;
    Mat3 g_P       = -g_D * (q * q.transpose()) - (P_inv * g_q) * q.transpose();

    // sigma_cond = sym(Sigma_p - Sigma_pd P^-1 Sigma_pd^T)
    const Mat3 g_X = 0.5 * (grad.sigma_cond + grad.sigma_cond.transpose());
    const Mat3 g_p = g_X;
    g_pd -= 2.0 * g_X * A;
    g_P += A.transpose() * g_X * A;

    // color = sigmoid(beta . Y(d))
    ShBasis Y;
    std::array<Vec3, kShBasisCount> dY;
    eval_sh_basis_grad(d, Y, dY);
    Vec3 g_d = g_r;
    for (int c = 0; c < 3; ++c) {
        double z = 0.0;
        for (int k = 0; k < kShBasisCount; ++k) z += g.sh[c * kShBasisCount + k] * Y[k];
        const double col = sigmoid(z);
        const double g_z = grad.color[c] * col * (1.0 - col);
        const int kmax   = opts.sh_band0_only ? 1 : kShBasisCount;
        for (int k = 0; k < kmax; ++k) out[param::kSh + c * kShBasisCount + k] = g_z * Y[k];
        for (int k = 1; k < kShBasisCount; ++k) g_d += (g_z * g.sh[c * kShBasisCount + k]) * dY[k];
    }

    // d = (mu_p - o) / |mu_p - o|
    if (vn > 0.0) g_mu_p += (g_d - d * d.dot(g_d)) / vn;

    // mu_d
    Vec3 g_mu_d = -g_r;
    if (opts.model.normalize_direction_mean) {
        const double n = g.raw_mu_d.norm();
        if (n > 0.0) g_mu_d = (g_mu_d - mu_d * mu_d.dot(g_mu_d)) / n;
    }

    // Sigma = sym(L L^T); blocks read from the top-left, top-right and
    // bottom-right corners.
    Mat6 G                     = Mat6::Zero();
    G.topLeftCorner<3, 3>()     = g_p;
    G.topRightCorner<3, 3>()    = g_pd;
    G.bottomRightCorner<3, 3>() = g_P;
    const Mat6 Gs              = 0.5 * (G + G.transpose());
    const Mat6 g_L             = 2.0 * Gs * L;

    for (int i = 0; i < 3; ++i) {
        out[param::kMuP + i] = g_mu_p[i];
        out[param::kMuD + i] = g_mu_d[i];
    }
    for (int i = 0; i < 6; ++i) out[param::kLDiag + i] = g_L(i, i) * L(i, i);
    for (int k = 0; k < 15; ++k) {
        const auto [row, col]     = offdiag_index(k);
        const double t            = L(row, col);
        out[param::kLOffDiag + k] = g_L(row, col) * (1.0 - t * t);
    }
    out[param::kAlpha] = g_alpha * alpha * (1.0 - alpha);
    out[param::kLambda] =
        opts.train_lambda && lambda > 0.0 ? g_lambda * lambda * (1.0 - lambda) : 0.0;
    return out;
}

Image render(const Scene &scene, const Camera &cam, const ModelOptions &model,
             const RasterOptions &raster, Renderer renderer) {
    const auto sliced = slice_scene(scene.gaussians, cam.center(), model);
    if (renderer == Renderer::Reference) {
        return rasterize_reference(sliced, cam, scene.background, raster);
    }
    return rasterize(sliced, cam, scene.background, raster);
}

double scene_loss(const Scene &scene, std::span<const Camera> cameras,
                  std::span<const Image> targets, const GradientOptions &opts, Renderer renderer) {
    if (cameras.size() != targets.size() || cameras.empty()) {
        throw ValidationError("scene_loss: need one target per camera");
    }
    double total = 0.0;
    for (std::size_t v = 0; v < cameras.size(); ++v) {
        const Image img = render(scene, cameras[v], opts.model, opts.raster, renderer);
        total += loss(img, targets[v], opts.lambda_ssim).total;
    }
    return total / static_cast<double>(cameras.size());
}

BackwardResult backward(const Scene &scene, std::span<const Camera> cameras,
                        std::span<const Image> targets, const GradientOptions &opts) {
    if (scene.gaussians.empty()) throw ValidationError("backward: scene is empty");
    if (cameras.size() != targets.size() || cameras.empty()) {
        throw ValidationError("backward: need one target per camera");
    }
    const std::size_t n = scene.gaussians.size();
    BackwardResult result;
    result.grads.reset(n);
    const double batch_scale = 1.0 / static_cast<double>(cameras.size());

    for (std::size_t v = 0; v < cameras.size(); ++v) {
        const Camera &cam   = cameras[v];
        const Vec3 center   = cam.center();
        const auto sliced   = slice_scene(scene.gaussians, center, opts.model);
        const ForwardState st = render_forward(sliced, cam, scene.background, opts.raster);

        Image grad_image;
        result.loss +=
            batch_scale *
            loss_with_grad(st.image, targets[v], opts.lambda_ssim, batch_scale, grad_image).total;

        const std::vector<SplatGrad> splat_grads = rasterize_backward(st, grad_image);

        const auto visible = static_cast<std::ptrdiff_t>(st.splats.size());
        ParallelErrors errors;
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t s = 0; s < visible; ++s) {
            errors.run([&] {
                const std::size_t i = st.source[static_cast<std::size_t>(s)];
                const SplatGrad &sg = splat_grads[static_cast<std::size_t>(s)];
                const ConditionalGrad cgrad = project_backward(sliced[i], cam, opts.raster, sg);
                const PackedParams pg = slice_backward(scene.gaussians[i], center, cgrad, opts);
                auto &acc = result.grads.params[i];
                for (int k = 0; k < kParamCount; ++k) acc[k] += pg[k];
                const Vec2 ndc(sg.mean2d.x() * 0.5 * cam.width, sg.mean2d.y() * 0.5 * cam.height);
                result.grads.view_grad_norm[i] += ndc.norm();
                result.grads.visible_count[i] += 1;
                result.grads.max_alpha_cond[i] =
                    std::max(result.grads.max_alpha_cond[i], sliced[i].alpha_cond);
            });
        }
        errors.rethrow();
    }

    const auto &names = param_names();
    for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < kParamCount; ++k) {
            if (!std::isfinite(result.grads.params[i][k])) {
                throw Error(ErrorKind::Numeric, "non-finite gradient for gaussian " +
                                                    std::to_string(i) + " parameter " +
                                                    names[k]);
            }
        }
    }
    return result;
}

} // namespace sixdgs
