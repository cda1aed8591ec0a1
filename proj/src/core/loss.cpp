// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#include "sixdgs/metrics.hpp"
#include "sixdgs/optim.hpp"

#include <cmath>

namespace sixdgs {

namespace {

LossTerms loss_impl(const Image &rendered, const Image &target, double lambda_ssim, double scale,
                    Image *grad) {
    if (!rendered.same_shape(target)) {
        throw ValidationError("loss: rendered and target sizes differ");
    }
    if (!(lambda_ssim >= 0.0 && lambda_ssim <= 1.0)) {
        throw ValidationError("loss: lambda_ssim must lie in [0, 1]");
    }
    LossTerms terms;
    const std::size_t n = rendered.sample_count();
    if (n == 0) return terms;

    double l1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) l1 += std::abs(rendered.rgb[i] - target.rgb[i]);
    terms.l1 = l1 / static_cast<double>(n);

    if (grad) {
        const double w = scale * (1.0 - lambda_ssim) / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = rendered.rgb[i] - target.rgb[i];
            grad->rgb[i] += d > 0.0 ? w : (d < 0.0 ? -w : 0.0);
        }
    }

    if (lambda_ssim > 0.0) {
        if (grad) {
            Image g;
            terms.ssim = ssim_with_grad(rendered, target, g);
            for (std::size_t i = 0; i < n; ++i) grad->rgb[i] -= scale * lambda_ssim * g.rgb[i];
        } else {
            terms.ssim = ssim(rendered, target);
        }
    }
    terms.total = (1.0 - lambda_ssim) * terms.l1 + lambda_ssim * (1.0 - terms.ssim);
    return terms;
}

} // namespace

LossTerms loss(const Image &rendered, const Image &target, double lambda_ssim) {
    return loss_impl(rendered, target, lambda_ssim, 1.0, nullptr);
}

LossTerms loss_with_grad(const Image &rendered, const Image &target, double lambda_ssim,
                         double scale, Image &grad) {
    if (!grad.same_shape(rendered)) grad = Image(rendered.width, rendered.height);
    return loss_impl(rendered, target, lambda_ssim, scale, &grad);
}

} // namespace sixdgs
