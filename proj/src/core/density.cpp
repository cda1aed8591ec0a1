// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#include "sixdgs/density.hpp"

#include "sixdgs/optim.hpp"
#include "sixdgs/slicer.hpp"

#include <algorithm>
#include <cmath>

namespace sixdgs {

void DensifyStats::reset(std::size_t n) {
    grad_norm_sum.assign(n, 0.0);
    observations.assign(n, 0);
    max_alpha_cond.assign(n, 0.0);
    position_grad_sum.assign(n, Vec3::Zero());
}

void DensifyStats::accumulate(const GradientSet &grads) {
    const std::size_t n = grads.params.size();
    if (size() != n) reset(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (grads.visible_count[i] == 0) continue;
        grad_norm_sum[i] += grads.view_grad_norm[i];
        observations[i] += grads.visible_count[i];
        max_alpha_cond[i] = std::max(max_alpha_cond[i], grads.max_alpha_cond[i]);
        const auto &p = grads.params[i];
        position_grad_sum[i] += Vec3(p[param::kMuP], p[param::kMuP + 1], p[param::kMuP + 2]);
    }
}

double DensifyStats::grad_mean(std::size_t i) const {
    if (observations[i] == 0) return 0.0;
    return grad_norm_sum[i] / observations[i];
}

double max_conditional_scale(const Gaussian6D &g) {
    const CovarianceBlocks b = partition(gaussian_covariance(g));
    return extract_scale_rotation(conditional_cov(b.p, b.pd, b.d)).scale.maxCoeff();
}

Gaussian6D shrink_positional(const Gaussian6D &g, const Vec3 &new_mu_p) {
    Gaussian6D child = g;
    child.raw_mu_p   = new_mu_p;
    const double s   = 1.0 / kSplitShrink;
    for (int i = 0; i < 3; ++i) child.raw_L[i] = g.raw_L[i] + std::log(s);
    // Off-diagonal slots 0..2 are (1,0) (2,0) (2,1): the positional rows.
    for (int k = 0; k < 3; ++k) child.raw_L[6 + k] = std::atanh(s * std::tanh(g.raw_L[6 + k]));
    return child;
}

namespace {

bool should_prune(const Gaussian6D &g, const DensifyThresholds &t) {
    if (activated_alpha(g) < t.tau_min) return true;
    if (t.keep_box && !t.keep_box->contains(g.raw_mu_p)) return true;
    if (t.big_gaussian_bound && max_conditional_scale(g) > *t.big_gaussian_bound) return true;
    return false;
}

} // namespace

DensifyOutcome prune(std::vector<Gaussian6D> &gaussians, const DensifyThresholds &thresholds) {
    DensifyOutcome out;
    std::vector<Gaussian6D> kept;
    kept.reserve(gaussians.size());
    for (std::size_t i = 0; i < gaussians.size(); ++i) {
        if (should_prune(gaussians[i], thresholds)) {
            ++out.pruned;
            continue;
        }
        kept.push_back(gaussians[i]);
        out.origin.emplace_back(i);
    }
    gaussians = std::move(kept);
    return out;
}

DensifyOutcome densify_and_prune(std::vector<Gaussian6D> &gaussians, const DensifyStats &stats,
                                 const DensifyThresholds &thresholds, std::mt19937_64 &rng) {
    const std::size_t n = gaussians.size();
    const double size_limit = thresholds.percent_dense * thresholds.scene_extent;

    std::vector<Gaussian6D> next;
    std::vector<std::optional<std::size_t>> origin;
    std::vector<Gaussian6D> added;
    next.reserve(n);
    std::size_t cloned = 0, split = 0;
    std::normal_distribution<double> normal(0.0, 1.0);

    for (std::size_t i = 0; i < n; ++i) {
        const Gaussian6D &g = gaussians[i];
        const bool hot      = i < stats.size() && stats.grad_mean(i) > thresholds.grad_threshold;
        if (!hot) {
            next.push_back(g);
            origin.emplace_back(i);
            continue;
        }
        const double max_scale = max_conditional_scale(g);
        if (max_scale < size_limit) {
            next.push_back(g);
            origin.emplace_back(i);
            Gaussian6D copy = g;
            const Vec3 dir  = stats.position_grad_sum[i];
            if (dir.norm() > 0.0) copy.raw_mu_p -= max_scale * dir.normalized();
            added.push_back(copy);
            ++cloned;
        } else {
            // Sigma_p = L_pp L_pp^T, so L_pp maps N(0, I) onto N(0, Sigma_p).
            const Mat3 L_pp = activate_cholesky(g.raw_L).topLeftCorner<3, 3>();
            for (int c = 0; c < kSplitChildren; ++c) {
                const Vec3 z(normal(rng), normal(rng), normal(rng));
                added.push_back(shrink_positional(g, g.raw_mu_p + L_pp * z));
            }
            ++split;
        }
    }
    for (auto &g : added) {
        next.push_back(std::move(g));
        origin.emplace_back(std::nullopt);
    }

    DensifyOutcome pruned = prune(next, thresholds);
    DensifyOutcome out;
    out.cloned = cloned;
    out.split  = split;
    out.pruned = pruned.pruned;
    out.origin.reserve(pruned.origin.size());
    for (const auto &o : pruned.origin) out.origin.push_back(origin[*o]);
    gaussians = std::move(next);
    return out;
}

void reset_opacity(std::vector<Gaussian6D> &gaussians) {
    const double cap = logit(0.01);
    for (auto &g : gaussians) {
        if (g.raw_alpha > cap) g.raw_alpha = cap;
    }
}

} // namespace sixdgs
