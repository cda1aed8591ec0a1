// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "sixdgs/gaussian.hpp"

#include <cstddef>
#include <optional>
#include <random>
#include <vector>

namespace sixdgs {

struct GradientSet;

/// Screen-space statistics gathered between two densification events.
struct DensifyStats {
    std::vector<double> grad_norm_sum;
    std::vector<int> observations;
    std::vector<double> max_alpha_cond;
    /// Running sum of d loss / d mu_p, used for the clone offset direction.
    std::vector<Vec3> position_grad_sum;

    void reset(std::size_t n);
    std::size_t size() const { return observations.size(); }
    void accumulate(const GradientSet &grads);
    double grad_mean(std::size_t i) const;
};

struct DensifyThresholds {
    double grad_threshold = 2e-4;
    double percent_dense  = 0.01;
    double scene_extent   = 1.0;
    double tau_min        = 0.01;
    /// World-space cap on the largest conditional standard deviation.
    std::optional<double> big_gaussian_bound;
    /// Prune Gaussians whose position leaves this box.
    std::optional<Bbox> keep_box;
};

struct DensifyOutcome {
    std::size_t cloned = 0;
    std::size_t split  = 0;
    std::size_t pruned = 0;
    /// For every Gaussian of the new scene: its index in the old scene when
    /// it survived untouched, nullopt when it is a clone or a split child.
    std::vector<std::optional<std::size_t>> origin;
};

constexpr double kSplitShrink = 1.6;
constexpr int kSplitChildren  = 2;

/// Clone small high-gradient Gaussians, split large ones, then prune by
/// base opacity, size and position. Scale comes from the spectral
/// decomposition of the (direction independent) conditional covariance.
DensifyOutcome densify_and_prune(std::vector<Gaussian6D> &gaussians, const DensifyStats &stats,
                                 const DensifyThresholds &thresholds, std::mt19937_64 &rng);

/// Prune only (used by tests and by callers that skip densification).
DensifyOutcome prune(std::vector<Gaussian6D> &gaussians, const DensifyThresholds &thresholds);

/// Caps every activated opacity at 0.01. Idempotent.
void reset_opacity(std::vector<Gaussian6D> &gaussians);

/// Largest conditional standard deviation of a Gaussian.
double max_conditional_scale(const Gaussian6D &g);

/// Child of a split: positional rows of L scaled by 1 / kSplitShrink,
/// position moved to `new_mu_p`, everything else copied.
Gaussian6D shrink_positional(const Gaussian6D &g, const Vec3 &new_mu_p);

} // namespace sixdgs
