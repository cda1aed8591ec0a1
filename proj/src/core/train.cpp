// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#include "sixdgs/density.hpp"
#include "sixdgs/metrics.hpp"
#include "sixdgs/optim.hpp"
#include "sixdgs/sh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <unordered_map>

namespace sixdgs {

void TrainConfig::validate() const {
    auto positive = [](double v, const char *name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ValidationError(std::string("train config: ") + name + " must be > 0");
        }
    };
    if (iterations < 0) throw ValidationError("train config: iterations must be >= 0");
    positive(lr_position_init, "lr_position_init");
    positive(lr_position_final, "lr_position_final");
    positive(lr_covariance, "lr_covariance");
    positive(lr_direction, "lr_direction");
    positive(lr_sh_dc, "lr_sh_dc");
    positive(lr_sh_rest, "lr_sh_rest");
    positive(lr_opacity, "lr_opacity");
    if (lr_lambda) positive(*lr_lambda, "lr_lambda");
    if (!(lambda_ssim >= 0.0 && lambda_ssim <= 1.0)) {
        throw ValidationError("train config: lambda_ssim must lie in [0, 1]");
    }
    if (!(tau_min >= 0.0 && tau_min < 1.0)) {
        throw ValidationError("train config: tau_min must lie in [0, 1)");
    }
    if (!(lambda_value >= 0.0 && lambda_value <= 1.0)) {
        throw ValidationError("train config: lambda_value must lie in [0, 1]");
    }
    auto fraction = [](double v, const char *name) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw ValidationError(std::string("train config: ") + name + " must lie in [0, 1]");
        }
    };
    fraction(lambda_window_start, "lambda_window_start");
    fraction(lambda_window_end, "lambda_window_end");
    fraction(densify_start_fraction, "densify_start_fraction");
    fraction(densify_stop_fraction, "densify_stop_fraction");
    if (lambda_window_start > lambda_window_end) {
        throw ValidationError("train config: lambda window start exceeds its end");
    }
    if (densify_interval < 1 || opacity_reset_interval < 1 || batch_size < 1 ||
        log_interval < 1 || checkpoint_interval < 1) {
        throw ValidationError("train config: intervals and batch size must be >= 1");
    }
    positive(densify_grad_threshold, "densify_grad_threshold");
    positive(percent_dense, "percent_dense");
    positive(big_gaussian_fraction, "big_gaussian_fraction");
    if (scene_extent) positive(*scene_extent, "scene_extent");
}

ModelOptions TrainConfig::model_options() const {
    ModelOptions m;
    m.normalize_direction_mean = normalize_direction_mean;
    return m;
}

RasterOptions TrainConfig::raster_options() const {
    RasterOptions r;
    r.dilation = dilation;
    return r;
}

std::string LogRecord::to_line() const {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "iter=%d loss=%.9g psnr=%.6f gaussians=%zu", iteration, loss,
                  probe_psnr, gaussian_count);
    return buf;
}

double camera_extent(std::span<const Camera> cameras) {
    if (cameras.empty()) return 1.0;
    Vec3 mean = Vec3::Zero();
    for (const auto &c : cameras) mean += c.center();
    mean /= static_cast<double>(cameras.size());
    double radius = 0.0;
    for (const auto &c : cameras) radius = std::max(radius, (c.center() - mean).norm());
    return radius > 0.0 ? 1.1 * radius : 1.0;
}

namespace {

// Mean squared distance to the 3 nearest neighbours, via a uniform grid.
std::vector<double> knn3_mean_sq(const std::vector<Vec3> &pts, const Bbox &box) {
    const std::size_t n = pts.size();
    std::vector<double> out(n, 1e-4);
    if (n < 2) return out;
    const Vec3 ext      = box.extent().cwiseMax(1e-9);
    const double volume = ext.prod();
    const double cell   = std::cbrt(volume / static_cast<double>(n)) * 1.5;
    auto key = [&](const Vec3 &p) {
        const Vec3 r = (p - box.min) / cell;
        return Eigen::Vector3i(static_cast<int>(std::floor(r.x())),
                               static_cast<int>(std::floor(r.y())),
                               static_cast<int>(std::floor(r.z())));
    };
    auto hash = [](const Eigen::Vector3i &k) {
        return (static_cast<std::int64_t>(k.x()) * 73856093) ^
               (static_cast<std::int64_t>(k.y()) * 19349663) ^
               (static_cast<std::int64_t>(k.z()) * 83492791);
    };
    std::unordered_map<std::int64_t, std::vector<std::size_t>> grid;
    for (std::size_t i = 0; i < n; ++i) grid[hash(key(pts[i]))].push_back(i);

    const int max_ring = static_cast<int>(std::ceil(ext.maxCoeff() / cell)) + 1;
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector3i k = key(pts[i]);
        std::array<double, 3> best{1e300, 1e300, 1e300};
        for (int ring = 0; ring <= max_ring; ++ring) {
            for (int dz = -ring; dz <= ring; ++dz)
                for (int dy = -ring; dy <= ring; ++dy)
                    for (int dx = -ring; dx <= ring; ++dx) {
                        if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
                        const auto it = grid.find(hash(k + Eigen::Vector3i(dx, dy, dz)));
                        if (it == grid.end()) continue;
                        for (const std::size_t j : it->second) {
                            if (j == i) continue;
                            const double d2 = (pts[j] - pts[i]).squaredNorm();
                            if (d2 < best[2]) {
                                best[2] = d2;
                                std::sort(best.begin(), best.end());
                            }
                        }
                    }
            // Every point outside the searched shell is at least ring * cell away.
            const double reach = ring * cell;
            if (best[2] < 1e300 && best[2] <= reach * reach) break;
        }
        int found  = 0;
        double sum = 0.0;
        for (const double b : best) {
            if (b < 1e300) {
                sum += b;
                ++found;
            }
        }
        if (found > 0) out[i] = std::max(sum / found, 1e-7);
    }
    return out;
}

PackedParams learning_rates(const TrainConfig &c, double position_lr, bool lambda_trainable) {
    PackedParams lr{};
    for (int i = 0; i < 3; ++i) {
        lr[param::kMuP + i] = position_lr;
        lr[param::kMuD + i] = c.lr_direction;
    }
    for (int i = 0; i < kCholeskyCount; ++i) lr[param::kLDiag + i] = c.lr_covariance;
    lr[param::kAlpha] = c.lr_opacity;
    for (int ch = 0; ch < 3; ++ch) {
        lr[param::kSh + ch * kShBasisCount] = c.lr_sh_dc;
        for (int k = 1; k < kShBasisCount; ++k) {
            lr[param::kSh + ch * kShBasisCount + k] = c.no_sh ? 0.0 : c.lr_sh_rest;
        }
    }
    lr[param::kLambda] = lambda_trainable ? c.lr_lambda.value_or(c.lr_opacity) : 0.0;
    return lr;
}

double position_lr(const TrainConfig &c, double extent, int iteration) {
    const double t = c.iterations > 0 ? std::clamp(static_cast<double>(iteration) / c.iterations,
                                                   0.0, 1.0)
                                      : 0.0;
    const double log_lr =
        (1.0 - t) * std::log(c.lr_position_init) + t * std::log(c.lr_position_final);
    return std::exp(log_lr) * extent;
}

int fraction_to_iteration(double fraction, int iterations) {
    return static_cast<int>(std::lround(fraction * iterations));
}

} // namespace

Scene random_cube_init(const Bbox &bbox, int count, const TrainConfig &config) {
    if (count < 0) throw ValidationError("random init: point count must be >= 0");
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Vec3> pts(static_cast<std::size_t>(count));
    for (auto &p : pts) {
        for (int a = 0; a < 3; ++a) p[a] = bbox.min[a] + unit(rng) * (bbox.max[a] - bbox.min[a]);
    }
    const std::vector<double> d2 = knn3_mean_sq(pts, bbox);

    Scene scene;
    scene.bbox = bbox;
    scene.gaussians.resize(pts.size());
    const double raw_lambda = logit(config.lambda_value);
    constexpr double kY0    = 0.28209479177387814;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        Gaussian6D &g = scene.gaussians[i];
        g.raw_mu_p    = pts[i];
        const double log_scale = 0.5 * std::log(d2[i]);
        for (int a = 0; a < 3; ++a) g.raw_L[a] = log_scale;
        g.raw_alpha      = logit(0.1);
        g.raw_lambda_opa = raw_lambda;
        for (int c = 0; c < 3; ++c) {
            g.sh[c * kShBasisCount] = logit(0.2 + 0.6 * unit(rng)) / kY0;
        }
    }
    return scene;
}

TrainResult train(const Scene &initial, const TrainingData &data, const TrainConfig &config,
                  const LogSink &sink) {
    config.validate();
    if (data.cameras.empty() || data.cameras.size() != data.images.size()) {
        throw ValidationError("train: dataset must hold one image per camera and be non-empty");
    }
    for (std::size_t i = 0; i < data.cameras.size(); ++i) {
        if (data.images[i].width != data.cameras[i].width ||
            data.images[i].height != data.cameras[i].height) {
            throw ValidationError("train: image " + std::to_string(i) +
                                  " does not match its camera size");
        }
    }

    TrainResult result;
    result.scene = initial;
    Scene &scene = result.scene;
    if (config.iterations == 0) return result;

    const double extent = config.scene_extent.value_or(camera_extent(data.cameras));
    std::mt19937_64 rng(config.seed);

    GradientOptions gopts;
    gopts.model         = config.model_options();
    gopts.raster        = config.raster_options();
    gopts.lambda_ssim   = config.lambda_ssim;
    gopts.sh_band0_only = config.no_sh;

    const int densify_start = fraction_to_iteration(config.densify_start_fraction, config.iterations);
    const int densify_stop  = fraction_to_iteration(config.densify_stop_fraction, config.iterations);
    const int lambda_start  = fraction_to_iteration(config.lambda_window_start, config.iterations);
    const int lambda_end    = fraction_to_iteration(config.lambda_window_end, config.iterations);

    AdamState adam;
    adam.resize(scene.gaussians.size());
    DensifyStats stats;
    stats.reset(scene.gaussians.size());
    Scene checkpoint = scene;

    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    auto next_view = [&]() {
        if (cursor >= order.size()) {
            order.resize(data.cameras.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::shuffle(order.begin(), order.end(), rng);
            cursor = 0;
        }
        return order[cursor++];
    };

    for (int it = 1; it <= config.iterations; ++it) {
        if (scene.gaussians.empty()) break;
        std::vector<Camera> cams;
        std::vector<Image> targets;
        for (int b = 0; b < config.batch_size; ++b) {
            const std::size_t v = next_view();
            cams.push_back(data.cameras[v]);
            targets.push_back(data.images[v]);
        }
        const bool lambda_trainable = config.lambda_mode == LambdaMode::Learnable &&
                                      it >= lambda_start && it <= lambda_end;
        gopts.train_lambda = lambda_trainable;

        BackwardResult br;
        try {
            br = backward(scene, cams, targets, gopts);
        } catch (const Error &e) {
            if (e.kind() == ErrorKind::Numeric) throw TrainingDiverged(it, checkpoint, e.what());
            throw;
        }
        if (!std::isfinite(br.loss)) throw TrainingDiverged(it, checkpoint);

        std::vector<PackedParams> params(scene.gaussians.size());
        for (std::size_t i = 0; i < params.size(); ++i) params[i] = pack(scene.gaussians[i]);
        adam_step(params, br.grads.params, adam,
                  learning_rates(config, position_lr(config, extent, it), lambda_trainable));
        for (std::size_t i = 0; i < params.size(); ++i) scene.gaussians[i] = unpack(params[i]);

        if (it < densify_stop) {
            stats.accumulate(br.grads);
            if (it > densify_start && it % config.densify_interval == 0) {
                DensifyThresholds th;
                th.grad_threshold = config.densify_grad_threshold;
                th.percent_dense  = config.percent_dense;
                th.scene_extent   = extent;
                th.tau_min        = config.tau_min;
                th.keep_box       = scene.bbox.expanded(2.0);
                if (it > config.opacity_reset_interval) {
                    th.big_gaussian_bound = config.big_gaussian_fraction * extent;
                }
                const DensifyOutcome out = densify_and_prune(scene.gaussians, stats, th, rng);
                AdamState remapped;
                remapped.step = adam.step;
                remapped.resize(out.origin.size());
                for (std::size_t i = 0; i < out.origin.size(); ++i) {
                    if (out.origin[i]) {
                        remapped.m[i] = adam.m[*out.origin[i]];
                        remapped.v[i] = adam.v[*out.origin[i]];
                    }
                }
                adam = std::move(remapped);
                stats.reset(scene.gaussians.size());
                ++result.densify_events;
            }
            if (config.opacity_reset && it % config.opacity_reset_interval == 0) {
                reset_opacity(scene.gaussians);
            }
        }

        if (it % config.log_interval == 0 || it == config.iterations) {
            LogRecord rec;
            rec.iteration      = it;
            rec.loss           = br.loss;
            rec.gaussian_count = scene.gaussians.size();
            const Image probe  = render(scene, data.cameras.front(), gopts.model, gopts.raster);
            rec.probe_psnr     = psnr(probe, data.images.front());
            result.log.push_back(rec);
            if (sink) sink(rec);
        }
        if (it % config.checkpoint_interval == 0) checkpoint = scene;
    }
    return result;
}

} // namespace sixdgs
