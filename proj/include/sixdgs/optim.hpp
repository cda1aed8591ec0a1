// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "sixdgs/camera.hpp"
#include "sixdgs/error.hpp"
#include "sixdgs/gaussian.hpp"
#include "sixdgs/image.hpp"
#include "sixdgs/rasterizer.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sixdgs {

// ---------------------------------------------------------------------------
// Loss

struct LossTerms {
    double total = 0.0;
    double l1    = 0.0;
    double ssim  = 1.0; // 1 when the SSIM term is disabled
};

/// (1 - lambda_ssim) * L1 + lambda_ssim * (1 - SSIM). With lambda_ssim == 0
/// the SSIM term is skipped, so images smaller than 11x11 are accepted.
LossTerms loss(const Image &rendered, const Image &target, double lambda_ssim = 0.2);

/// Same, plus d loss / d rendered (scaled by `scale`) added into `grad`.
LossTerms loss_with_grad(const Image &rendered, const Image &target, double lambda_ssim,
                         double scale, Image &grad);

// ---------------------------------------------------------------------------
// Gradients

struct GradientOptions {
    ModelOptions model;
    RasterOptions raster;
    double lambda_ssim  = 0.2;
    bool train_lambda   = false; // false: d loss / d raw_lambda_opa is exactly 0
    bool sh_band0_only  = false;
};

/// Per-Gaussian gradients for one batch plus the screen-space statistics
/// density control needs.
struct GradientSet {
    std::vector<PackedParams> params;
    /// Sum over views of |d loss / d mean2d| in normalized device units.
    std::vector<double> view_grad_norm;
    std::vector<int> visible_count;
    std::vector<double> max_alpha_cond;

    void reset(std::size_t n);
};

struct BackwardResult {
    double loss = 0.0; // mean over the batch
    GradientSet grads;
};

/// Loss and gradient of the mean batch loss with respect to every raw
/// parameter. Throws NumericDegeneracyError-kind Error on a non-finite
/// gradient, naming the Gaussian and parameter.
BackwardResult backward(const Scene &scene, std::span<const Camera> cameras,
                        std::span<const Image> targets, const GradientOptions &opts);

enum class Renderer { Tile, Reference };

/// Render every Gaussian of `scene` from `cam`.
Image render(const Scene &scene, const Camera &cam, const ModelOptions &model = {},
             const RasterOptions &raster = {}, Renderer renderer = Renderer::Tile);

/// Forward-only mean batch loss.
double scene_loss(const Scene &scene, std::span<const Camera> cameras,
                  std::span<const Image> targets, const GradientOptions &opts,
                  Renderer renderer = Renderer::Tile);

/// Gradient through slicing for one Gaussian seen from `camera_center`.
PackedParams slice_backward(const Gaussian6D &g, const Vec3 &camera_center,
                            const ConditionalGrad &grad, const GradientOptions &opts);

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
    std::vector<PackedParams> m;
    std::vector<PackedParams> v;
    std::int64_t step = 0;

    void resize(std::size_t n);
};

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps   = 1e-8;

/// One Adam update; `lr` holds the learning rate of every packed slot.
void adam_step(std::span<PackedParams> params, std::span<const PackedParams> grads,
               AdamState &state, const PackedParams &lr);

// ---------------------------------------------------------------------------
// Training

enum class LambdaMode { Frozen, Learnable };

struct TrainConfig {
    int iterations = 2000;

    // Position lr decays exponentially from init to final over the run and
    // is multiplied by the scene extent.
    double lr_position_init  = 1.6e-4;
    double lr_position_final = 1.6e-6;
    double lr_covariance     = 1e-2;
    double lr_direction      = 1e-3;
    double lr_sh_dc          = 2.5e-3;
    double lr_sh_rest        = 2.5e-3 / 20.0;
    double lr_opacity        = 0.05;
    /// Unset: reuse lr_opacity.
    std::optional<double> lr_lambda;

    double lambda_ssim = 0.2;
    double tau_min     = 0.01;

    LambdaMode lambda_mode = LambdaMode::Frozen;
    double lambda_value    = 0.35; // frozen value, or initial value when learnable
    /// Fractions of `iterations` during which lambda is trainable.
    double lambda_window_start = 15000.0 / 30000.0;
    double lambda_window_end   = 28000.0 / 30000.0;

    double densify_start_fraction = 500.0 / 30000.0;
    double densify_stop_fraction  = 15000.0 / 30000.0;
    int densify_interval          = 100;
    double densify_grad_threshold = 2e-4;
    double percent_dense          = 0.01;
    bool opacity_reset            = true;
    int opacity_reset_interval    = 3000;
    double big_gaussian_fraction  = 0.1; // of scene extent

    bool no_sh                    = false;
    bool normalize_direction_mean = false;
    bool dilation                 = true;

    std::uint64_t seed      = 0;
    int batch_size          = 1;
    int log_interval        = 1;
    int checkpoint_interval = 100;
    /// Unset: 1.1 x the largest camera distance from the mean camera center.
    std::optional<double> scene_extent;

    void validate() const;
    ModelOptions model_options() const;
    RasterOptions raster_options() const;
};

struct LogRecord {
    int iteration = 0;
    double loss   = 0.0;
    double probe_psnr = 0.0;
    std::size_t gaussian_count = 0;

    std::string to_line() const;
};

struct TrainResult {
    Scene scene;
    std::vector<LogRecord> log;
    int densify_events = 0;
};

struct TrainingData {
    std::vector<Camera> cameras;
    std::vector<Image> images;
};

/// Raised when the loss turns non-finite; carries the last checkpoint.
class TrainingDiverged : public Error {
public:
    TrainingDiverged(int iteration, Scene checkpoint, const std::string &cause = {})
        : Error(ErrorKind::Numeric, "training diverged at iteration " + std::to_string(iteration) +
                                        (cause.empty() ? "" : ": " + cause)),
          iteration_(iteration), checkpoint_(std::move(checkpoint)) {}

    int iteration() const noexcept { return iteration_; }
    const Scene &checkpoint() const noexcept { return checkpoint_; }

private:
    int iteration_;
    Scene checkpoint_;
};

double camera_extent(std::span<const Camera> cameras);

/// `count` Gaussians uniformly inside `bbox` with nearest-neighbour sized
/// isotropic spatial extent, unit directional extent, zero cross terms,
/// opacity 0.1 and random base colors.
Scene random_cube_init(const Bbox &bbox, int count, const TrainConfig &config);

using LogSink = std::function<void(const LogRecord &)>;

TrainResult train(const Scene &initial, const TrainingData &data, const TrainConfig &config,
                  const LogSink &sink = {});

} // namespace sixdgs
