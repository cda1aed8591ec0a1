// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#include "test_util.hpp"

#include "sixdgs/error.hpp"
#include "sixdgs/optim.hpp"
#include "sixdgs/synth.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

using namespace sixdgs;

namespace {

SynthResult tiny_dataset() {
    SynthSpec spec;
    spec.seed        = 5;
    spec.gaussians   = 3;
    spec.train_views = 4;
    spec.test_views  = 1;
    spec.width       = 16;
    spec.height      = 16;
    return generate_synthetic(spec);
}

TrainConfig tiny_config(int iterations) {
    TrainConfig c;
    c.iterations       = iterations;
    c.densify_interval = 5;
    c.seed             = 11;
    return c;
}

Scene tiny_init(const TrainConfig &config, int count = 60) {
    Bbox box;
    box.min = Vec3::Constant(-0.6);
    box.max = Vec3::Constant(0.6);
    Scene s = random_cube_init(box, count, config);
    s.bbox  = box;
    return s;
}

} // namespace

TEST(TrainConfig, DefaultsValidate) { EXPECT_NO_THROW(TrainConfig{}.validate()); }

TEST(TrainConfig, RejectsBadValues) {
    TrainConfig c;
    c.lr_opacity = -1.0;
    EXPECT_THROW(c.validate(), ValidationError);
    c = TrainConfig{};
    c.lambda_window_start = 0.9;
    c.lambda_window_end   = 0.5;
    EXPECT_THROW(c.validate(), ValidationError);
    c = TrainConfig{};
    c.lambda_value = 1.5;
    EXPECT_THROW(c.validate(), ValidationError);
    c = TrainConfig{};
    c.iterations = -1;
    EXPECT_THROW(c.validate(), ValidationError);
}

TEST(LogRecord, LineFormat) {
    LogRecord r;
    r.iteration      = 7;
    r.loss           = 0.25;
    r.probe_psnr     = 31.5;
    r.gaussian_count = 12;
    EXPECT_EQ(r.to_line(), "iter=7 loss=0.25 psnr=31.500000 gaussians=12");
}

TEST(RandomCubeInit, RespectsBoxAndDefaults) {
    TrainConfig c;
    Bbox box;
    box.min = Vec3(-1.0, -2.0, 0.0);
    box.max = Vec3(1.0, 0.0, 0.5);
    const Scene s = random_cube_init(box, 300, c);
    ASSERT_EQ(s.gaussians.size(), 300u);
    for (const auto &g : s.gaussians) {
        EXPECT_TRUE(box.contains(g.raw_mu_p));
        EXPECT_NEAR(activated_alpha(g), 0.1, 1e-12);
        EXPECT_NEAR(activated_lambda(g), 0.35, 1e-12);
        const Mat6 sigma = gaussian_covariance(g);
        EXPECT_EQ(sigma.block(0, 3, 3, 3).cwiseAbs().maxCoeff(), 0.0);
        EXPECT_NEAR(sigma(0, 0), sigma(1, 1), 1e-15);
        EXPECT_NEAR(sigma(3, 3), 1.0, 1e-15);
        for (int k = 1; k < kShBasisCount; ++k) EXPECT_EQ(g.sh[k], 0.0);
    }
    c.lambda_value = 0.0;
    const Scene z  = random_cube_init(box, 5, c);
    EXPECT_EQ(activated_lambda(z.gaussians[0]), 0.0);
}

TEST(CameraExtent, OrbitRadius) {
    std::vector<Camera> cams;
    for (int i = 0; i < 8; ++i) {
        const double a = i * std::numbers::pi / 4.0;
        cams.push_back(Camera::look_at(Vec3(2.0 * std::cos(a), 2.0 * std::sin(a), 0.0), Vec3::Zero(),
                                       Vec3(0.0, 0.0, 1.0), 0.7, 8, 8));
    }
    EXPECT_NEAR(camera_extent(cams), 2.2, 1e-12);
}

TEST(Train, ZeroIterationsReturnsInitialScene) {
    const SynthResult data = tiny_dataset();
    const TrainConfig c    = tiny_config(0);
    const Scene init       = tiny_init(c);
    const TrainResult r    = train(init, data.train, c);
    EXPECT_EQ(r.scene.gaussians, init.gaussians);
    EXPECT_TRUE(r.log.empty());
}

TEST(Train, DeterministicPerSeed) {
    const SynthResult data = tiny_dataset();
    const TrainConfig c    = tiny_config(30);
    const Scene init       = tiny_init(c);
    const TrainResult a    = train(init, data.train, c);
    const TrainResult b    = train(init, data.train, c);
    EXPECT_EQ(a.scene.gaussians, b.scene.gaussians);
    ASSERT_EQ(a.log.size(), b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(a.log[i].to_line(), b.log[i].to_line());
}

TEST(Train, LossDecreasesAndLogFollowsInterval) {
    const SynthResult data = tiny_dataset();
    TrainConfig c          = tiny_config(60);
    c.log_interval         = 20;
    std::vector<LogRecord> seen;
    const TrainResult r = train(tiny_init(c), data.train, c, [&](const LogRecord &rec) { seen.push_back(rec); });
    ASSERT_EQ(r.log.size(), 3u);
    EXPECT_EQ(r.log[0].iteration, 20);
    EXPECT_EQ(r.log[2].iteration, 60);
    EXPECT_EQ(seen.size(), r.log.size());

    TrainConfig every = c;
    every.log_interval = 1;
    const TrainResult full = train(tiny_init(c), data.train, every);
    double early = 0.0, late = 0.0;
    for (int i = 0; i < 10; ++i) {
        early += full.log[i].loss;
        late += full.log[50 + i].loss;
    }
    EXPECT_LT(late, early);
}

TEST(Train, CountChangesOnlyAtDensifyIterations) {
    const SynthResult data = tiny_dataset();
    TrainConfig c          = tiny_config(40);
    c.densify_start_fraction = 0.1;
    c.densify_stop_fraction  = 0.9;
    c.densify_grad_threshold = 1e-6;
    const TrainResult r = train(tiny_init(c), data.train, c);
    std::size_t prev = 60;
    int changes      = 0;
    for (const auto &rec : r.log) {
        if (rec.gaussian_count != prev) {
            ++changes;
            EXPECT_EQ(rec.iteration % c.densify_interval, 0) << "iteration " << rec.iteration;
            EXPECT_GT(rec.iteration, 4);
            EXPECT_LT(rec.iteration, 36);
        }
        prev = rec.gaussian_count;
    }
    EXPECT_GT(changes, 0);
    EXPECT_GT(r.densify_events, 0);
}

TEST(Train, FrozenLambdaNeverMoves) {
    const SynthResult data = tiny_dataset();
    TrainConfig c          = tiny_config(20);
    c.densify_stop_fraction = 0.0;
    const Scene init       = tiny_init(c);
    const TrainResult r    = train(init, data.train, c);
    ASSERT_EQ(r.scene.gaussians.size(), init.gaussians.size());
    for (std::size_t i = 0; i < init.gaussians.size(); ++i) {
        EXPECT_EQ(r.scene.gaussians[i].raw_lambda_opa, init.gaussians[i].raw_lambda_opa);
        EXPECT_NE(r.scene.gaussians[i].raw_mu_p, init.gaussians[i].raw_mu_p);
    }
}

TEST(Train, LearnableLambdaMovesOnlyInsideWindow) {
    const SynthResult data = tiny_dataset();
    TrainConfig c          = tiny_config(20);
    c.densify_stop_fraction = 0.0;
    c.lambda_mode          = LambdaMode::Learnable;
    c.lambda_window_start  = 0.5;
    c.lambda_window_end    = 1.0;
    const Scene init = tiny_init(c);
    TrainConfig closed = c;
    closed.lambda_window_start = 0.0;
    closed.lambda_window_end   = 0.0;
    const TrainResult outside  = train(init, data.train, closed);
    for (std::size_t i = 0; i < init.gaussians.size(); ++i) {
        EXPECT_EQ(outside.scene.gaussians[i].raw_lambda_opa, init.gaussians[i].raw_lambda_opa);
    }
    const TrainResult full = train(init, data.train, c);
    int moved = 0;
    for (std::size_t i = 0; i < init.gaussians.size(); ++i) {
        moved += full.scene.gaussians[i].raw_lambda_opa != init.gaussians[i].raw_lambda_opa;
    }
    EXPECT_GT(moved, 0);
}

TEST(Train, NoShKeepsHigherBandsAtZero) {
    const SynthResult data = tiny_dataset();
    TrainConfig c          = tiny_config(15);
    c.no_sh                = true;
    const TrainResult r    = train(tiny_init(c), data.train, c);
    for (const auto &g : r.scene.gaussians) {
        for (int ch = 0; ch < 3; ++ch) {
            for (int k = 1; k < kShBasisCount; ++k) EXPECT_EQ(g.sh[ch * kShBasisCount + k], 0.0);
        }
    }
}

TEST(Train, NonFiniteLossRaisesWithCheckpoint) {
    SynthResult data = tiny_dataset();
    for (auto &img : data.train.images) img.rgb[0] = std::numeric_limits<double>::quiet_NaN();
    const TrainConfig c = tiny_config(5);
    const Scene init    = tiny_init(c);
    try {
        train(init, data.train, c);
        FAIL() << "expected divergence";
    } catch (const TrainingDiverged &e) {
        EXPECT_EQ(e.iteration(), 1);
        EXPECT_EQ(e.checkpoint().gaussians, init.gaussians);
        EXPECT_EQ(e.kind(), ErrorKind::Numeric);
    }
}
