// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#include "test_util.hpp"

#include "sixdgs/error.hpp"
#include "sixdgs/io.hpp"
#include "sixdgs/metrics.hpp"
#include "sixdgs/synth.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace sixdgs;

namespace {

SynthSpec small_spec(std::uint64_t seed, double strength = 1.0) {
    SynthSpec s;
    s.seed        = seed;
    s.train_views = 6;
    s.test_views  = 2;
    s.width       = 32;
    s.height      = 32;
    s.strength    = strength;
    return s;
}

} // namespace

TEST(Synth, DeterministicPerSeed) {
    const SynthResult a = generate_synthetic(small_spec(3));
    const SynthResult b = generate_synthetic(small_spec(3));
    const SynthResult c = generate_synthetic(small_spec(4));
    EXPECT_EQ(a.scene.gaussians, b.scene.gaussians);
    ASSERT_EQ(a.train.images.size(), 6u);
    for (std::size_t i = 0; i < a.train.images.size(); ++i) EXPECT_EQ(a.train.images[i].rgb, b.train.images[i].rgb);
    EXPECT_NE(a.scene.gaussians, c.scene.gaussians);
}

TEST(Synth, ScenesAreViewDependentAndInsideTheUnitBox) {
    const SynthResult r = generate_synthetic(small_spec(5));
    ASSERT_EQ(r.scene.gaussians.size(), 10u);
    double coupling = 0.0;
    for (const auto &g : r.scene.gaussians) {
        EXPECT_LE(g.raw_mu_p.cwiseAbs().maxCoeff(), 0.5);
        EXPECT_NEAR(activated_lambda(g), 0.35, 1e-12);
        coupling = std::max(coupling, gaussian_covariance(g).block(0, 3, 3, 3).cwiseAbs().maxCoeff());
    }
    EXPECT_GT(coupling, 0.0);
}

TEST(Synth, ZeroStrengthIsViewIndependent) {
    const SynthResult r = generate_synthetic(small_spec(6, 0.0));
    std::mt19937_64 rng(7);
    for (const auto &g : r.scene.gaussians) {
        EXPECT_EQ(gaussian_covariance(g).block(0, 3, 3, 3).cwiseAbs().maxCoeff(), 0.0);
        EXPECT_EQ(activated_lambda(g), 0.0);
        const ConditionalGaussian3D ref = slice(g, Vec3(0.0, 0.0, 1.0), false);
        for (int t = 0; t < 5; ++t) {
            const ConditionalGaussian3D s = slice(g, test::random_unit(rng), false);
            EXPECT_EQ(s.mu_cond, ref.mu_cond);
            EXPECT_EQ(s.alpha_cond, ref.alpha_cond);
            EXPECT_EQ(s.color, ref.color);
        }
    }
}

TEST(Synth, TrainAndTestPosesDiffer) {
    const SynthSpec spec = small_spec(8);
    const SynthResult r  = generate_synthetic(spec);
    for (const auto &a : r.train.cameras) {
        EXPECT_NEAR(a.center().norm(), spec.orbit_radius, 1e-12);
        for (const auto &b : r.test.cameras) EXPECT_GT((a.center() - b.center()).norm(), 1e-6);
    }
}

TEST(Synth, TileRenderMatchesStoredTargets) {
    const SynthResult r = generate_synthetic(small_spec(9));
    for (std::size_t i = 0; i < r.test.cameras.size(); ++i) {
        const Image tile = render(r.scene, r.test.cameras[i]);
        EXPECT_GE(psnr(tile, r.test.images[i]), 90.0);
    }
}

TEST(Synth, WrittenDatasetLoadsBack) {
    test::TempDir dir;
    SynthSpec spec   = small_spec(10);
    spec.background  = Vec3(0.25, 0.5, 0.75);
    const SynthResult r = generate_synthetic(spec);
    write_dataset(dir.path(), r, spec);
    const Dataset ds = load_dataset(dir.path());
    ASSERT_EQ(ds.train.cameras.size(), 6u);
    ASSERT_EQ(ds.test.cameras.size(), 2u);
    EXPECT_EQ(ds.background, spec.background);
    ASSERT_TRUE(ds.bbox.has_value());
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_LT((ds.train.cameras[i].rotation - r.train.cameras[i].rotation).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((ds.train.cameras[i].center() - r.train.cameras[i].center()).norm(), 1e-12);
        EXPECT_EQ(ds.train.images[i].rgb, quantize8(r.train.images[i]).rgb);
    }
    const Scene gt = load_scene(dir / "gt_scene.ply");
    EXPECT_EQ(gt.gaussians.size(), r.scene.gaussians.size());
    EXPECT_EQ(gt.background, spec.background);
}

TEST(Synth, InvalidSpecIsRejected) {
    SynthSpec s = small_spec(1);
    s.strength  = 2.0;
    EXPECT_THROW(s.validate(), ValidationError);
    s = small_spec(1);
    s.train_views = 0;
    EXPECT_THROW(generate_synthetic(s), ValidationError);
}
