// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "sixdgs/camera.hpp"
#include "sixdgs/gaussian.hpp"
#include "sixdgs/image.hpp"
#include "sixdgs/optim.hpp"

#include <cstdint>
#include <filesystem>

namespace sixdgs {

struct SynthSpec {
    std::uint64_t seed = 0;
    int gaussians      = 10;
    int train_views    = 32;
    int test_views     = 8;
    int width          = 64;
    int height         = 64;
    /// Scales the position-direction coupling and the SH bands above 0.
    /// At 0 the scene is view independent.
    double strength     = 1.0;
    double orbit_radius = 2.5;
    double fov_x        = 0.6911112070083618;
    Vec3 background     = Vec3::Zero();

    void validate() const;
};

struct SynthResult {
    Scene scene;
    TrainingData train;
    TrainingData test;
};

/// Ground-truth scene inside [-0.5, 0.5]^3, orbit cameras looking at the
/// origin and double-precision targets from the reference renderer.
SynthResult generate_synthetic(const SynthSpec &spec);

/// Orbit camera `index` of a view set; train and test sets never share poses.
Camera orbit_camera(const SynthSpec &spec, std::uint64_t stream, int index);

/// Writes transforms_{train,test}.json, 8-bit PNG targets, scene_meta.json and
/// the ground-truth scene as gt_scene.ply.
void write_dataset(const std::filesystem::path &dir, const SynthResult &synth,
                   const SynthSpec &spec);

} // namespace sixdgs
