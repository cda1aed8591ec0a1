// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#include "sixdgs/synth.hpp"

#include "sixdgs/io.hpp"
#include "sixdgs/sh.hpp"
#include "sixdgs/slicer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace sixdgs {

void SynthSpec::validate() const {
    if (gaussians < 1) throw ValidationError("synth: gaussian count must be >= 1");
    if (train_views < 1 || test_views < 0) {
        throw ValidationError("synth: need at least one training view and no negative counts");
    }
    if (width < 8 || height < 8) throw ValidationError("synth: image size must be >= 8");
    if (!(strength >= 0.0 && strength <= 1.0)) {
        throw ValidationError("synth: strength must lie in [0, 1]");
    }
    if (!(orbit_radius > 1.0) || !std::isfinite(orbit_radius)) {
        throw ValidationError("synth: orbit radius must exceed 1");
    }
    if (!(fov_x > 0.0 && fov_x < std::numbers::pi)) {
        throw ValidationError("synth: fov_x must lie in (0, pi)");
    }
    if (!background.allFinite()) throw ValidationError("synth: background must be finite");
}

Camera orbit_camera(const SynthSpec &spec, std::uint64_t stream, int index) {
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                      0x6d6f7473u};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double azimuth = 2.0 * std::numbers::pi * unit(rng);
    const double z       = -0.6 + 1.45 * unit(rng);
    const double r_xy    = std::sqrt(1.0 - z * z);
    const Vec3 eye = spec.orbit_radius * Vec3(r_xy * std::cos(azimuth), r_xy * std::sin(azimuth), z);
    return Camera::look_at(eye, Vec3::Zero(), Vec3(0.0, 0.0, 1.0), spec.fov_x, spec.width,
                           spec.height);
}

namespace {

constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kTestStream  = 2;

Gaussian6D random_gaussian(std::mt19937_64 &rng, double strength) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    Gaussian6D g;
    for (int a = 0; a < 3; ++a) g.raw_mu_p[a] = uniform(-0.35, 0.35);

    Vec3 dir(uniform(-1.0, 1.0), uniform(-1.0, 1.0), uniform(-1.0, 1.0));
    if (dir.norm() < 1e-3) dir = Vec3(0.0, 0.0, 1.0);
    g.raw_mu_d = dir.normalized() * uniform(0.3, 1.0);

    double min_scale = 1.0;
    for (int a = 0; a < 3; ++a) {
        const double s = uniform(0.05, 0.14);
        min_scale      = std::min(min_scale, s);
        g.raw_L[a]     = std::log(s);
    }
    for (int a = 3; a < 6; ++a) g.raw_L[a] = std::log(uniform(0.5, 0.9));
    for (int k = 0; k < 15; ++k) {
        const auto [row, col] = offdiag_index(k);
        double v              = 0.0;
        if (row < 3) {
            v = uniform(-0.5, 0.5) * min_scale;
        } else if (col < 3) {
            v = std::clamp(strength * uniform(-0.6, 0.6), -0.95, 0.95);
        } else {
            v = uniform(-0.2, 0.2);
        }
        g.raw_L[6 + k] = std::atanh(v);
    }

    g.raw_alpha      = logit(uniform(0.6, 0.95));
    g.raw_lambda_opa = strength > 0.0 ? logit(0.35) : logit(0.0);

    constexpr double kY0 = 0.28209479177387814;
    for (int c = 0; c < 3; ++c) {
        g.sh[c * kShBasisCount] = logit(uniform(0.15, 0.85)) / kY0;
        for (int k = 1; k < kShBasisCount; ++k) {
            g.sh[c * kShBasisCount + k] = strength * uniform(-0.8, 0.8) / sh_band(k);
        }
    }
    return g;
}

TrainingData render_views(const Scene &scene, const SynthSpec &spec, std::uint64_t stream,
                          int count) {
    TrainingData data;
    for (int i = 0; i < count; ++i) {
        const Camera cam = orbit_camera(spec, stream, i);
        data.images.push_back(render(scene, cam, {}, {}, Renderer::Reference));
        data.cameras.push_back(cam);
    }
    return data;
}

} // namespace

SynthResult generate_synthetic(const SynthSpec &spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    SynthResult out;
    out.scene.background = spec.background;
    out.scene.bbox.min   = Vec3::Constant(-0.5);
    out.scene.bbox.max   = Vec3::Constant(0.5);
    for (int i = 0; i < spec.gaussians; ++i) {
        out.scene.gaussians.push_back(random_gaussian(rng, spec.strength));
    }
    out.train = render_views(out.scene, spec, kTrainStream, spec.train_views);
    out.test  = render_views(out.scene, spec, kTestStream, spec.test_views);
    return out;
}

namespace {

void write_split(const std::filesystem::path &dir, const std::string &split,
                 const TrainingData &data, const SynthSpec &spec) {
    std::filesystem::create_directories(dir / split);
    CameraSet set;
    set.camera_angle_x = spec.fov_x;
    set.width          = spec.width;
    set.height         = spec.height;
    for (std::size_t i = 0; i < data.cameras.size(); ++i) {
        const std::string name = "r_" + std::to_string(i);
        write_image(dir / split / (name + ".png"), data.images[i]);
        set.frames.push_back({"./" + split + "/" + name, camera_to_world_gl(data.cameras[i])});
    }
    save_cameras(dir / ("transforms_" + split + ".json"), set);
}

} // namespace

void write_dataset(const std::filesystem::path &dir, const SynthResult &synth,
                   const SynthSpec &spec) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    write_split(dir, "train", synth.train, spec);
    write_split(dir, "test", synth.test, spec);
    const Bbox &b = synth.scene.bbox;
    nlohmann::json meta;
    meta["background"] = {spec.background[0], spec.background[1], spec.background[2]};
    meta["bbox"]       = {b.min[0], b.min[1], b.min[2], b.max[0], b.max[1], b.max[2]};
    meta["seed"]       = spec.seed;
    meta["gaussians"]  = spec.gaussians;
    meta["strength"]   = spec.strength;
    write_file_atomic(dir / "scene_meta.json", meta.dump(2) + "\n");
    save_scene(dir / "gt_scene.ply", synth.scene);
}

} // namespace sixdgs
