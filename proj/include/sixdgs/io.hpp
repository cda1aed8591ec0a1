// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "sixdgs/camera.hpp"
#include "sixdgs/gaussian.hpp"
#include "sixdgs/image.hpp"
#include "sixdgs/optim.hpp"
#include "sixdgs/slicer.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sixdgs {

constexpr int kSceneFormatVersion = 1;

/// Binary little-endian PLY, one float32 property per raw parameter.
/// Values are stored at float precision; a loaded scene saves back to the
/// same bytes.
void save_scene(const std::filesystem::path &path, const Scene &scene);
Scene load_scene(const std::filesystem::path &path);

/// PLY property names of the scene format, in file order.
std::vector<std::string> scene_property_names();

/// A 3D Gaussian point file readable by standard 3DGS viewers.
void export_slice(const std::filesystem::path &path,
                  const std::vector<ConditionalGaussian3D> &splats);

struct CameraFrame {
    std::string file_path; // as written in the document, without extension
    Mat4 camera_to_world;  // OpenGL convention (x right, y up, looking down -z)
};

struct CameraSet {
    double camera_angle_x = 0.0;
    std::optional<int> width;
    std::optional<int> height;
    std::vector<CameraFrame> frames;

    /// Camera of frame `i`; `width` / `height` fall back to the document's.
    Camera camera(std::size_t i, std::optional<int> width = {},
                  std::optional<int> height = {}) const;
};

/// Conversion between a pinhole camera and an OpenGL camera-to-world matrix.
Mat4 camera_to_world_gl(const Camera &cam);
Camera camera_from_gl(const Mat4 &c2w, double fov_x, int width, int height);

CameraSet load_cameras(const std::filesystem::path &path);
void save_cameras(const std::filesystem::path &path, const CameraSet &set);

/// 8-bit RGB or RGBA PNG; alpha is composited over `background`.
Image read_image(const std::filesystem::path &path, const Vec3 &background = Vec3::Zero());
/// Values are clamped to [0, 1] and rounded to 8 bits.
void write_image(const std::filesystem::path &path, const Image &image);
/// Round every sample to the nearest 8-bit level.
Image quantize8(const Image &image);

/// NeRF-synthetic dataset directory: transforms_{train,test}.json plus images.
struct Dataset {
    TrainingData train;
    TrainingData test;
    Vec3 background = Vec3::Zero();
    std::optional<Bbox> bbox;
};

Dataset load_dataset(const std::filesystem::path &dir);

/// Writes `data` to a temporary sibling of `path` and renames it into place.
void write_file_atomic(const std::filesystem::path &path, const std::string &data);

} // namespace sixdgs
