// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "sixdgs/linalg.hpp"

namespace sixdgs {

/// Pinhole camera. Camera space is x right, y down, z forward; the
/// principal point sits at the image center and pixels are square.
struct Camera {
    double fov_x = 0.6911112070083618;
    int width    = 64;
    int height   = 64;
    Mat3 rotation    = Mat3::Identity(); // world -> camera
    Vec3 translation = Vec3::Zero();     // world -> camera
    double near_plane = 0.01;
    double far_plane  = 100.0;

    double focal() const;
    Vec3 center() const { return -rotation.transpose() * translation; }
    Vec3 to_camera(const Vec3 &world) const { return rotation * world + translation; }

    /// Throws ValidationError describing the first violated invariant.
    void validate() const;

    /// Camera at `eye` looking at `target`; `up` is the approximate world up.
    static Camera look_at(const Vec3 &eye, const Vec3 &target, const Vec3 &up, double fov_x,
                          int width, int height);
};

} // namespace sixdgs
