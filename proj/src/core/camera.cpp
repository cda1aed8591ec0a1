// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#include "sixdgs/camera.hpp"

#include "sixdgs/error.hpp"

#include <cmath>
#include <numbers>

namespace sixdgs {

double Camera::focal() const { return 0.5 * width / std::tan(0.5 * fov_x); }

void Camera::validate() const {
    if (!(fov_x > 0.0 && fov_x < std::numbers::pi)) {
        throw ValidationError("camera fov_x must lie in (0, pi)");
    }
    if (width < 1 || height < 1) throw ValidationError("camera width and height must be >= 1");
    if (!(near_plane > 0.0 && near_plane < far_plane)) {
        throw ValidationError("camera planes must satisfy 0 < near < far");
    }
    if (!rotation.allFinite() || !translation.allFinite()) {
        throw ValidationError("camera pose is not finite");
    }
    if ((rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-4) {
        throw ValidationError("camera rotation is not orthonormal");
    }
    if (std::abs(rotation.determinant() - 1.0) > 1e-4) {
        throw ValidationError("camera rotation must have determinant +1");
    }
}

Camera Camera::look_at(const Vec3 &eye, const Vec3 &target, const Vec3 &up, double fov_x,
                       int width, int height) {
    const Vec3 forward = (target - eye).normalized();
    Vec3 right         = forward.cross(up);
    if (right.norm() < 1e-9) right = forward.unitOrthogonal();
    right.normalize();
    const Vec3 down = forward.cross(right);

    Camera cam;
    cam.fov_x  = fov_x;
    cam.width  = width;
    cam.height = height;
    cam.rotation.row(0) = right;
    cam.rotation.row(1) = down;
    cam.rotation.row(2) = forward;
    cam.translation     = -cam.rotation * eye;
    return cam;
}

} // namespace sixdgs
