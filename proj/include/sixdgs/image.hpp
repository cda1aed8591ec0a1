// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "sixdgs/linalg.hpp"

#include <cstddef>
#include <vector>

namespace sixdgs {

/// Row-major interleaved RGB, samples nominally in [0, 1].
struct Image {
    int width  = 0;
    int height = 0;
    std::vector<double> rgb;

    Image() = default;
    Image(int w, int h, const Vec3 &fill = Vec3::Zero())
        : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3) {
        for (std::size_t i = 0; i < rgb.size(); i += 3) {
            rgb[i]     = fill[0];
            rgb[i + 1] = fill[1];
            rgb[i + 2] = fill[2];
        }
    }

    std::size_t index(int x, int y, int c = 0) const {
        return (static_cast<std::size_t>(y) * width + x) * 3 + c;
    }
    double &at(int x, int y, int c) { return rgb[index(x, y, c)]; }
    double at(int x, int y, int c) const { return rgb[index(x, y, c)]; }
    std::size_t sample_count() const { return rgb.size(); }
    bool same_shape(const Image &o) const { return width == o.width && height == o.height; }
};

} // namespace sixdgs
