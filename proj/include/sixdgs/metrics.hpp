// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "sixdgs/image.hpp"

#include <array>

namespace sixdgs {

constexpr double kPsnrCap = 100.0;
constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimK1 = 0.01;
constexpr double kSsimK2 = 0.03;

/// 10 log10(1 / MSE) for peak value 1; identical images give kPsnrCap.
double psnr(const Image &a, const Image &b);

double mse(const Image &a, const Image &b);

/// Single-scale SSIM, 11x11 Gaussian window (sigma 1.5) over every fully
/// contained window position, averaged over positions and the 3 channels.
double ssim(const Image &a, const Image &b);

/// SSIM together with d SSIM / d a (same layout as the image).
double ssim_with_grad(const Image &a, const Image &b, Image &grad_a);

/// Normalized 1D window; the 2D window is its outer product.
const std::array<double, kSsimWindow> &ssim_window_1d();

} // namespace sixdgs
