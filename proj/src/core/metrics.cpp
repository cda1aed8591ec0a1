// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#include "sixdgs/metrics.hpp"

#include "sixdgs/error.hpp"

#include <cmath>
#include <vector>

namespace sixdgs {

namespace {

constexpr double kC1 = (kSsimK1 * 1.0) * (kSsimK1 * 1.0);
constexpr double kC2 = (kSsimK2 * 1.0) * (kSsimK2 * 1.0);
constexpr int kRadius = kSsimWindow / 2;

void require_same_shape(const Image &a, const Image &b) {
    if (!a.same_shape(b)) {
        throw ValidationError("image size mismatch: " + std::to_string(a.width) + "x" +
                              std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                              std::to_string(b.height));
    }
}

// Single-channel plane, row-major.
struct Plane {
    int w = 0, h = 0;
    std::vector<double> v;
    Plane(int w_, int h_) : w(w_), h(h_), v(static_cast<std::size_t>(w_) * h_, 0.0) {}
    double &operator()(int x, int y) { return v[static_cast<std::size_t>(y) * w + x]; }
    double operator()(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

// Valid-mode separable correlation with the SSIM window.
Plane filter_valid(const Plane &in) {
    const auto &k = ssim_window_1d();
    Plane tmp(in.w - 2 * kRadius, in.h);
    for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < tmp.w; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kSsimWindow; ++i) acc += k[i] * in(x + i, y);
            tmp(x, y) = acc;
        }
    }
    Plane out(tmp.w, in.h - 2 * kRadius);
    for (int y = 0; y < out.h; ++y) {
        for (int x = 0; x < out.w; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kSsimWindow; ++i) acc += k[i] * tmp(x, y + i);
            out(x, y) = acc;
        }
    }
    return out;
}

// Adjoint of filter_valid: scatters a window-position map back to pixels.
Plane filter_adjoint(const Plane &in, int w, int h) {
    const auto &k = ssim_window_1d();
    Plane tmp(in.w, h);
    for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < in.w; ++x) {
            for (int i = 0; i < kSsimWindow; ++i) tmp(x, y + i) += k[i] * in(x, y);
        }
    }
    Plane out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < tmp.w; ++x) {
            for (int i = 0; i < kSsimWindow; ++i) out(x + i, y) += k[i] * tmp(x, y);
        }
    }
    return out;
}

Plane channel(const Image &img, int c) {
    Plane p(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) p(x, y) = img.at(x, y, c);
    return p;
}

Plane product(const Plane &a, const Plane &b) {
    Plane p(a.w, a.h);
    for (std::size_t i = 0; i < p.v.size(); ++i) p.v[i] = a.v[i] * b.v[i];
    return p;
}

double ssim_impl(const Image &a, const Image &b, Image *grad_a) {
    require_same_shape(a, b);
    if (a.width < kSsimWindow || a.height < kSsimWindow) {
        throw ValidationError("SSIM needs images of at least 11x11 pixels");
    }
    const int ow = a.width - 2 * kRadius;
    const int oh = a.height - 2 * kRadius;
    const double norm = 1.0 / (3.0 * ow * oh);
    if (grad_a) *grad_a = Image(a.width, a.height);

    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        const Plane x = channel(a, c);
        const Plane y = channel(b, c);
        const Plane mx = filter_valid(x);
        const Plane my = filter_valid(y);
        const Plane exx = filter_valid(product(x, x));
        const Plane eyy = filter_valid(product(y, y));
        const Plane exy = filter_valid(product(x, y));

        Plane dmu(ow, oh), dexx(ow, oh), dexy(ow, oh);
        for (std::size_t i = 0; i < mx.v.size(); ++i) {
            const double ux = mx.v[i], uy = my.v[i];
            const double sxx = exx.v[i] - ux * ux;
            const double syy = eyy.v[i] - uy * uy;
            const double sxy = exy.v[i] - ux * uy;
            const double n1 = 2.0 * (ux * uy) + kC1;
            const double n2 = 2.0 * sxy + kC2;
            const double d1 = ux * ux + uy * uy + kC1;
            const double d2 = sxx + syy + kC2;
            const double s  = (n1 * n2) / (d1 * d2);
            total += s;
            if (grad_a) {
                dmu.v[i] = norm * s *
                           (2.0 * uy / n1 - 2.0 * uy / n2 - 2.0 * ux / d1 + 2.0 * ux / d2);
                dexx.v[i] = -norm * s / d2;
                dexy.v[i] = norm * 2.0 * s / n2;
            }
        }
        if (grad_a) {
            const Plane ga = filter_adjoint(dmu, a.width, a.height);
            const Plane gb = filter_adjoint(dexx, a.width, a.height);
            const Plane gc = filter_adjoint(dexy, a.width, a.height);
            for (int yy = 0; yy < a.height; ++yy) {
                for (int xx = 0; xx < a.width; ++xx) {
                    grad_a->at(xx, yy, c) =
                        ga(xx, yy) + 2.0 * x(xx, yy) * gb(xx, yy) + y(xx, yy) * gc(xx, yy);
                }
            }
        }
    }
    return total * norm;
}

} // namespace

const std::array<double, kSsimWindow> &ssim_window_1d() {
    static const std::array<double, kSsimWindow> window = [] {
        std::array<double, kSsimWindow> w{};
        double sum = 0.0;
        for (int i = 0; i < kSsimWindow; ++i) {
            const double d = i - kRadius;
            w[i]           = std::exp(-(d * d) / (2.0 * kSsimSigma * kSsimSigma));
            sum += w[i];
        }
        for (auto &v : w) v /= sum;
        return w;
    }();
    return window;
}

double mse(const Image &a, const Image &b) {
    require_same_shape(a, b);
    if (a.rgb.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < a.rgb.size(); ++i) {
        const double d = a.rgb[i] - b.rgb[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.rgb.size());
}

double psnr(const Image &a, const Image &b) {
    const double m = mse(a, b);
    if (m <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
}

double ssim(const Image &a, const Image &b) { return ssim_impl(a, b, nullptr); }

double ssim_with_grad(const Image &a, const Image &b, Image &grad_a) {
    return ssim_impl(a, b, &grad_a);
}

} // namespace sixdgs
