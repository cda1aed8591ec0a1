// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#include "sixdgs/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sixdgs {

namespace {

bool finite(const ConditionalGaussian3D &cg) {
    return cg.mu_cond.allFinite() && cg.sigma_cond.allFinite() && std::isfinite(cg.alpha_cond) &&
           cg.color.allFinite();
}

struct Projection {
    Vec3 t;          // camera-space mean
    Eigen::Matrix<double, 2, 3> J;
    Mat3 view_cov;   // W Sigma W^T
    Mat2 cov2d;
};

Projection project(const ConditionalGaussian3D &cg, const Camera &cam, const RasterOptions &opts) {
    Projection p;
    p.t            = cam.to_camera(cg.mu_cond);
    const double f = cam.focal();
    const double z = p.t.z();
    p.J << f / z, 0.0, -f * p.t.x() / (z * z), 0.0, f / z, -f * p.t.y() / (z * z);
    p.view_cov = cam.rotation * cg.sigma_cond * cam.rotation.transpose();
    Mat2 cov   = p.J * p.view_cov * p.J.transpose();
    cov        = 0.5 * (cov + cov.transpose());
    if (opts.dilation) cov += kDilation * Mat2::Identity();
    p.cov2d = cov;
    return p;
}

// Alpha of one splat at a pixel center, before the kMinAlpha test.
struct PixelHit {
    Vec2 delta;
    double gauss = 0.0;
    double alpha = 0.0;
    bool clamped = false;
};

inline PixelHit evaluate(const Splat2D &s, double px, double py) {
    PixelHit h;
    h.delta           = Vec2(px, py) - s.mean2d;
    const double power = -0.5 * h.delta.dot(s.conic * h.delta);
    h.gauss           = std::exp(std::min(power, 0.0));
    const double a    = s.alpha * h.gauss;
    h.clamped         = a > kAlphaClamp;
    h.alpha           = h.clamped ? kAlphaClamp : a;
    return h;
}

struct PixelResult {
    Vec3 color;
    double transmittance = 1.0;
    std::uint32_t last   = 0;
};

// Front-to-back compositing over `order`. With `early_out` the loop stops at
// termination; otherwise it keeps walking but adds nothing more.
template <class Order>
PixelResult composite(const Order &order, const std::vector<Splat2D> &splats, int x, int y,
                      const Vec3 &background, bool early_out) {
    PixelResult r;
    r.color       = Vec3::Zero();
    double T      = 1.0;
    bool done     = false;
    const double px = x + 0.5;
    const double py = y + 0.5;
    std::uint32_t pos = 0;
    for (const auto id : order) {
        ++pos;
        if (done) {
            if (early_out) break;
            continue;
        }
        const Splat2D &s  = splats[id];
        const PixelHit h  = evaluate(s, px, py);
        if (h.alpha < kMinAlpha) continue;
        const double next = T * (1.0 - h.alpha);
        if (next < kMinTransmittance) {
            done = true;
            continue;
        }
        r.color += (h.alpha * T) * s.color;
        T      = next;
        r.last = pos;
    }
    r.color += T * background;
    r.transmittance = T;
    return r;
}

struct Prepared {
    std::vector<Splat2D> splats;
    std::vector<std::size_t> source;
    std::vector<std::uint32_t> depth_order;
    RasterStats stats;
};

Prepared prepare(std::span<const ConditionalGaussian3D> gaussians, const Camera &cam,
                 const RasterOptions &opts) {
    Prepared p;
    for (std::size_t i = 0; i < gaussians.size(); ++i) {
        if (!finite(gaussians[i])) {
            ++p.stats.non_finite;
            continue;
        }
        auto s = project_gaussian(gaussians[i], cam, opts);
        if (!s) {
            ++p.stats.culled;
            continue;
        }
        p.splats.push_back(*s);
        p.source.push_back(i);
    }
    p.stats.visible = p.splats.size();
    p.depth_order.resize(p.splats.size());
    std::iota(p.depth_order.begin(), p.depth_order.end(), 0u);
    // Splats are appended in input order, so a stable sort keeps ties by index.
    std::stable_sort(p.depth_order.begin(), p.depth_order.end(),
                     [&](std::uint32_t a, std::uint32_t b) {
                         return p.splats[a].depth < p.splats[b].depth;
                     });
    return p;
}

struct PixelRange {
    int x0, x1, y0, y1;
};

PixelRange pixel_range(const Splat2D &s, int width, int height) {
    PixelRange r;
    r.x0 = std::max(0, static_cast<int>(std::floor(s.mean2d.x() - s.extent_x - 0.5)));
    r.x1 = std::min(width - 1, static_cast<int>(std::ceil(s.mean2d.x() + s.extent_x - 0.5)));
    r.y0 = std::max(0, static_cast<int>(std::floor(s.mean2d.y() - s.extent_y - 0.5)));
    r.y1 = std::min(height - 1, static_cast<int>(std::ceil(s.mean2d.y() + s.extent_y - 0.5)));
    return r;
}

} // namespace

std::optional<Splat2D> project_gaussian(const ConditionalGaussian3D &cg, const Camera &cam,
                                        const RasterOptions &opts) {
    if (!finite(cg)) return std::nullopt;
    const Vec3 t = cam.to_camera(cg.mu_cond);
    if (!(t.z() > cam.near_plane && t.z() < cam.far_plane)) return std::nullopt;
    if (!(cg.alpha_cond >= kMinAlpha)) return std::nullopt;

    const Projection p = project(cg, cam, opts);
    const double det   = p.cov2d.determinant();
    if (!(det > 0.0) || !std::isfinite(det)) return std::nullopt;

    Splat2D s;
    const double f = cam.focal();
    s.mean2d = Vec2(f * t.x() / t.z() + 0.5 * cam.width, f * t.y() / t.z() + 0.5 * cam.height);
    s.cov2d  = p.cov2d;
    s.conic  = Mat2{{p.cov2d(1, 1) / det, -p.cov2d(0, 1) / det},
                    {-p.cov2d(1, 0) / det, p.cov2d(0, 0) / det}};
    s.depth  = t.z();
    s.alpha  = cg.alpha_cond;
    s.color  = cg.color;

    // alpha * exp(-q/2) >= 1/255  <=>  q <= 2 ln(255 alpha); the ellipse
    // q <= k2 has half extents sqrt(k2 * cov_xx), sqrt(k2 * cov_yy).
    const double k2 = 2.0 * std::log(cg.alpha_cond / kMinAlpha);
    s.extent_x      = std::sqrt(std::max(k2, 0.0) * s.cov2d(0, 0));
    s.extent_y      = std::sqrt(std::max(k2, 0.0) * s.cov2d(1, 1));
    if (s.mean2d.x() + s.extent_x < 0.0 || s.mean2d.x() - s.extent_x > cam.width ||
        s.mean2d.y() + s.extent_y < 0.0 || s.mean2d.y() - s.extent_y > cam.height) {
        return std::nullopt;
    }
    return s;
}

ForwardState render_forward(std::span<const ConditionalGaussian3D> gaussians, const Camera &cam,
                            const Vec3 &background, const RasterOptions &opts) {
    Prepared prep = prepare(gaussians, cam, opts);

    ForwardState st;
    st.camera      = cam;
    st.background  = background;
    st.options     = opts;
    st.input_count = gaussians.size();
    st.stats       = prep.stats;
    st.tiles_x     = (cam.width + kTileSize - 1) / kTileSize;
    st.tiles_y     = (cam.height + kTileSize - 1) / kTileSize;
    st.tile_lists.resize(static_cast<std::size_t>(st.tiles_x) * st.tiles_y);

    for (const std::uint32_t id : prep.depth_order) {
        const PixelRange r = pixel_range(prep.splats[id], cam.width, cam.height);
        if (r.x0 > r.x1 || r.y0 > r.y1) continue;
        for (int ty = r.y0 / kTileSize; ty <= r.y1 / kTileSize; ++ty) {
            for (int tx = r.x0 / kTileSize; tx <= r.x1 / kTileSize; ++tx) {
                st.tile_lists[static_cast<std::size_t>(ty) * st.tiles_x + tx].push_back(id);
            }
        }
    }
    st.splats = std::move(prep.splats);
    st.source = std::move(prep.source);

    const std::size_t pixels = static_cast<std::size_t>(cam.width) * cam.height;
    st.image                 = Image(cam.width, cam.height);
    st.final_transmittance.assign(pixels, 1.0);
    st.last_contributor.assign(pixels, 0);

    const auto tile_count = static_cast<std::ptrdiff_t>(st.tile_lists.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t t = 0; t < tile_count; ++t) {
        const int tx    = static_cast<int>(t % st.tiles_x);
        const int ty    = static_cast<int>(t / st.tiles_x);
        const auto &lst = st.tile_lists[static_cast<std::size_t>(t)];
        const int xe    = std::min(cam.width, (tx + 1) * kTileSize);
        const int ye    = std::min(cam.height, (ty + 1) * kTileSize);
        for (int y = ty * kTileSize; y < ye; ++y) {
            for (int x = tx * kTileSize; x < xe; ++x) {
                const PixelResult r = composite(lst, st.splats, x, y, background, true);
                const std::size_t p = static_cast<std::size_t>(y) * cam.width + x;
                for (int c = 0; c < 3; ++c) st.image.rgb[p * 3 + c] = r.color[c];
                st.final_transmittance[p] = r.transmittance;
                st.last_contributor[p]    = r.last;
            }
        }
    }
    return st;
}

Image rasterize(std::span<const ConditionalGaussian3D> gaussians, const Camera &cam,
                const Vec3 &background, const RasterOptions &opts, RasterStats *stats) {
    ForwardState st = render_forward(gaussians, cam, background, opts);
    if (stats) *stats = st.stats;
    return std::move(st.image);
}

Image rasterize_reference(std::span<const ConditionalGaussian3D> gaussians, const Camera &cam,
                          const Vec3 &background, const RasterOptions &opts) {
    const Prepared prep = prepare(gaussians, cam, opts);
    Image img(cam.width, cam.height);
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            const PixelResult r = composite(prep.depth_order, prep.splats, x, y, background, false);
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = r.color[c];
        }
    }
    return img;
}

std::vector<SplatGrad> rasterize_backward(const ForwardState &st, const Image &grad_image) {
    const int W = st.camera.width;
    const int H = st.camera.height;

    // Each tile accumulates into its own buffer (one slot per list entry);
    // buffers are then summed in tile order so results do not depend on the
    // thread schedule.
    std::vector<std::vector<SplatGrad>> tile_grads(st.tile_lists.size());
    const auto tile_count = static_cast<std::ptrdiff_t>(st.tile_lists.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t t = 0; t < tile_count; ++t) {
        const auto &lst = st.tile_lists[static_cast<std::size_t>(t)];
        auto &grads     = tile_grads[static_cast<std::size_t>(t)];
        grads.assign(lst.size(), SplatGrad{});
        if (lst.empty()) continue;
        const int tx = static_cast<int>(t % st.tiles_x);
        const int ty = static_cast<int>(t / st.tiles_x);
        const int xe = std::min(W, (tx + 1) * kTileSize);
        const int ye = std::min(H, (ty + 1) * kTileSize);
        for (int y = ty * kTileSize; y < ye; ++y) {
            for (int x = tx * kTileSize; x < xe; ++x) {
                const std::size_t p = static_cast<std::size_t>(y) * W + x;
                const Vec3 dL_dC(grad_image.rgb[p * 3], grad_image.rgb[p * 3 + 1],
                                 grad_image.rgb[p * 3 + 2]);
                if (dL_dC.isZero(0.0)) continue;
                double T    = st.final_transmittance[p];
                Vec3 behind = T * st.background;
                const double px = x + 0.5;
                const double py = y + 0.5;
                for (std::uint32_t pos = st.last_contributor[p]; pos-- > 0;) {
                    const Splat2D &s = st.splats[lst[pos]];
                    const PixelHit h = evaluate(s, px, py);
                    if (h.alpha < kMinAlpha) continue;
                    const double one_minus = 1.0 - h.alpha;
                    const double T_before  = T / one_minus;

                    SplatGrad &g = grads[pos];
                    g.color += (h.alpha * T_before) * dL_dC;
                    const double dL_dalpha = dL_dC.dot(T_before * s.color - behind / one_minus);
                    behind += (h.alpha * T_before) * s.color;
                    T = T_before;

                    if (h.clamped) continue;
                    g.alpha += dL_dalpha * h.gauss;
                    const double dL_dpower = dL_dalpha * h.alpha;
                    g.mean2d += dL_dpower * (s.conic * h.delta);
                    // d power / d conic = -1/2 delta delta^T; d conic = -Q dC Q
                    const Mat2 dL_dconic = -0.5 * dL_dpower * (h.delta * h.delta.transpose());
                    g.cov2d -= s.conic * dL_dconic * s.conic;
                }
            }
        }
    }

    std::vector<SplatGrad> out(st.splats.size());
    for (std::size_t t = 0; t < st.tile_lists.size(); ++t) {
        const auto &lst = st.tile_lists[t];
        for (std::size_t k = 0; k < lst.size(); ++k) {
            SplatGrad &dst       = out[lst[k]];
            const SplatGrad &src = tile_grads[t][k];
            dst.mean2d += src.mean2d;
            dst.cov2d += src.cov2d;
            dst.alpha += src.alpha;
            dst.color += src.color;
        }
    }
    return out;
}

ConditionalGrad project_backward(const ConditionalGaussian3D &cg, const Camera &cam,
                                 const RasterOptions &opts, const SplatGrad &grad) {
    const Projection p = project(cg, cam, opts);
    const double f     = cam.focal();
    const double x = p.t.x(), y = p.t.y(), z = p.t.z();

    ConditionalGrad out;
    out.alpha_cond = grad.alpha;
    out.color      = grad.color;

    // cov2d = J M J^T (+ dilation); the dilation is constant.
    const Mat2 &G  = grad.cov2d;
    const Mat3 gM  = p.J.transpose() * G * p.J;
    out.sigma_cond = cam.rotation.transpose() * gM * cam.rotation;
    const Eigen::Matrix<double, 2, 3> gJ =
        G * p.J * p.view_cov.transpose() + G.transpose() * p.J * p.view_cov;

    // mean2d = (f x / z + cx, f y / z + cy), J = d mean2d / d t.
    Vec3 gt = p.J.transpose() * grad.mean2d;
    const double z2 = z * z, z3 = z2 * z;
    gt.x() += gJ(0, 2) * (-f / z2);
    gt.y() += gJ(1, 2) * (-f / z2);
    gt.z() += gJ(0, 0) * (-f / z2) + gJ(0, 2) * (2.0 * f * x / z3) + gJ(1, 1) * (-f / z2) +
              gJ(1, 2) * (2.0 * f * y / z3);
    out.mu_cond = cam.rotation.transpose() * gt;
    return out;
}

} // namespace sixdgs
