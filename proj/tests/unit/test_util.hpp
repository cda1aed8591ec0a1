// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "sixdgs/camera.hpp"
#include "sixdgs/optim.hpp"
#include "sixdgs/gaussian.hpp"
#include "sixdgs/slicer.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

namespace sixdgs::test {

inline double uniform(std::mt19937_64 &rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec3 random_unit(std::mt19937_64 &rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec3 v(n(rng), n(rng), n(rng));
    while (v.norm() < 1e-6) v = Vec3(n(rng), n(rng), n(rng));
    return v.normalized();
}

/// Well-conditioned random Gaussian: raw diagonal in [-1, 0.5], raw
/// off-diagonals in [-0.8, 0.8].
inline Gaussian6D random_gaussian(std::mt19937_64 &rng) {
    Gaussian6D g;
    for (int a = 0; a < 3; ++a) {
        g.raw_mu_p[a] = uniform(rng, -1.0, 1.0);
        g.raw_mu_d[a] = uniform(rng, -1.0, 1.0);
    }
    for (int i = 0; i < 6; ++i) g.raw_L[i] = uniform(rng, -1.0, 0.5);
    for (int i = 6; i < kCholeskyCount; ++i) g.raw_L[i] = uniform(rng, -0.8, 0.8);
    g.raw_alpha = uniform(rng, -2.0, 2.0);
    for (auto &b : g.sh) b = uniform(rng, -1.0, 1.0);
    g.raw_lambda_opa = uniform(rng, -2.0, 2.0);
    return g;
}

/// Splat-sized Gaussian near the origin, for rendering tests.
inline Gaussian6D random_splat(std::mt19937_64 &rng, double spread = 0.6) {
    Gaussian6D g = random_gaussian(rng);
    for (int a = 0; a < 3; ++a) g.raw_mu_p[a] = uniform(rng, -spread, spread);
    for (int i = 0; i < 3; ++i) g.raw_L[i] = std::log(uniform(rng, 0.03, 0.15));
    for (int k = 0; k < 3; ++k) g.raw_L[6 + k] = std::atanh(uniform(rng, -0.03, 0.03));
    for (int k = 3; k < 15; ++k) {
        const auto [row, col] = offdiag_index(k);
        if (col < 3) g.raw_L[6 + k] = std::atanh(uniform(rng, -0.3, 0.3));
    }
    return g;
}

inline Camera front_camera(int w = 64, int h = 64, double distance = 3.0) {
    return Camera::look_at(Vec3(0.0, 0.0, -distance), Vec3::Zero(), Vec3(0.0, -1.0, 0.0), 0.9, w,
                           h);
}

inline double max_abs_diff(const Mat3 &a, const Mat3 &b) { return (a - b).cwiseAbs().maxCoeff(); }

} // namespace sixdgs::test

namespace sixdgs::test {

/// Conditional moments through the joint precision matrix:
/// Sigma_cond = (Lambda_pp)^-1, mu_cond = mu_p - Lambda_pp^-1 Lambda_pd (d - mu_d).
struct Moments {
    Vec3 mean;
    Mat3 cov;
};

inline Moments precision_route(const Mat6 &sigma, const Vec3 &mu_p, const Vec3 &mu_d,
                               const Vec3 &d) {
    const Mat6 lambda = sigma.fullPivLu().inverse();
    const Mat3 lpp    = lambda.topLeftCorner<3, 3>();
    const Mat3 lpd    = lambda.topRightCorner<3, 3>();
    const Mat3 cov    = lpp.fullPivLu().inverse();
    return {mu_p - cov * lpd * (d - mu_d), cov};
}

/// Conditional moments estimated from joint samples by least-squares
/// regression of the position coordinates on the direction coordinates.
inline Moments monte_carlo_conditional(const Mat6 &L, const Vec3 &mu_p, const Vec3 &mu_d,
                                       const Vec3 &d, int samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Matrix<double, 6, 1> mean = Eigen::Matrix<double, 6, 1>::Zero();
    Mat6 second                      = Mat6::Zero();
    Eigen::Matrix<double, 6, 1> mu;
    mu << mu_p, mu_d;
    for (int s = 0; s < samples; ++s) {
        Eigen::Matrix<double, 6, 1> z;
        for (int i = 0; i < 6; ++i) z[i] = n(rng);
        const Eigen::Matrix<double, 6, 1> x = mu + L * z;
        mean += x;
        second.noalias() += x * x.transpose();
    }
    mean /= samples;
    const Mat6 cov = second / samples - mean * mean.transpose();
    const Mat3 cxx = cov.topLeftCorner<3, 3>();
    const Mat3 cxy = cov.topRightCorner<3, 3>();
    const Mat3 cyy = cov.bottomRightCorner<3, 3>();
    const Mat3 B   = cxy * cyy.inverse();
    const Vec3 mp  = mean.head<3>();
    const Vec3 md  = mean.tail<3>();
    return {mp + B * (d - md), cxx - B * cxy.transpose()};
}

/// Straightforward slicing with a general inverse and a full SVD, with
/// x = d - mu_d.
struct NaiveSlice {
    Vec3 mu_cond;
    Mat3 sigma_cond;
    double alpha_cond;
    Vec3 s;
    Mat3 R;
};

inline NaiveSlice naive_slice(const Mat6 &L, double alpha, const Vec3 &mu_p, const Vec3 &mu_d,
                                  const Vec3 &d, double lambda_opa) {
    const Mat6 Sigma       = L * L.transpose();
    const Mat3 Sigma_p     = Sigma.block<3, 3>(0, 0);
    const Mat3 Sigma_pd    = Sigma.block<3, 3>(0, 3);
    const Mat3 Sigma_d     = Sigma.block<3, 3>(3, 3);
    const Vec3 x           = d - mu_d;
    const Mat3 Sigma_d_inv = Sigma_d.inverse();
    const Mat3 Sigma_regr  = Sigma_pd * Sigma_d_inv;
    NaiveSlice out;
    out.mu_cond    = mu_p + Sigma_regr * x;
    out.sigma_cond = Sigma_p - Sigma_regr * Sigma_pd.transpose();
    const double f = std::exp(-lambda_opa * x.dot(Sigma_d_inv * x));
    out.alpha_cond = alpha * f;
    Eigen::JacobiSVD<Mat3> svd(out.sigma_cond, Eigen::ComputeFullU | Eigen::ComputeFullV);
    out.R = svd.matrixU();
    out.R.col(2) *= out.R.determinant() < 0.0 ? -1.0 : 1.0;
    out.s = svd.singularValues().cwiseSqrt();
    return out;
}

} // namespace sixdgs::test

namespace sixdgs::test {

/// Outcome of one central-difference probe of the loss.
struct GradientProbe {
    std::size_t gaussian = 0;
    int param            = 0;
    double analytic      = 0.0;
    double numeric       = 0.0;
    double relative      = 0.0;
};

/// Central difference of the reference-renderer loss along one raw
/// parameter. Returns nullopt when the two one-sided differences disagree,
/// which marks a probe straddling a pixel cutoff.
inline std::optional<double> central_difference(const Scene &scene, std::size_t gaussian, int param,
                                                std::span<const Camera> cameras,
                                                std::span<const Image> targets,
                                                const GradientOptions &opts, double h = 1e-4) {
    auto eval = [&](double offset) {
        Scene s             = scene;
        PackedParams p      = pack(s.gaussians[gaussian]);
        p[param]           += offset;
        s.gaussians[gaussian] = unpack(p);
        return scene_loss(s, cameras, targets, opts, Renderer::Reference);
    };
    const double f0 = eval(0.0), fp = eval(h), fm = eval(-h);
    const double forward = (fp - f0) / h, backward = (f0 - fm) / h;
    const double central = (fp - fm) / (2.0 * h);
    if (std::abs(forward - backward) > 0.1 * std::abs(central) + 1e-3) return std::nullopt;
    return central;
}

inline double relative_error(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

/// Gaussians sized to cover a few pixels of a small front_camera image.
inline Scene probe_scene(std::mt19937_64 &rng, int count, double min_scale, double max_scale) {
    Scene scene;
    scene.background = Vec3(uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1));
    for (int i = 0; i < count; ++i) {
        Gaussian6D g = random_splat(rng, 0.5);
        for (int k = 0; k < 3; ++k) g.raw_L[k] = std::log(uniform(rng, min_scale, max_scale));
        g.raw_alpha = uniform(rng, -1.5, 1.5);
        scene.gaussians.push_back(g);
    }
    return scene;
}

} // namespace sixdgs::test

namespace sixdgs::test {

/// Fresh directory removed on destruction.
class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("sixdgs_test_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir &)            = delete;
    TempDir &operator=(const TempDir &) = delete;

    const std::filesystem::path &path() const { return path_; }
    std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

} // namespace sixdgs::test
