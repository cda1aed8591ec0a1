// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#include "sixdgs/gaussian.hpp"

#include "sixdgs/error.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace sixdgs {

Bbox Bbox::expanded(double factor) const {
    const Vec3 c    = center();
    const Vec3 half = 0.5 * factor * extent();
    return Bbox{c - half, c + half};
}

bool Bbox::contains(const Vec3 &p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
}

std::pair<int, int> offdiag_index(int k) {
    static constexpr std::array<std::pair<int, int>, 15> kTable = {{
        {1, 0}, {2, 0}, {2, 1}, {3, 0}, {3, 1}, {3, 2}, {4, 0}, {4, 1},
        {4, 2}, {4, 3}, {5, 0}, {5, 1}, {5, 2}, {5, 3}, {5, 4},
    }};
    return kTable[static_cast<std::size_t>(k)];
}

Mat6 activate_cholesky(std::span<const double, kCholeskyCount> raw_L) {
    for (int i = 0; i < kCholeskyCount; ++i) {
        if (!std::isfinite(raw_L[i])) {
            throw ParameterDomainError("non-finite Cholesky parameter at slot " + std::to_string(i));
        }
    }
    Mat6 L = Mat6::Zero();
    for (int i = 0; i < 6; ++i) L(i, i) = std::exp(raw_L[i]);
    for (int k = 0; k < 15; ++k) {
        const auto [r, c] = offdiag_index(k);
        L(r, c)           = std::tanh(raw_L[6 + k]);
    }
    return L;
}

Mat6 covariance(const Mat6 &L) {
    Mat6 sigma = L * L.transpose();
    return 0.5 * (sigma + sigma.transpose());
}

double sigmoid(double raw) {
    if (raw >= 0.0) return 1.0 / (1.0 + std::exp(-raw));
    const double e = std::exp(raw);
    return e / (1.0 + e);
}

double logit(double p) {
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    if (p >= 1.0) return std::numeric_limits<double>::infinity();
    return std::log(p / (1.0 - p));
}

double activated_alpha(const Gaussian6D &g) { return sigmoid(g.raw_alpha); }

double activated_lambda(const Gaussian6D &g) { return sigmoid(g.raw_lambda_opa); }

Vec3 effective_mu_d(const Gaussian6D &g, const ModelOptions &opts) {
    if (!opts.normalize_direction_mean) return g.raw_mu_d;
    const double n = g.raw_mu_d.norm();
    if (n == 0.0) return g.raw_mu_d;
    return g.raw_mu_d / n;
}

Mat6 gaussian_covariance(const Gaussian6D &g) { return covariance(activate_cholesky(g.raw_L)); }

PackedParams pack(const Gaussian6D &g) {
    PackedParams p{};
    for (int i = 0; i < 3; ++i) {
        p[param::kMuP + i] = g.raw_mu_p[i];
        p[param::kMuD + i] = g.raw_mu_d[i];
    }
    for (int i = 0; i < kCholeskyCount; ++i) p[param::kLDiag + i] = g.raw_L[i];
    p[param::kAlpha] = g.raw_alpha;
    for (int i = 0; i < kShCoeffCount; ++i) p[param::kSh + i] = g.sh[i];
    p[param::kLambda] = g.raw_lambda_opa;
    return p;
}

Gaussian6D unpack(const PackedParams &p) {
    Gaussian6D g;
    for (int i = 0; i < 3; ++i) {
        g.raw_mu_p[i] = p[param::kMuP + i];
        g.raw_mu_d[i] = p[param::kMuD + i];
    }
    for (int i = 0; i < kCholeskyCount; ++i) g.raw_L[i] = p[param::kLDiag + i];
    g.raw_alpha = p[param::kAlpha];
    for (int i = 0; i < kShCoeffCount; ++i) g.sh[i] = p[param::kSh + i];
    g.raw_lambda_opa = p[param::kLambda];
    return g;
}

std::array<double, kCholeskyCount> pack_cholesky(const Mat6 &L) {
    std::array<double, kCholeskyCount> raw{};
    for (int i = 0; i < 6; ++i) raw[i] = std::log(L(i, i));
    for (int k = 0; k < 15; ++k) {
        const auto [r, c] = offdiag_index(k);
        raw[6 + k]        = std::atanh(L(r, c));
    }
    return raw;
}

const std::array<const char *, kParamCount> &param_names() {
    static const std::array<const char *, kParamCount> names = [] {
        static std::array<std::string, kParamCount> storage;
        const char *axes[] = {"x", "y", "z"};
        for (int i = 0; i < 3; ++i) {
            storage[param::kMuP + i] = std::string("mu_p.") + axes[i];
            storage[param::kMuD + i] = std::string("mu_d.") + axes[i];
        }
        for (int i = 0; i < 6; ++i) storage[param::kLDiag + i] = "L.diag" + std::to_string(i);
        for (int k = 0; k < 15; ++k) {
            const auto [r, c]            = offdiag_index(k);
            storage[param::kLOffDiag + k] = "L." + std::to_string(r) + std::to_string(c);
        }
        storage[param::kAlpha] = "alpha";
        for (int i = 0; i < kShCoeffCount; ++i) {
            storage[param::kSh + i] = "sh." + std::string(1, "rgb"[i / kShBasisCount]) +
                                      std::to_string(i % kShBasisCount);
        }
        storage[param::kLambda] = "lambda_opa";
        std::array<const char *, kParamCount> out{};
        for (int i = 0; i < kParamCount; ++i) out[i] = storage[i].c_str();
        return out;
    }();
    return names;
}

} // namespace sixdgs
