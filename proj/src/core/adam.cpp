// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#include "sixdgs/optim.hpp"

#include <cmath>

namespace sixdgs {

void AdamState::resize(std::size_t n) {
    m.resize(n, PackedParams{});
    v.resize(n, PackedParams{});
}

void adam_step(std::span<PackedParams> params, std::span<const PackedParams> grads,
               AdamState &state, const PackedParams &lr) {
    if (params.size() != grads.size()) {
        throw ValidationError("adam_step: parameter and gradient counts differ");
    }
    state.resize(params.size());
    ++state.step;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto &p = params[i];
        auto &m = state.m[i];
        auto &v = state.v[i];
        const auto &g = grads[i];
        for (int k = 0; k < kParamCount; ++k) {
            m[k] = kAdamBeta1 * m[k] + (1.0 - kAdamBeta1) * g[k];
            v[k] = kAdamBeta2 * v[k] + (1.0 - kAdamBeta2) * g[k] * g[k];
            if (lr[k] == 0.0) continue;
            const double m_hat = m[k] / bc1;
            const double v_hat = v[k] / bc2;
            p[k] -= lr[k] * m_hat / (std::sqrt(v_hat) + kAdamEps);
        }
    }
}

} // namespace sixdgs
