// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#include "sixdgs/linalg.hpp"

#include "sixdgs/error.hpp"

#include <cmath>

namespace sixdgs {

namespace {

thread_local std::uint64_t g_inversions = 0;

bool try_factor(const Mat3 &m, Eigen::LLT<Mat3> &llt) {
    llt.compute(m);
    if (llt.info() != Eigen::Success) return false;
    const double floor = 1e-14 * std::abs(m.trace());
    const Mat3 factor  = llt.matrixL();
    for (int i = 0; i < 3; ++i) {
        const double pivot = factor(i, i);
        if (!std::isfinite(pivot) || pivot * pivot <= floor) return false;
    }
    return true;
}

} // namespace

Mat3 inverse_spd3(const Mat3 &m, std::optional<std::size_t> gaussian_index) {
    ++g_inversions;
    Eigen::LLT<Mat3> llt;
    if (!try_factor(m, llt)) {
        const double trace = m.trace();
        if (!std::isfinite(trace) || trace <= 0.0) {
            throw NumericDegeneracyError("directional covariance block is not positive definite",
                                         gaussian_index);
        }
        const Mat3 jittered = m + Mat3::Identity() * (1e-8 * trace / 3.0);
        if (!try_factor(jittered, llt)) {
            throw NumericDegeneracyError("directional covariance block is singular after jitter",
                                         gaussian_index);
        }
    }
    return llt.solve(Mat3::Identity());
}

std::uint64_t spd_inversion_count() noexcept { return g_inversions; }

void reset_spd_inversion_count() noexcept { g_inversions = 0; }

} // namespace sixdgs
