// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <exception>
#include <mutex>

namespace sixdgs {

/// Worker count for internal parallel loops (<= 0 restores the default).
void set_num_threads(int n);
int num_threads();

/// Exceptions must not escape an OpenMP region; loop bodies run through
/// this and the first captured exception is rethrown after the region.
class ParallelErrors {
public:
    template <class F>
    void run(F &&body) noexcept {
        try {
            body();
        } catch (...) {
            std::lock_guard<std::mutex> lock(mutex_);
            if (!first_) first_ = std::current_exception();
        }
    }

    void rethrow() const {
        if (first_) std::rethrow_exception(first_);
    }

private:
    std::mutex mutex_;
    std::exception_ptr first_;
};

} // namespace sixdgs
