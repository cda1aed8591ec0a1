// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace sixdgs {

enum class ErrorKind {
    Validation,      // bad input, bad config, broken invariant
    ParameterDomain, // non-finite raw parameter
    Numeric,         // degenerate matrix, divergence, non-finite gradient
    Io,              // file missing, decode failure, truncated data
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string &what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string &what) : Error(ErrorKind::Validation, what) {}
};

class ParameterDomainError : public Error {
public:
    explicit ParameterDomainError(const std::string &what)
        : Error(ErrorKind::ParameterDomain, what) {}
};

/// Raised when a matrix that must be inverted is singular even after jitter.
/// Carries the index of the offending Gaussian when the caller supplied one.
class NumericDegeneracyError : public Error {
public:
    NumericDegeneracyError(const std::string &what, std::optional<std::size_t> gaussian_index)
        : Error(ErrorKind::Numeric, decorate(what, gaussian_index)), index_(gaussian_index) {}

    std::optional<std::size_t> gaussian_index() const noexcept { return index_; }

private:
    static std::string decorate(const std::string &what, std::optional<std::size_t> index) {
        if (!index) return what;
        return what + " (gaussian " + std::to_string(*index) + ")";
    }

    std::optional<std::size_t> index_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string &what) : Error(ErrorKind::Io, what) {}
};

} // namespace sixdgs
