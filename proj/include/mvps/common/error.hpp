// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

namespace mvps {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A NaN or infinity appeared in a computation.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

/// File or schema problem; the message always carries the offending path.
class IoError : public Error {
public:
    IoError(const std::filesystem::path& path, const std::string& what)
        : Error(path.string() + ": " + what), path_(path) {}
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace mvps
