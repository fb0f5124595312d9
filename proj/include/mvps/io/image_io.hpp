// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mvps/common/image.hpp"

#include <filesystem>

namespace mvps::io {

/// Little-endian PFM ("PF" for 3 channels, "Pf" for 1). Rows are stored
/// bottom-to-top as the format requires; the in-memory image is top-down.
void write_pfm(const std::filesystem::path& path, const Image& img);
/// Throws IoError on malformed headers, big-endian files and truncation.
Image read_pfm(const std::filesystem::path& path);

/// Binary PGM (P5, maxval 255); mask value 1 is written as 255.
void write_pgm(const std::filesystem::path& path, const Mask& mask);
/// Any nonzero byte reads back as 1.
Mask read_pgm(const std::filesystem::path& path);

}  // namespace mvps::io
