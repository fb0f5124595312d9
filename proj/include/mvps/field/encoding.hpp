// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mvps/ad/matrix.hpp"

namespace mvps::field {

/// Width of the Fourier encoding of a 3-vector: 3 + 3 * 2 * octaves.
constexpr std::size_t encoded_dim(int octaves) { return 3 + 6 * static_cast<std::size_t>(octaves); }

/// Rows of pts (P x 3) mapped to [x, sin(2^0 pi x), cos(2^0 pi x), ...,
/// sin(2^(k-1) pi x), cos(2^(k-1) pi x)], each block holding all 3 coordinates.
ad::Matrix encode(const ad::Matrix& pts, int octaves);

/// d encode / d x as three stacked (P x E) blocks, one per input axis.
ad::Matrix encode_jacobian(const ad::Matrix& pts, int octaves);

}  // namespace mvps::field
