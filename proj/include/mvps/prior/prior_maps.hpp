// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mvps/common/image.hpp"

namespace mvps::prior {

/// Per-view prior maps. Pixels outside the object mask carry zeros and both
/// gates are 0 there.
struct ViewPriors {
    Image depth;       // 1 channel, z-depth
    Image confidence;  // 1 channel, in [0, 1]
    Image normal;      // 3 channels, world frame, unit on masked pixels
    Image variance;    // 3 channels, per-component sample variance
    Mask gate_mvs;
    Mask gate_ps;

    bool operator==(const ViewPriors&) const = default;
};

}  // namespace mvps::prior
