// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mvps/common/image.hpp"
#include "mvps/mesh/marching_cubes.hpp"
#include "mvps/sim/camera.hpp"

#include <vector>

namespace mvps::mesh {

/// One depth map with per-pixel fusion weights (z-depth; 0 = no measurement).
struct DepthObservation {
    sim::CameraView camera;
    Image depth;   // 1 channel
    Image weight;  // 1 channel; empty means weight 1 wherever depth > 0
};

struct TsdfConfig {
    GridSpec grid;
    double truncation = 0.05;
};

struct TsdfVolume {
    GridSpec grid;
    std::vector<double> tsdf;    // NaN where unobserved, otherwise in [-1, 1]
    std::vector<double> weight;  // accumulated weight
};

/// Weighted running average of truncated distances d - z along each view's
/// optical axis, skipping voxels more than one truncation behind the surface.
TsdfVolume tsdf_integrate(const std::vector<DepthObservation>& views, const TsdfConfig& cfg);

/// Integrates and extracts the zero level set; empty when no voxel is observed.
TriMesh tsdf_fuse(const std::vector<DepthObservation>& views, const TsdfConfig& cfg);

}  // namespace mvps::mesh
