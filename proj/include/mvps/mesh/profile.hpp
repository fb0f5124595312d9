// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mvps/mesh/mesh.hpp"

#include <filesystem>
#include <vector>

namespace mvps::mesh {

/// Points x with dot(normal, x) = offset.
struct Plane {
    Vec3 normal{0, 0, 1};
    double offset = 0.0;
};

/// Intersection curves of a mesh with a plane. Each polyline is ordered along
/// the curve; closed curves repeat their first vertex at the end.
std::vector<std::vector<Vec3>> surface_profile(const TriMesh& m, const Plane& plane);

/// Columns: curve, arc_length, height, x, y, z. Height is measured along the
/// in-plane direction closest to world +y, or world +z when the plane is
/// horizontal.
void write_profile_csv(const std::filesystem::path& path, const std::vector<std::vector<Vec3>>& curves,
                       const Plane& plane);

}  // namespace mvps::mesh
