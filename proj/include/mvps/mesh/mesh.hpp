// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mvps/common/geometry.hpp"
#include "mvps/common/random.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace mvps::mesh {

struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> triangles;
    std::vector<Vec3> normals;  // per vertex; may be empty

    bool empty() const noexcept { return triangles.empty(); }
};

inline constexpr double kDegenerateArea = 1e-12;

double triangle_area(const TriMesh& m, std::size_t tri);
double surface_area(const TriMesh& m);
/// Drops triangles with area at or below kDegenerateArea and unreferenced vertices.
void remove_degenerate(TriMesh& m);
/// Every undirected edge is used by exactly two triangles, in opposite directions.
bool is_watertight(const TriMesh& m);
/// Throws when an index is out of range.
void validate(const TriMesh& m);

/// Area-uniform surface samples.
std::vector<Vec3> sample_surface(const TriMesh& m, std::size_t n, Rng& rng);

/// ASCII OBJ with v, vn (when present) and 1-based f records.
void write_obj(const std::filesystem::path& path, const TriMesh& m);
TriMesh read_obj(const std::filesystem::path& path);

}  // namespace mvps::mesh
