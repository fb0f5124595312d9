// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mvps/field/fields.hpp"
#include "mvps/mesh/mesh.hpp"

#include <array>
#include <functional>
#include <vector>

namespace mvps::mesh {

/// Axis-aligned sampling lattice with `resolution` samples per axis.
struct GridSpec {
    int resolution = 128;
    Vec3 lo{-1.0, -1.0, -1.0};
    Vec3 hi{1.0, 1.0, 1.0};

    double spacing(int axis) const { return (hi[axis] - lo[axis]) / (resolution - 1); }
    Vec3 point(int i, int j, int k) const;
};

/// Cube around the bounding sphere, padded by two cells so closed surfaces
/// inside the sphere stay closed.
GridSpec grid_around_sphere(double radius, int resolution);

/// Values at all grid points, x fastest.
using BatchSdf = std::function<std::vector<double>(const ad::Matrix& pts)>;
using GradientFn = std::function<std::vector<Vec3>(const std::vector<Vec3>& pts)>;

/// Triangles per cube configuration, as lists of cube edge ids. Bit c of the
/// configuration is set when corner c = (c & 1, c >> 1 & 1, c >> 2 & 1) is
/// inside (value < 0).
struct CaseTable {
    std::array<std::array<int, 2>, 12> edges;  // corner pairs
    std::array<std::vector<std::array<int, 3>>, 256> triangles;
};
const CaseTable& case_table();

/// Extracts the zero level set from sampled values (x fastest). NaN marks an
/// unobserved sample; cells touching one produce no triangles.
TriMesh marching_cubes_grid(const std::vector<double>& values, const GridSpec& grid);

/// Samples f on the grid, extracts the surface and sets normals from grad
/// (central differences of f when grad is empty).
TriMesh marching_cubes(const BatchSdf& f, const GridSpec& grid, const GradientFn& grad = {});
TriMesh marching_cubes(const field::SdfField& f, const GridSpec& grid);

/// Spatial gradients of a field at many points, batched on tapes.
std::vector<Vec3> field_gradients(const field::SdfField& f, const std::vector<Vec3>& pts);

}  // namespace mvps::mesh
