// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mvps/common/geometry.hpp"

#include <vector>

namespace mvps::sim {

struct Ray {
    Vec3 origin;
    Vec3 dir;  // unit length
};

/// Pinhole camera. A pixel o = (u, v, 1) at z-depth d maps to the world point
/// p = R (d K^-1 o) + t, so R is camera-to-world and t is the camera center.
/// Camera axes: x right, y down, z forward. Pixel centers sit at half-integers.
struct CameraView {
    Mat3 K = Mat3::identity();
    Mat3 R = Mat3::identity();
    Vec3 t;
    int width = 0;
    int height = 0;

    Vec3 center() const { return t; }
    /// Ray through continuous pixel coordinates (u, v).
    Ray ray_through(double u, double v) const;
    /// Ray through the center of integer pixel (x, y).
    Ray pixel_ray(int x, int y) const { return ray_through(x + 0.5, y + 0.5); }
    /// World point at z-depth d along pixel (u, v).
    Vec3 unproject(double u, double v, double depth) const;
    /// Pixel coordinates and z-depth of a world point.
    Vec3 project(const Vec3& p) const;
    /// Throws when R is not a rotation or K is malformed.
    void validate(double tol = 1e-9) const;

    bool operator==(const CameraView&) const = default;
};

struct LightRig {
    std::vector<Vec3> directions;  // unit vectors pointing toward the light
    std::vector<double> intensities;
};

struct RigSpec {
    int views = 8;
    int lights = 16;
    int width = 128;
    int height = 128;
    double radius = 3.0;          // camera distance from the origin
    double elevation_deg = 30.0;  // above the turntable plane
    bool alternate_elevation = true;  // odd views sit at -elevation, so no cap goes unseen
    double bounding_radius = 1.0;
    bool operator==(const RigSpec&) const = default;
};

/// Turntable cameras (uniform azimuth, all looking at the origin) and, per
/// view, the lights of a camera-fixed rig expressed in the world frame.
struct Rig {
    std::vector<CameraView> cameras;
    std::vector<LightRig> lights;  // one per view
};

Rig turntable_rig(const RigSpec& spec);

/// Camera-frame light directions arranged in concentric rings around the
/// optical axis.
std::vector<Vec3> ring_light_directions(int count);

}  // namespace mvps::sim
