// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#include "mvps/sim/camera.hpp"

#include "mvps/common/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace mvps::sim {

Ray CameraView::ray_through(double u, double v) const {
    const Mat3 k_inv = K.inverse();
    const Vec3 d_cam = k_inv * Vec3{u, v, 1.0};
    return {t, normalized(R * d_cam)};
}

Vec3 CameraView::unproject(double u, double v, double depth) const {
    return R * (K.inverse() * Vec3{u, v, 1.0} * depth) + t;
}

Vec3 CameraView::project(const Vec3& p) const {
    const Vec3 q = R.transposed() * (p - t);
    const Vec3 h = K * q;
    return {h.x / h.z, h.y / h.z, q.z};
}

void CameraView::validate(double tol) const {
    const Mat3 should_be_i = R.transposed() * R;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (std::abs(should_be_i(i, j) - (i == j ? 1.0 : 0.0)) > tol)
                throw Error("camera rotation is not orthonormal (R^T R deviates by more than " +
                            std::to_string(tol) + ")");
    if (std::abs(R.determinant() - 1.0) > tol) throw Error("camera rotation has determinant != +1");
    if (K(1, 0) != 0.0 || K(2, 0) != 0.0 || K(2, 1) != 0.0 || K(2, 2) != 1.0)
        throw Error("intrinsics are not upper-triangular with K[2][2] = 1");
    if (!(K(0, 0) > 0.0) || !(K(1, 1) > 0.0)) throw Error("intrinsics must have positive focal lengths");
    if (width <= 0 || height <= 0) throw Error("camera resolution must be positive");
}

std::vector<Vec3> ring_light_directions(int count) {
    const int rings = std::max(1, (count + 7) / 8);
    std::vector<Vec3> dirs;
    dirs.reserve(count);
    int placed = 0;
    for (int r = 0; r < rings; ++r) {
        const int in_ring = (count - placed) / (rings - r);
        const double polar = (15.0 + 30.0 * (r + 0.5) / rings) * std::numbers::pi / 180.0;
        const double offset = r * std::numbers::pi / std::max(1, in_ring);
        for (int k = 0; k < in_ring; ++k) {
            const double az = offset + 2.0 * std::numbers::pi * k / in_ring;
            // Toward the light, i.e. back toward the camera side of the object.
            dirs.push_back({std::sin(polar) * std::cos(az), std::sin(polar) * std::sin(az), -std::cos(polar)});
        }
        placed += in_ring;
    }
    return dirs;
}

Rig turntable_rig(const RigSpec& spec) {
    if (spec.views < 2) throw Error("turntable rig needs at least 2 views");
    if (spec.lights < 3) throw Error("turntable rig needs at least 3 lights");
    if (spec.radius <= spec.bounding_radius)
        throw Error("camera radius " + std::to_string(spec.radius) + " must exceed bounding radius " +
                    std::to_string(spec.bounding_radius));
    if (spec.width <= 0 || spec.height <= 0) throw Error("image resolution must be positive");

    // Fit the bounding sphere into the narrower field of view with a small margin.
    const double half_angle = std::asin(spec.bounding_radius / spec.radius) * 1.08;
    const double focal = 0.5 * std::min(spec.width, spec.height) / std::tan(half_angle);
    Mat3 K = Mat3::identity();
    K(0, 0) = focal;
    K(1, 1) = focal;
    K(0, 2) = 0.5 * spec.width;
    K(1, 2) = 0.5 * spec.height;

    const std::vector<Vec3> cam_lights = ring_light_directions(spec.lights);
    const double elev = spec.elevation_deg * std::numbers::pi / 180.0;
    const Vec3 world_up{0.0, 1.0, 0.0};

    Rig rig;
    for (int k = 0; k < spec.views; ++k) {
        const double az = 2.0 * std::numbers::pi * k / spec.views;
        const double e = spec.alternate_elevation && k % 2 == 1 ? -elev : elev;
        const Vec3 center = Vec3{std::cos(e) * std::sin(az), std::sin(e), std::cos(e) * std::cos(az)} *
                            spec.radius;
        const Vec3 forward = normalized(-center);
        const Vec3 right = normalized(cross(-world_up, forward));
        const Vec3 down = cross(forward, right);

        CameraView cam;
        cam.K = K;
        cam.R = Mat3::from_columns(right, down, forward);
        cam.t = center;
        cam.width = spec.width;
        cam.height = spec.height;
        rig.cameras.push_back(cam);

        LightRig lights;
        for (const Vec3& l : cam_lights) {
            lights.directions.push_back(normalized(cam.R * l));
            lights.intensities.push_back(std::numbers::pi);
        }
        rig.lights.push_back(std::move(lights));
    }
    return rig;
}

}  // namespace mvps::sim
