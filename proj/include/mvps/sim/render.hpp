// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mvps/common/image.hpp"
#include "mvps/sim/camera.hpp"
#include "mvps/sim/scene.hpp"

#include <cstdint>
#include <vector>

namespace mvps::sim {

struct TraceResult {
    bool hit = false;
    double t = 0.0;
    Vec3 point;
    int steps = 0;
    bool step_limit = false;  // gave up after the step cap
};

inline constexpr int kMaxTraceSteps = 512;
inline constexpr double kHitEpsilon = 1e-6;

/// Sphere tracing between t_near and t_far.
TraceResult sphere_trace(const AnalyticScene& scene, const Ray& ray, double t_near, double t_far);
/// Sphere tracing clipped to the scene's bounding sphere.
TraceResult sphere_trace(const AnalyticScene& scene, const Ray& ray);

/// e * rho(n, l, v) * max(n.l, 0) * visibility. Visibility comes from a shadow
/// ray toward the light when cast_shadows is set.
Vec3 shade(const AnalyticScene& scene, const Vec3& point, const Vec3& normal, const Vec3& view_dir,
           const Vec3& light_dir, double intensity, bool cast_shadows = true);

/// 1 when the light is unoccluded from the point.
double light_visibility(const AnalyticScene& scene, const Vec3& point, const Vec3& normal, const Vec3& light_dir);

struct ViewImages {
    std::vector<Image> images;  // one RGB image per light
    Image median;               // per-pixel, per-channel median of images
    Mask mask;
    Image gt_depth;   // z-depth, 0 outside the mask
    Image gt_normal;  // world-frame normals, 0 outside the mask
};

struct DatasetSpec {
    SceneSpec scene;
    RigSpec rig;
    double noise_std = 0.0;
    std::uint64_t seed = 0;
    bool operator==(const DatasetSpec&) const = default;
};

struct Dataset {
    DatasetSpec spec;
    std::vector<CameraView> cameras;
    std::vector<LightRig> lights;
    std::vector<ViewImages> views;
};

/// Per-pixel, per-channel median; mean of the middle pair for even counts.
Image median_image(const std::vector<Image>& images);

Dataset render_dataset(const DatasetSpec& spec);
ViewImages render_view(const AnalyticScene& scene, const CameraView& cam, const LightRig& lights,
                       double noise_std, std::uint64_t seed);

}  // namespace mvps::sim
