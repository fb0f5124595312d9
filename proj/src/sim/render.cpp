// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#include "mvps/sim/render.hpp"

#include "mvps/common/error.hpp"
#include "mvps/common/parallel.hpp"
#include "mvps/common/random.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>

namespace mvps::sim {

TraceResult sphere_trace(const AnalyticScene& scene, const Ray& ray, double t_near, double t_far) {
    TraceResult r;
    double t = std::max(t_near, 0.0);
    for (r.steps = 0; r.steps < kMaxTraceSteps; ++r.steps) {
        const Vec3 p = ray.origin + ray.dir * t;
        const double s = scene.sdf(p);
        if (std::abs(s) < kHitEpsilon) {
            r.hit = true;
            r.t = t;
            r.point = p;
            return r;
        }
        t += s;
        if (t > t_far) return r;
    }
    r.step_limit = true;
    return r;
}

TraceResult sphere_trace(const AnalyticScene& scene, const Ray& ray) {
    double t0 = 0.0, t1 = 0.0;
    if (!intersect_sphere(ray.origin, ray.dir, scene.spec().bounding_radius, t0, t1)) return {};
    return sphere_trace(scene, ray, t0, t1);
}

double light_visibility(const AnalyticScene& scene, const Vec3& point, const Vec3& normal, const Vec3& light_dir) {
    const Ray shadow{point + normal * 1e-4, light_dir};
    double t0 = 0.0, t1 = 0.0;
    if (!intersect_sphere(shadow.origin, shadow.dir, scene.spec().bounding_radius, t0, t1)) return 1.0;
    return sphere_trace(scene, shadow, 0.0, t1).hit ? 0.0 : 1.0;
}

Vec3 shade(const AnalyticScene& scene, const Vec3& point, const Vec3& normal, const Vec3& view_dir,
           const Vec3& light_dir, double intensity, bool cast_shadows) {
    const double attached = std::max(dot(normal, light_dir), 0.0);
    if (attached == 0.0) return {};
    if (cast_shadows && light_visibility(scene, point, normal, light_dir) == 0.0) return {};
    const Vec3 rho = eval_brdf(scene.spec().brdf, scene.albedo(point), normal, light_dir, view_dir,
                               scene.tangent(normal));
    return rho * (intensity * attached);
}

Image median_image(const std::vector<Image>& images) {
    if (images.empty()) throw Error("median of an empty image stack");
    Image out(images[0].width, images[0].height, images[0].channels);
    std::vector<float> column(images.size());
    const std::size_t mid = images.size() / 2;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        for (std::size_t k = 0; k < images.size(); ++k) column[k] = images[k].data[i];
        std::nth_element(column.begin(), column.begin() + mid, column.end());
        double m = column[mid];
        if (images.size() % 2 == 0) {
            const float lower = *std::max_element(column.begin(), column.begin() + mid);
            m = 0.5 * (static_cast<double>(lower) + m);
        }
        out.data[i] = static_cast<float>(m);
    }
    return out;
}

ViewImages render_view(const AnalyticScene& scene, const CameraView& cam, const LightRig& lights, double noise_std,
                       std::uint64_t seed) {
    const int w = cam.width, h = cam.height;
    const std::size_t n_lights = lights.directions.size();
    ViewImages v;
    v.images.assign(n_lights, Image(w, h, 3));
    v.mask = Mask(w, h);
    v.gt_depth = Image(w, h, 1);
    v.gt_normal = Image(w, h, 3);
    std::atomic<int> capped{0};

    parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
        for (int y = static_cast<int>(y0); y < static_cast<int>(y1); ++y) {
            for (int x = 0; x < w; ++x) {
                const Ray ray = cam.pixel_ray(x, y);
                const TraceResult tr = sphere_trace(scene, ray);
                if (tr.step_limit) ++capped;
                if (!tr.hit) continue;
                const Vec3 n = normalized(scene.gradient(tr.point));
                v.mask.at(x, y) = 1;
                v.gt_depth.at(x, y) = static_cast<float>(cam.project(tr.point).z);
                for (int c = 0; c < 3; ++c) v.gt_normal.at(x, y, c) = static_cast<float>(n[c]);
                for (std::size_t j = 0; j < n_lights; ++j) {
                    const Vec3 rgb = shade(scene, tr.point, n, -ray.dir, lights.directions[j], lights.intensities[j]);
                    for (int c = 0; c < 3; ++c) v.images[j].at(x, y, c) = static_cast<float>(rgb[c]);
                }
            }
        }
    });
    if (capped > 0) spdlog::debug("sphere trace hit the step cap on {} pixels (treated as misses)", capped.load());

    if (noise_std > 0.0) {
        for (std::size_t j = 0; j < n_lights; ++j) {
            Rng rng(derive_seed(seed, j));
            std::normal_distribution<double> noise(0.0, noise_std);
            for (float& px : v.images[j].data)
                px = static_cast<float>(std::max(0.0, static_cast<double>(px) + noise(rng)));
        }
    }
    v.median = median_image(v.images);
    return v;
}

Dataset render_dataset(const DatasetSpec& spec) {
    const AnalyticScene scene(spec.scene);
    RigSpec rig_spec = spec.rig;
    rig_spec.bounding_radius = spec.scene.bounding_radius;
    const Rig rig = turntable_rig(rig_spec);
    Dataset ds;
    ds.spec = spec;
    ds.spec.rig = rig_spec;
    ds.cameras = rig.cameras;
    ds.lights = rig.lights;
    const std::uint64_t stage = derive_seed(spec.seed, "simulate");
    for (std::size_t k = 0; k < rig.cameras.size(); ++k)
        ds.views.push_back(render_view(scene, rig.cameras[k], rig.lights[k], spec.noise_std, derive_seed(stage, k)));
    return ds;
}

}  // namespace mvps::sim
