// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#include "mvps/common/error.hpp"
#include "mvps/sim/render.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace mvps;
using namespace mvps::sim;

namespace {

Vec3 random_point(std::mt19937_64& rng, double r = 1.0) {
    std::uniform_real_distribution<double> u(-r, r);
    return {u(rng), u(rng), u(rng)};
}

AnalyticScene unit_sphere() {
    SceneSpec s;
    s.sphere_radius = 1.0;
    s.bounding_radius = 1.5;
    return AnalyticScene(s);
}

DatasetSpec small_spec(ShapeKind shape) {
    DatasetSpec d;
    d.scene.shape = shape;
    d.rig.views = 4;
    d.rig.lights = 8;
    d.rig.width = 40;
    d.rig.height = 36;
    return d;
}

}  // namespace

TEST(AnalyticScene, GradientIsUnitAndMatchesDifferences) {
    std::mt19937_64 rng(1);
    for (ShapeKind shape : {ShapeKind::Sphere, ShapeKind::Torus}) {
        SceneSpec spec;
        spec.shape = shape;
        const AnalyticScene scene(spec);
        for (int i = 0; i < 500; ++i) {
            const Vec3 p = random_point(rng);
            const Vec3 g = scene.gradient(p);
            EXPECT_NEAR(norm(g), 1.0, 1e-6);
            const double h = 1e-6;
            for (int a = 0; a < 3; ++a) {
                Vec3 e;
                e[a] = h;
                const double fd = (scene.sdf(p + e) - scene.sdf(p - e)) / (2 * h);
                EXPECT_NEAR(fd, g[a], 1e-6);
            }
        }
    }
}

TEST(AnalyticScene, RejectsShapeOutsideBounds) {
    SceneSpec s;
    s.sphere_radius = 1.2;
    EXPECT_THROW(AnalyticScene{s}, Error);
}

TEST(Rig, TurntableAzimuthsAndRadius) {
    RigSpec spec;
    spec.views = 4;
    spec.elevation_deg = 0.0;
    const Rig rig = turntable_rig(spec);
    ASSERT_EQ(rig.cameras.size(), 4u);
    const double expected_deg[] = {0.0, 90.0, 180.0, 270.0};
    for (int k = 0; k < 4; ++k) {
        const Vec3 c = rig.cameras[k].center();
        EXPECT_NEAR(norm(c), spec.radius, 1e-12);
        double az = std::atan2(c.x, c.z) * 180.0 / std::numbers::pi;
        if (az < -1e-9) az += 360.0;
        EXPECT_NEAR(az, expected_deg[k], 1e-9);
        rig.cameras[k].validate(1e-9);
        // Optical axis points at the origin.
        const Vec3 fwd = rig.cameras[k].R.column(2);
        EXPECT_NEAR(dot(fwd, normalized(-c)), 1.0, 1e-12);
    }
}

TEST(Rig, LightsAreUnitPositiveAndCameraFixed) {
    RigSpec spec;
    spec.views = 20;
    spec.lights = 96;
    const Rig rig = turntable_rig(spec);
    ASSERT_EQ(rig.lights.size(), 20u);
    for (std::size_t k = 0; k < rig.lights.size(); ++k) {
        ASSERT_EQ(rig.lights[k].directions.size(), 96u);
        for (std::size_t j = 0; j < 96; ++j) {
            EXPECT_NEAR(norm(rig.lights[k].directions[j]), 1.0, 1e-9);
            EXPECT_GT(rig.lights[k].intensities[j], 0.0);
            // Same camera-frame direction in every view.
            const Vec3 cam0 = rig.cameras[0].R.transposed() * rig.lights[0].directions[j];
            const Vec3 camk = rig.cameras[k].R.transposed() * rig.lights[k].directions[j];
            EXPECT_NEAR(norm(cam0 - camk), 0.0, 1e-12);
        }
    }
}

TEST(Rig, RejectsDegenerateSpecs) {
    RigSpec spec;
    spec.radius = 0.9;
    EXPECT_THROW(turntable_rig(spec), Error);
    spec = {};
    spec.views = 1;
    EXPECT_THROW(turntable_rig(spec), Error);
    spec = {};
    spec.lights = 2;
    EXPECT_THROW(turntable_rig(spec), Error);
}

TEST(Camera, IdentityRayAtOrigin) {
    CameraView cam;
    cam.width = cam.height = 4;
    const Ray r = cam.ray_through(0.0, 0.0);
    EXPECT_EQ(r.dir, (Vec3{0.0, 0.0, 1.0}));
    EXPECT_EQ(r.origin, (Vec3{0.0, 0.0, 0.0}));
}

TEST(Camera, BackProjectionReproducesHit) {
    const Dataset ds = render_dataset(small_spec(ShapeKind::Torus));
    const AnalyticScene scene(ds.spec.scene);
    for (std::size_t k = 0; k < ds.cameras.size(); ++k) {
        const CameraView& cam = ds.cameras[k];
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x) {
                const Ray r = cam.pixel_ray(x, y);
                EXPECT_NEAR(norm(r.dir), 1.0, 1e-12);
                const TraceResult t = sphere_trace(scene, r);
                if (!t.hit) continue;
                const double d = cam.project(t.point).z;
                const Vec3 p = cam.unproject(x + 0.5, y + 0.5, d);
                EXPECT_NEAR(norm(p - t.point), 0.0, 1e-6);
            }
    }
}

TEST(SphereTrace, HitsAndMisses) {
    const AnalyticScene scene = unit_sphere();
    const TraceResult hit = sphere_trace(scene, {{0, 0, -3}, {0, 0, 1}});
    ASSERT_TRUE(hit.hit);
    EXPECT_NEAR(norm(hit.point - Vec3{0, 0, -1}), 0.0, 1e-5);
    EXPECT_NEAR(norm(scene.gradient(hit.point) - Vec3{0, 0, -1}), 0.0, 1e-4);
    EXPECT_FALSE(sphere_trace(scene, {{1.01, 0, -3}, {0, 0, 1}}).hit);
}

TEST(Shade, AttachedShadowAndLambertValue) {
    const AnalyticScene scene = unit_sphere();
    SceneSpec flat;
    flat.sphere_radius = 1.0;
    flat.bounding_radius = 1.5;
    flat.textured = false;
    flat.base_albedo = {1.0, 1.0, 1.0};
    const AnalyticScene white(flat);
    const Vec3 p{0, 0, -1}, n{0, 0, -1};
    const Vec3 rgb = shade(white, p, n, n, n, std::numbers::pi);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(rgb[c], 1.0, 1e-12);
    const Vec3 away = normalized(Vec3{0.0, std::sqrt(3.0), 1.0});  // n.l = -0.5
    EXPECT_NEAR(dot(n, away), -0.5, 1e-12);
    EXPECT_EQ(shade(scene, p, n, n, away, std::numbers::pi), (Vec3{}));
}

TEST(Shade, CastShadowBlacksOutOccludedPoint) {
    SceneSpec s;
    s.shape = ShapeKind::Torus;
    const AnalyticScene torus(s);
    // Inner rim point facing the hole; light along +x passes through the far tube.
    const Vec3 p{-(s.torus_major - s.torus_minor), 0.0, 0.0};
    const Vec3 n = torus.gradient(p);
    const Vec3 l{1.0, 0.0, 0.0};
    ASSERT_GT(dot(n, l), 0.0);
    EXPECT_EQ(light_visibility(torus, p, n, l), 0.0);
    EXPECT_EQ(shade(torus, p, n, l, l, std::numbers::pi), (Vec3{}));
    EXPECT_EQ(light_visibility(torus, p, n, Vec3{0.0, 1.0, 0.0}), 1.0);
}

TEST(Brdf, LambertDependsOnlyOnCosine) {
    const AnalyticScene scene = unit_sphere();
    const Vec3 p = normalized(Vec3{0.2, 0.3, -1.0});
    const Vec3 n = scene.gradient(p);
    // Two lights at the same angle to n, rotated about it.
    const Vec3 t = scene.tangent(n), b = cross(n, t);
    const double c = 0.6, s = 0.8;
    const Vec3 l1 = n * c + t * s, l2 = n * c + b * s;
    const Vec3 a = shade(scene, p, n, n, l1, 2.0, false);
    const Vec3 bb = shade(scene, p, n, n, l2, 2.0, false);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(a[k], bb[k], 1e-12);
}

TEST(Brdf, WardReducesToIsotropic) {
    std::mt19937_64 rng(3);
    BrdfParams brdf;
    brdf.kind = BrdfKind::Ward;
    brdf.specular = 0.4;
    brdf.alpha_x = brdf.alpha_y = 0.2;
    const AnalyticScene scene = unit_sphere();
    for (int i = 0; i < 200; ++i) {
        const Vec3 n = normalized(random_point(rng));
        Vec3 l = normalized(random_point(rng)), v = normalized(random_point(rng));
        if (dot(n, l) < 0) l = -l;
        if (dot(n, v) < 0) v = -v;
        const Vec3 rho = eval_brdf(brdf, {0, 0, 0}, n, l, v, scene.tangent(n));
        EXPECT_NEAR(rho.x, ward_isotropic_specular(0.4, 0.2, n, l, v), 1e-9);
    }
}

TEST(RenderDataset, MedianOfIdenticalImages) {
    Image a(3, 2, 3);
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] = 0.1f * static_cast<float>(i);
    EXPECT_EQ(median_image({a, a, a, a}), a);
    Image b = a, c = a;
    for (float& v : b.data) v += 1.0f;
    for (float& v : c.data) v += 2.0f;
    EXPECT_EQ(median_image({c, a, b}), b);
}

TEST(RenderDataset, MasksDepthsAndNormals) {
    for (ShapeKind shape : {ShapeKind::Sphere, ShapeKind::Torus}) {
        const Dataset ds = render_dataset(small_spec(shape));
        const AnalyticScene scene(ds.spec.scene);
        ASSERT_EQ(ds.views.size(), 4u);
        for (std::size_t k = 0; k < ds.views.size(); ++k) {
            const auto& v = ds.views[k];
            EXPECT_GT(v.mask.count(), 0u);
            EXPECT_EQ(v.images.size(), 8u);
            EXPECT_EQ(v.median, median_image(v.images));
            for (const auto& img : v.images)
                for (float px : img.data) EXPECT_GE(px, 0.0f);
            for (int y = 0; y < v.mask.height; ++y)
                for (int x = 0; x < v.mask.width; ++x) {
                    if (!v.mask.at(x, y)) {
                        EXPECT_EQ(v.gt_depth.at(x, y), 0.0f);
                        continue;
                    }
                    const Vec3 p = ds.cameras[k].unproject(x + 0.5, y + 0.5, v.gt_depth.at(x, y));
                    EXPECT_LT(std::abs(scene.sdf(p)), 1e-5);
                }
        }
    }
}

TEST(RenderDataset, FrontFacingNormalOpposesView) {
    DatasetSpec spec = small_spec(ShapeKind::Sphere);
    spec.rig.width = spec.rig.height = 41;
    const Dataset ds = render_dataset(spec);
    const auto& v = ds.views[0];
    const CameraView& cam = ds.cameras[0];
    // The optical axis passes through the sphere center, which projects to the image center.
    const Vec3 c = cam.project({0, 0, 0});
    const int x = static_cast<int>(c.x), y = static_cast<int>(c.y);
    ASSERT_TRUE(v.mask.at(x, y));
    const Vec3 n{v.gt_normal.at(x, y, 0), v.gt_normal.at(x, y, 1), v.gt_normal.at(x, y, 2)};
    EXPECT_LT(norm(n + cam.pixel_ray(x, y).dir), 1e-3);
}

TEST(RenderDataset, DeterministicGivenSeed) {
    DatasetSpec spec = small_spec(ShapeKind::Sphere);
    spec.noise_std = 0.01;
    spec.seed = 11;
    const Dataset a = render_dataset(spec);
    const Dataset b = render_dataset(spec);
    for (std::size_t k = 0; k < a.views.size(); ++k)
        for (std::size_t j = 0; j < a.views[k].images.size(); ++j) EXPECT_EQ(a.views[k].images[j], b.views[k].images[j]);
    spec.seed = 12;
    const Dataset c = render_dataset(spec);
    EXPECT_NE(a.views[0].images[0], c.views[0].images[0]);
    EXPECT_EQ(a.views[0].mask, c.views[0].mask);
}
