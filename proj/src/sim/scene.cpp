// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#include "mvps/sim/scene.hpp"

#include "mvps/common/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace mvps::sim {

std::string_view shape_name(ShapeKind s) { return s == ShapeKind::Sphere ? "sphere" : "torus"; }

std::string_view brdf_name(BrdfKind b) {
    switch (b) {
        case BrdfKind::Lambertian: return "lambertian";
        case BrdfKind::BlinnPhong: return "blinn-phong";
        case BrdfKind::Ward: return "ward-anisotropic";
    }
    return "?";
}

ShapeKind parse_shape(std::string_view s) {
    if (s == "sphere") return ShapeKind::Sphere;
    if (s == "torus") return ShapeKind::Torus;
    throw Error("unknown shape '" + std::string(s) + "' (expected sphere|torus)");
}

BrdfKind parse_brdf(std::string_view s) {
    if (s == "lambertian") return BrdfKind::Lambertian;
    if (s == "blinn-phong") return BrdfKind::BlinnPhong;
    if (s == "ward-anisotropic" || s == "ward") return BrdfKind::Ward;
    throw Error("unknown brdf '" + std::string(s) + "' (expected lambertian|blinn-phong|ward-anisotropic)");
}

Vec3 eval_brdf(const BrdfParams& brdf, const Vec3& albedo, const Vec3& n, const Vec3& l, const Vec3& v,
               const Vec3& tangent) {
    const Vec3 diffuse = albedo / std::numbers::pi;
    const double nl = dot(n, l);
    const double nv = dot(n, v);
    if (brdf.kind == BrdfKind::Lambertian || brdf.specular == 0.0 || nl <= 0.0 || nv <= 0.0) return diffuse;
    const Vec3 h = normalized(l + v);
    const double nh = dot(n, h);
    double spec = 0.0;
    if (brdf.kind == BrdfKind::BlinnPhong) {
        if (nh > 0.0)
            spec = brdf.specular * (brdf.shininess + 8.0) / (8.0 * std::numbers::pi) * std::pow(nh, brdf.shininess);
    } else {
        const Vec3 bitangent = cross(n, tangent);
        const double hx = dot(h, tangent) / brdf.alpha_x;
        const double hy = dot(h, bitangent) / brdf.alpha_y;
        spec = brdf.specular * std::exp(-(hx * hx + hy * hy) / (nh * nh)) /
               (4.0 * std::numbers::pi * brdf.alpha_x * brdf.alpha_y * std::sqrt(nl * nv));
    }
    return diffuse + Vec3{spec, spec, spec};
}

double ward_isotropic_specular(double ks, double alpha, const Vec3& n, const Vec3& l, const Vec3& v) {
    const Vec3 h = normalized(l + v);
    const double cos_h = dot(n, h);
    const double tan2 = (1.0 - cos_h * cos_h) / (cos_h * cos_h);
    return ks * std::exp(-tan2 / (alpha * alpha)) /
           (4.0 * std::numbers::pi * alpha * alpha * std::sqrt(dot(n, l) * dot(n, v)));
}

AnalyticScene::AnalyticScene(SceneSpec spec) : spec_(spec) {
    const double extent = spec_.shape == ShapeKind::Sphere ? spec_.sphere_radius
                                                           : spec_.torus_major + spec_.torus_minor;
    if (spec_.shape == ShapeKind::Torus && spec_.torus_minor >= spec_.torus_major)
        throw Error("torus minor radius must be smaller than the major radius");
    if (extent >= spec_.bounding_radius)
        throw Error("shape extent " + std::to_string(extent) + " does not fit the bounding radius " +
                    std::to_string(spec_.bounding_radius));
}

double AnalyticScene::sdf(const Vec3& p) const {
    if (spec_.shape == ShapeKind::Sphere) return norm(p) - spec_.sphere_radius;
    const double q = std::hypot(p.x, p.z) - spec_.torus_major;
    return std::hypot(q, p.y) - spec_.torus_minor;
}

Vec3 AnalyticScene::gradient(const Vec3& p) const {
    if (spec_.shape == ShapeKind::Sphere) {
        const double r = norm(p);
        return r > 0.0 ? p / r : Vec3{0.0, 1.0, 0.0};
    }
    const double rho = std::hypot(p.x, p.z);
    const Vec3 radial = rho > 0.0 ? Vec3{p.x / rho, 0.0, p.z / rho} : Vec3{1.0, 0.0, 0.0};
    const double q = rho - spec_.torus_major;
    const double len = std::hypot(q, p.y);
    if (len == 0.0) return radial;
    return radial * (q / len) + Vec3{0.0, p.y / len, 0.0};
}

Vec3 AnalyticScene::albedo(const Vec3& p) const {
    if (!spec_.textured) return spec_.base_albedo;
    // Smooth multi-frequency pattern so every local window carries contrast.
    const double a = std::sin(9.0 * p.x + 1.3) * std::sin(9.0 * p.y + 0.7) * std::sin(9.0 * p.z + 2.1);
    const double b = std::sin(5.0 * (p.x + p.y) - 0.4) * std::cos(5.0 * (p.z - p.y) + 0.9);
    return {spec_.base_albedo.x * (0.7 + 0.3 * a), spec_.base_albedo.y * (0.7 + 0.3 * b),
            spec_.base_albedo.z * (0.7 + 0.15 * (a + b))};
}

Vec3 AnalyticScene::tangent(const Vec3& n) const {
    Vec3 t = cross(Vec3{0.0, 1.0, 0.0}, n);
    if (norm(t) < 1e-8) t = cross(Vec3{1.0, 0.0, 0.0}, n);
    return normalized(t);
}

Vec3 AnalyticScene::project_to_surface(const Vec3& p) const {
    Vec3 q = p;
    for (int i = 0; i < 4; ++i) q = q - gradient(q) * sdf(q);
    return q;
}

double AnalyticScene::surface_area() const {
    const double pi = std::numbers::pi;
    if (spec_.shape == ShapeKind::Sphere) return 4.0 * pi * spec_.sphere_radius * spec_.sphere_radius;
    return 4.0 * pi * pi * spec_.torus_major * spec_.torus_minor;
}

}  // namespace mvps::sim
