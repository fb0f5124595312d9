// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mvps/common/geometry.hpp"

#include <string>
#include <string_view>

namespace mvps::sim {

enum class ShapeKind { Sphere, Torus };
enum class BrdfKind { Lambertian, BlinnPhong, Ward };

std::string_view shape_name(ShapeKind s);
std::string_view brdf_name(BrdfKind b);
ShapeKind parse_shape(std::string_view s);
BrdfKind parse_brdf(std::string_view s);

struct BrdfParams {
    BrdfKind kind = BrdfKind::Lambertian;
    double specular = 0.0;    // ks
    double shininess = 40.0;  // Blinn-Phong exponent
    double alpha_x = 0.15;    // Ward roughness along the tangent
    double alpha_y = 0.35;    // Ward roughness along the bitangent
    bool operator==(const BrdfParams&) const = default;
};

/// rho(n, l, v) including the diffuse lobe albedo / pi.
Vec3 eval_brdf(const BrdfParams& brdf, const Vec3& albedo, const Vec3& n, const Vec3& l, const Vec3& v,
               const Vec3& tangent);

/// Isotropic Ward lobe (specular part only), written with tan^2 of the half
/// angle. Kept separate to check the anisotropic form against.
double ward_isotropic_specular(double ks, double alpha, const Vec3& n, const Vec3& l, const Vec3& v);

struct SceneSpec {
    ShapeKind shape = ShapeKind::Sphere;
    double sphere_radius = 0.7;
    double torus_major = 0.6;
    double torus_minor = 0.25;
    BrdfParams brdf;
    bool textured = true;
    Vec3 base_albedo{0.75, 0.6, 0.45};
    double bounding_radius = 1.0;
    bool operator==(const SceneSpec&) const = default;
};

/// Closed-form ground-truth scene. The torus lies in the xz-plane (axis +y).
class AnalyticScene {
public:
    explicit AnalyticScene(SceneSpec spec);

    const SceneSpec& spec() const noexcept { return spec_; }
    double sdf(const Vec3& p) const;
    Vec3 gradient(const Vec3& p) const;
    Vec3 albedo(const Vec3& p) const;
    /// Unit tangent orthogonal to n, used by anisotropic BRDFs.
    Vec3 tangent(const Vec3& n) const;
    /// Projects p onto the zero level set along the gradient.
    Vec3 project_to_surface(const Vec3& p) const;
    /// Total surface area in closed form.
    double surface_area() const;

private:
    SceneSpec spec_;
};

}  // namespace mvps::sim
