// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mvps/ad/tape.hpp"
#include "mvps/common/geometry.hpp"

#include <vector>

namespace mvps::field {

using ad::Matrix;
using ad::Tape;
using ad::Var;

struct SdfEval {
    Var sdf;      // P x 1
    Var grad;     // P x 3, d sdf / d x; invalid when not requested
    Var feature;  // P x F; invalid when the field has no features
};

/// Signed-distance field with Laplace density parameters.
class SdfField {
public:
    virtual ~SdfField() = default;
    /// Evaluates at the rows of pts (P x 3). The spatial gradient is built as
    /// tape nodes, so losses on it backpropagate into the parameters.
    virtual SdfEval eval(Tape& t, const Matrix& pts, bool with_grad) const = 0;
    virtual Var alpha(Tape& t) const = 0;
    virtual Var beta(Tape& t) const = 0;
    virtual std::size_t feature_dim() const = 0;

    /// Tape-free convenience: sdf values at the rows of pts.
    virtual std::vector<double> values(const Matrix& pts) const;
    double value(const Vec3& p) const;
    Vec3 gradient(const Vec3& p) const;
};

class RadianceField {
public:
    virtual ~RadianceField() = default;
    /// RGB (P x 3) at points with unit normals n, unit view directions v
    /// (pointing from the camera into the scene) and geometry features z.
    virtual Var eval(Tape& t, const Matrix& pts, Var normals, const Matrix& view_dirs, Var feature) const = 0;
};

/// sdf(x) = scale * (|x - center| - radius), parameter-free.
class AnalyticSphereField final : public SdfField {
public:
    AnalyticSphereField(double radius, double alpha, double beta, double scale = 1.0, Vec3 center = {})
        : radius_(radius), alpha_(alpha), beta_(beta), scale_(scale), center_(center) {}
    SdfEval eval(Tape& t, const Matrix& pts, bool with_grad) const override;
    Var alpha(Tape& t) const override { return t.constant(alpha_); }
    Var beta(Tape& t) const override { return t.constant(beta_); }
    std::size_t feature_dim() const override { return 0; }

private:
    double radius_, alpha_, beta_, scale_;
    Vec3 center_;
};

/// sdf(x) = n . x - offset for unit n, parameter-free.
class AnalyticPlaneField final : public SdfField {
public:
    AnalyticPlaneField(Vec3 normal, double offset, double alpha, double beta)
        : normal_(normalized(normal)), offset_(offset), alpha_(alpha), beta_(beta) {}
    SdfEval eval(Tape& t, const Matrix& pts, bool with_grad) const override;
    Var alpha(Tape& t) const override { return t.constant(alpha_); }
    Var beta(Tape& t) const override { return t.constant(beta_); }
    std::size_t feature_dim() const override { return 0; }

private:
    Vec3 normal_;
    double offset_, alpha_, beta_;
};

/// Same color everywhere.
class ConstantRadiance final : public RadianceField {
public:
    explicit ConstantRadiance(Vec3 rgb) : rgb_(rgb) {}
    Var eval(Tape& t, const Matrix& pts, Var normals, const Matrix& view_dirs, Var feature) const override;

private:
    Vec3 rgb_;
};

/// Splits a (3P x 1) stacked Jacobian column into a P x 3 gradient.
Var stacked_to_rows(Var stacked, std::size_t points);

}  // namespace mvps::field
