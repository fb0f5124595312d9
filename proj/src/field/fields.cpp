// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#include "mvps/field/fields.hpp"

#include "mvps/common/error.hpp"

namespace mvps::field {

std::vector<double> SdfField::values(const Matrix& pts) const {
    Tape t;
    const SdfEval e = eval(t, pts, false);
    const auto f = e.sdf.value().flat();
    return {f.begin(), f.end()};
}

double SdfField::value(const Vec3& p) const { return values(Matrix(1, 3, {p.x, p.y, p.z}))[0]; }

Vec3 SdfField::gradient(const Vec3& p) const {
    Tape t;
    const SdfEval e = eval(t, Matrix(1, 3, {p.x, p.y, p.z}), true);
    const Matrix& g = e.grad.value();
    return {g[0], g[1], g[2]};
}

Var stacked_to_rows(Var stacked, std::size_t points) {
    if (stacked.rows() != 3 * points || stacked.cols() != 1)
        throw Error("stacked_to_rows: expected " + ad::shape_str(3 * points, 1) + ", got " +
                    ad::shape_str(stacked.rows(), stacked.cols()));
    const Var parts[] = {slice_rows(stacked, 0, points), slice_rows(stacked, points, 2 * points),
                         slice_rows(stacked, 2 * points, 3 * points)};
    return concat_cols(parts);
}

SdfEval AnalyticSphereField::eval(Tape& t, const Matrix& pts, bool with_grad) const {
    const std::size_t P = pts.rows();
    Matrix s(P, 1), g(P, 3);
    for (std::size_t p = 0; p < P; ++p) {
        const Vec3 d = Vec3{pts(p, 0), pts(p, 1), pts(p, 2)} - center_;
        const double r = norm(d);
        s[p] = scale_ * (r - radius_);
        const Vec3 n = r > 0.0 ? d / r : Vec3{0.0, 0.0, 1.0};
        for (int a = 0; a < 3; ++a) g(p, a) = scale_ * n[a];
    }
    SdfEval e;
    e.sdf = t.constant(std::move(s));
    if (with_grad) e.grad = t.constant(std::move(g));
    return e;
}

SdfEval AnalyticPlaneField::eval(Tape& t, const Matrix& pts, bool with_grad) const {
    const std::size_t P = pts.rows();
    Matrix s(P, 1), g(P, 3);
    for (std::size_t p = 0; p < P; ++p) {
        s[p] = dot(normal_, Vec3{pts(p, 0), pts(p, 1), pts(p, 2)}) - offset_;
        for (int a = 0; a < 3; ++a) g(p, a) = normal_[a];
    }
    SdfEval e;
    e.sdf = t.constant(std::move(s));
    if (with_grad) e.grad = t.constant(std::move(g));
    return e;
}

Var ConstantRadiance::eval(Tape& t, const Matrix& pts, Var, const Matrix&, Var) const {
    Matrix c(pts.rows(), 3);
    for (std::size_t p = 0; p < pts.rows(); ++p)
        for (int a = 0; a < 3; ++a) c(p, a) = rgb_[a];
    return t.constant(std::move(c));
}

}  // namespace mvps::field
