// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#include "mvps/field/encoding.hpp"

#include "mvps/common/error.hpp"

#include <cmath>
#include <numbers>

namespace mvps::field {

using ad::Matrix;

Matrix encode(const Matrix& pts, int octaves) {
    if (octaves < 0) throw Error("encoding octaves must be non-negative");
    if (pts.cols() != 3) throw Error("encode expects P x 3 points, got " + pts.shape_str());
    const std::size_t P = pts.rows(), E = encoded_dim(octaves);
    Matrix out(P, E);
    for (std::size_t p = 0; p < P; ++p) {
        double* o = out.row(p);
        for (int a = 0; a < 3; ++a) o[a] = pts(p, a);
        for (int k = 0; k < octaves; ++k) {
            const double f = std::ldexp(std::numbers::pi, k);
            for (int a = 0; a < 3; ++a) {
                o[3 + 6 * k + a] = std::sin(f * pts(p, a));
                o[6 + 6 * k + a] = std::cos(f * pts(p, a));
            }
        }
    }
    return out;
}

Matrix encode_jacobian(const Matrix& pts, int octaves) {
    const std::size_t P = pts.rows(), E = encoded_dim(octaves);
    Matrix J(3 * P, E);
    for (std::size_t p = 0; p < P; ++p)
        for (int a = 0; a < 3; ++a) {
            double* row = J.row(a * P + p);
            row[a] = 1.0;
            for (int k = 0; k < octaves; ++k) {
                const double f = std::ldexp(std::numbers::pi, k);
                row[3 + 6 * k + a] = f * std::cos(f * pts(p, a));
                row[6 + 6 * k + a] = -f * std::sin(f * pts(p, a));
            }
        }
    return J;
}

}  // namespace mvps::field
