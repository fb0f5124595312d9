// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#include "mvps/simd/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace mvps::simd {
namespace {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
    if (!accumulate) std::fill(c, c + m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        const double* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
    if (!accumulate) std::fill(c, c + k * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* brow = b + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            double* crow = c + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void mul(std::size_t n, const double* a, const double* b, double* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void mul_acc(std::size_t n, const double* a, const double* b, double* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] += a[i] * b[i];
}

void softplus(std::size_t n, double beta, const double* x, double* value, double* slope) {
    for (std::size_t i = 0; i < n; ++i) {
        const double bx = beta * x[i];
        const double e = std::exp(-std::abs(bx));
        value[i] = std::max(x[i], 0.0) + std::log1p(e) / beta;
        slope[i] = bx >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
    }
}

void sigmoid(std::size_t n, const double* x, double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        const double e = std::exp(-std::abs(x[i]));
        out[i] = x[i] >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
    }
}

void exp_kernel(std::size_t n, const double* x, double* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}

double dot(std::size_t n, const double* a, const double* b) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

constexpr KernelTable kScalar{Isa::Scalar, gemm_nn, gemm_tn, axpy,       mul, mul_acc,
                              softplus,    sigmoid, exp_kernel, dot};

}  // namespace

const KernelTable& scalar_kernels() noexcept { return kScalar; }

}  // namespace mvps::simd
