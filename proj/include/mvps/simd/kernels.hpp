// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string_view>

namespace mvps::simd {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa) noexcept;

/// Dense double-precision kernels used by the tape and the field evaluators.
///
/// Every matrix argument is row-major and contiguous. One table exists per
/// instruction set; the scalar table is the reference every other table is
/// tested against.
struct KernelTable {
    Isa isa;

    /// c[m x n] = a[m x k] * b[k x n]  (c += ... when accumulate is set)
    void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                    double* c, bool accumulate);

    /// c[k x n] = a[m x k]^T * b[m x n]  (c += ... when accumulate is set)
    void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                    double* c, bool accumulate);

    /// y += alpha * x
    void (*axpy)(std::size_t n, double alpha, const double* x, double* y);

    /// out = a * b (elementwise)
    void (*mul)(std::size_t n, const double* a, const double* b, double* out);

    /// out += a * b (elementwise)
    void (*mul_acc)(std::size_t n, const double* a, const double* b, double* out);

    /// value = log(1 + exp(beta x)) / beta, slope = sigmoid(beta x)
    void (*softplus)(std::size_t n, double beta, const double* x, double* value, double* slope);

    void (*sigmoid)(std::size_t n, const double* x, double* out);

    void (*exp)(std::size_t n, const double* x, double* out);

    double (*dot)(std::size_t n, const double* a, const double* b);
};

const KernelTable& scalar_kernels() noexcept;

/// Returns nullptr when the AVX2 variants were not compiled in or the running
/// CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels() noexcept;

bool cpu_supports_avx2() noexcept;

/// Table chosen once per process: the best supported ISA, unless the
/// MVPS_SIMD environment variable pins "scalar" or "avx2".
const KernelTable& kernels() noexcept;

}  // namespace mvps::simd
