// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

// AVX2 + FMA variants. This translation unit is compiled with -mavx2 -mfma and
// must only be entered after the runtime check in dispatch.cpp.

#include "mvps/simd/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>

namespace mvps::simd {
namespace {

inline __m256i tail_mask(std::size_t rem) {
    return _mm256_set_epi64x(rem > 3 ? -1 : 0, rem > 2 ? -1 : 0, rem > 1 ? -1 : 0,
                             rem > 0 ? -1 : 0);
}

// Computes R output rows of width n. Output row r accumulates
//   sum_t a[r * a_rs + t * a_ts] * b[t * n + j]
// which covers both a * b (a_rs = k, a_ts = 1) and a^T * b (a_rs = 1, a_ts = k).
template <int R>
void block_rows(std::size_t n, std::size_t inner, const double* a, std::size_t a_rs,
                std::size_t a_ts, const double* b, double* c, bool accumulate) {
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
        __m256d c0[R], c1[R];
        for (int r = 0; r < R; ++r) {
            c0[r] = accumulate ? _mm256_loadu_pd(c + r * n + j) : _mm256_setzero_pd();
            c1[r] = accumulate ? _mm256_loadu_pd(c + r * n + j + 4) : _mm256_setzero_pd();
        }
        for (std::size_t t = 0; t < inner; ++t) {
            const double* brow = b + t * n + j;
            const __m256d b0 = _mm256_loadu_pd(brow);
            const __m256d b1 = _mm256_loadu_pd(brow + 4);
            for (int r = 0; r < R; ++r) {
                const __m256d av = _mm256_broadcast_sd(a + r * a_rs + t * a_ts);
                c0[r] = _mm256_fmadd_pd(av, b0, c0[r]);
                c1[r] = _mm256_fmadd_pd(av, b1, c1[r]);
            }
        }
        for (int r = 0; r < R; ++r) {
            _mm256_storeu_pd(c + r * n + j, c0[r]);
            _mm256_storeu_pd(c + r * n + j + 4, c1[r]);
        }
    }
    for (; j < n; j += 4) {
        const std::size_t rem = std::min<std::size_t>(4, n - j);
        const __m256i mask = tail_mask(rem);
        __m256d c0[R];
        for (int r = 0; r < R; ++r)
            c0[r] = accumulate ? _mm256_maskload_pd(c + r * n + j, mask) : _mm256_setzero_pd();
        for (std::size_t t = 0; t < inner; ++t) {
            const __m256d b0 = _mm256_maskload_pd(b + t * n + j, mask);
            for (int r = 0; r < R; ++r) {
                const __m256d av = _mm256_broadcast_sd(a + r * a_rs + t * a_ts);
                c0[r] = _mm256_fmadd_pd(av, b0, c0[r]);
            }
        }
        for (int r = 0; r < R; ++r) _mm256_maskstore_pd(c + r * n + j, mask, c0[r]);
    }
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) block_rows<4>(n, k, a + i * k, k, 1, b, c + i * n, accumulate);
    for (; i < m; ++i) block_rows<1>(n, k, a + i * k, k, 1, b, c + i * n, accumulate);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
    std::size_t p = 0;
    for (; p + 4 <= k; p += 4) block_rows<4>(n, m, a + p, 1, k, b, c + p * n, accumulate);
    for (; p < k; ++p) block_rows<1>(n, m, a + p, 1, k, b, c + p * n, accumulate);
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void mul(std::size_t n, const double* a, const double* b, double* out) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void mul_acc(std::size_t n, const double* a, const double* b, double* out) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                                                  _mm256_loadu_pd(out + i)));
    for (; i < n; ++i) out[i] += a[i] * b[i];
}

// exp via 2^n * e^r with |r| <= ln2/2 and a degree-13 Taylor polynomial.
inline __m256d exp_pd(__m256d x) {
    x = _mm256_min_pd(_mm256_max_pd(x, _mm256_set1_pd(-708.0)), _mm256_set1_pd(709.0));
    const __m256d nf = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634)),
                                       _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(nf, _mm256_set1_pd(6.93147180369123816490e-01), x);
    r = _mm256_fnmadd_pd(nf, _mm256_set1_pd(1.90821492927058770002e-10), r);

    static constexpr double kInvFact[] = {
        1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0,
        1.0 / 362880.0,     1.0 / 40320.0,     1.0 / 5040.0,     1.0 / 720.0,
        1.0 / 120.0,        1.0 / 24.0,        1.0 / 6.0,        0.5,
        1.0,                1.0};
    __m256d p = _mm256_set1_pd(kInvFact[0]);
    for (int i = 1; i < 14; ++i) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kInvFact[i]));

    __m256i ni = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(nf));
    ni = _mm256_slli_epi64(_mm256_add_epi64(ni, _mm256_set1_epi64x(1023)), 52);
    return _mm256_mul_pd(p, _mm256_castsi256_pd(ni));
}

// log(1 + e) for e in [0, 1] through 2 atanh(e / (2 + e)); s^2 <= 1/9.
inline __m256d log1p_unit_pd(__m256d e) {
    const __m256d s = _mm256_div_pd(e, _mm256_add_pd(_mm256_set1_pd(2.0), e));
    const __m256d s2 = _mm256_mul_pd(s, s);
    __m256d q = _mm256_set1_pd(1.0 / 37.0);
    for (int odd = 35; odd >= 1; odd -= 2) q = _mm256_fmadd_pd(q, s2, _mm256_set1_pd(1.0 / odd));
    return _mm256_mul_pd(_mm256_mul_pd(_mm256_set1_pd(2.0), s), q);
}

inline __m256d abs_pd(__m256d x) { return _mm256_andnot_pd(_mm256_set1_pd(-0.0), x); }

void softplus(std::size_t n, double beta, const double* x, double* value, double* slope) {
    const __m256d vb = _mm256_set1_pd(beta);
    const __m256d inv_b = _mm256_set1_pd(1.0 / beta);
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vx = _mm256_loadu_pd(x + i);
        const __m256d bx = _mm256_mul_pd(vb, vx);
        const __m256d e = exp_pd(_mm256_sub_pd(_mm256_setzero_pd(), abs_pd(bx)));
        const __m256d v = _mm256_fmadd_pd(log1p_unit_pd(e), inv_b,
                                          _mm256_max_pd(vx, _mm256_setzero_pd()));
        const __m256d r = _mm256_div_pd(one, _mm256_add_pd(one, e));
        const __m256d nonneg = _mm256_cmp_pd(bx, _mm256_setzero_pd(), _CMP_GE_OQ);
        _mm256_storeu_pd(value + i, v);
        _mm256_storeu_pd(slope + i, _mm256_blendv_pd(_mm256_mul_pd(e, r), r, nonneg));
    }
    for (; i < n; ++i) {
        const double bx = beta * x[i];
        const double e = std::exp(-std::abs(bx));
        value[i] = std::max(x[i], 0.0) + std::log1p(e) / beta;
        slope[i] = bx >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
    }
}

void sigmoid(std::size_t n, const double* x, double* out) {
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vx = _mm256_loadu_pd(x + i);
        const __m256d e = exp_pd(_mm256_sub_pd(_mm256_setzero_pd(), abs_pd(vx)));
        const __m256d r = _mm256_div_pd(one, _mm256_add_pd(one, e));
        const __m256d nonneg = _mm256_cmp_pd(vx, _mm256_setzero_pd(), _CMP_GE_OQ);
        _mm256_storeu_pd(out + i, _mm256_blendv_pd(_mm256_mul_pd(e, r), r, nonneg));
    }
    for (; i < n; ++i) {
        const double e = std::exp(-std::abs(x[i]));
        out[i] = x[i] >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
    }
}

void exp_kernel(std::size_t n, const double* x, double* out) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, exp_pd(_mm256_loadu_pd(x + i)));
    for (; i < n; ++i) out[i] = std::exp(x[i]);
}

double dot(std::size_t n, const double* a, const double* b) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

constexpr KernelTable kAvx2{Isa::Avx2, gemm_nn, gemm_tn, axpy,       mul, mul_acc,
                            softplus,  sigmoid, exp_kernel, dot};

}  // namespace

const KernelTable& avx2_table() noexcept { return kAvx2; }

}  // namespace mvps::simd
