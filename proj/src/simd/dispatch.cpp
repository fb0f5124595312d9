// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#include "mvps/simd/kernels.hpp"

#include <spdlog/spdlog.h>

#include <cstdlib>
#include <string>

namespace mvps::simd {

#if defined(MVPS_HAVE_AVX2)
const KernelTable& avx2_table() noexcept;
#endif

std::string_view isa_name(Isa isa) noexcept {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
    }
    return "unknown";
}

bool cpu_supports_avx2() noexcept {
#if defined(__GNUC__) && (defined(__x86_64__) || defined(__i386__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* avx2_kernels() noexcept {
#if defined(MVPS_HAVE_AVX2)
    if (cpu_supports_avx2()) return &avx2_table();
#endif
    return nullptr;
}

namespace {

const KernelTable& select() noexcept {
    const char* env = std::getenv("MVPS_SIMD");
    const std::string pinned = env ? env : "auto";
    if (pinned == "scalar") return scalar_kernels();
    const KernelTable* avx2 = avx2_kernels();
    if (pinned == "avx2" && avx2 == nullptr)
        spdlog::warn("MVPS_SIMD=avx2 requested but unavailable; using scalar kernels");
    return avx2 != nullptr ? *avx2 : scalar_kernels();
}

}  // namespace

const KernelTable& kernels() noexcept {
    static const KernelTable& active = select();
    return active;
}

}  // namespace mvps::simd
