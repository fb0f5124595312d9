// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mvps {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Per-stage seed: splitmix64(global ^ fnv1a64(stage)). Stages can be rerun
/// independently and still draw the same stream.
constexpr std::uint64_t derive_seed(std::uint64_t global, std::string_view stage) {
    return splitmix64(global ^ fnv1a64(stage));
}

/// Counter-based child seed (e.g. per epoch, per view).
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(splitmix64(parent ^ splitmix64(a)) ^ splitmix64(b + 0x5851f42d4c957f2dULL));
}

}  // namespace mvps
