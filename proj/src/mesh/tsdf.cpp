// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#include "mvps/mesh/tsdf.hpp"

#include "mvps/common/error.hpp"
#include "mvps/common/parallel.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace mvps::mesh {

TsdfVolume tsdf_integrate(const std::vector<DepthObservation>& views, const TsdfConfig& cfg) {
    if (views.empty()) throw Error("tsdf_fuse: no depth maps");
    if (!(cfg.truncation > 0.0)) throw Error("tsdf_fuse: truncation must be positive");
    const auto N = static_cast<std::size_t>(cfg.grid.resolution);
    TsdfVolume vol;
    vol.grid = cfg.grid;
    vol.tsdf.assign(N * N * N, std::numeric_limits<double>::quiet_NaN());
    vol.weight.assign(N * N * N, 0.0);
    parallel_for(N, [&](std::size_t k0, std::size_t k1) {
        for (std::size_t k = k0; k < k1; ++k)
            for (std::size_t j = 0; j < N; ++j)
                for (std::size_t i = 0; i < N; ++i) {
                    const Vec3 p = cfg.grid.point(static_cast<int>(i), static_cast<int>(j), static_cast<int>(k));
                    double acc = 0.0, wsum = 0.0;
                    for (const auto& v : views) {
                        const Vec3 uvz = v.camera.project(p);
                        if (uvz.z <= 0.0) continue;
                        const auto x = static_cast<long>(std::floor(uvz.x));
                        const auto y = static_cast<long>(std::floor(uvz.y));
                        if (x < 0 || y < 0 || x >= v.depth.width || y >= v.depth.height) continue;
                        const double d = v.depth.at(static_cast<int>(x), static_cast<int>(y), 0);
                        if (!(d > 0.0)) continue;
                        const double w = v.weight.data.empty() ? 1.0 : v.weight.at(static_cast<int>(x), static_cast<int>(y), 0);
                        if (!(w > 0.0)) continue;
                        const double sdf = d - uvz.z;
                        if (sdf < -cfg.truncation) continue;
                        acc += w * std::min(1.0, sdf / cfg.truncation);
                        wsum += w;
                    }
                    const std::size_t id = (k * N + j) * N + i;
                    if (wsum > 0.0) {
                        vol.tsdf[id] = acc / wsum;
                        vol.weight[id] = wsum;
                    }
                }
    });
    return vol;
}

TriMesh tsdf_fuse(const std::vector<DepthObservation>& views, const TsdfConfig& cfg) {
    const TsdfVolume vol = tsdf_integrate(views, cfg);
    if (std::none_of(vol.weight.begin(), vol.weight.end(), [](double w) { return w > 0.0; })) {
        spdlog::warn("tsdf_fuse: no voxel was observed");
        return {};
    }
    return marching_cubes_grid(vol.tsdf, vol.grid);
}

}  // namespace mvps::mesh
