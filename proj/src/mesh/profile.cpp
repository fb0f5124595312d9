// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#include "mvps/mesh/profile.hpp"

#include "mvps/common/error.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>
#include <map>
#include <utility>

namespace mvps::mesh {

namespace {

using EdgeKey = std::pair<std::uint32_t, std::uint32_t>;

EdgeKey key(std::uint32_t a, std::uint32_t b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

}  // namespace

std::vector<std::vector<Vec3>> surface_profile(const TriMesh& m, const Plane& plane) {
    const Vec3 n = normalized(plane.normal);
    const double off = plane.offset / norm(plane.normal);
    std::vector<double> side(m.vertices.size());
    for (std::size_t i = 0; i < m.vertices.size(); ++i) {
        side[i] = dot(n, m.vertices[i]) - off;
        if (side[i] == 0.0) side[i] = 1e-300;  // vertices on the plane count as above it
    }

    // Each crossed triangle contributes one segment between two crossed edges;
    // segments are chained through the shared mesh edges.
    std::map<EdgeKey, std::vector<std::size_t>> segs_of_edge;
    std::vector<std::array<EdgeKey, 2>> segs;
    for (const auto& t : m.triangles) {
        std::array<EdgeKey, 2> s{};
        int found = 0;
        for (int k = 0; k < 3; ++k) {
            const auto a = t[static_cast<std::size_t>(k)], b = t[static_cast<std::size_t>((k + 1) % 3)];
            if ((side[a] < 0.0) != (side[b] < 0.0)) s[static_cast<std::size_t>(found++)] = key(a, b);
        }
        if (found != 2) continue;
        for (const auto& e : s) segs_of_edge[e].push_back(segs.size());
        segs.push_back(s);
    }
    auto point_on = [&](const EdgeKey& e) {
        const double s0 = side[e.first], s1 = side[e.second];
        return m.vertices[e.first] + (m.vertices[e.second] - m.vertices[e.first]) * (s0 / (s0 - s1));
    };

    std::vector<std::vector<Vec3>> curves;
    std::vector<bool> used(segs.size(), false);
    auto extend = [&](std::vector<EdgeKey>& chain) {
        while (true) {
            const EdgeKey& tail = chain.back();
            bool moved = false;
            for (std::size_t s : segs_of_edge[tail]) {
                if (used[s]) continue;
                used[s] = true;
                chain.push_back(segs[s][0] == tail ? segs[s][1] : segs[s][0]);
                moved = true;
                break;
            }
            if (!moved) return;
        }
    };
    for (std::size_t s0 = 0; s0 < segs.size(); ++s0) {
        if (used[s0]) continue;
        used[s0] = true;
        std::vector<EdgeKey> fwd{segs[s0][0], segs[s0][1]};
        extend(fwd);
        if (fwd.front() != fwd.back()) {
            // open curve: grow the other end as well
            std::vector<EdgeKey> back{segs[s0][0]};
            extend(back);
            std::vector<EdgeKey> chain(back.rbegin(), back.rend());
            chain.insert(chain.end(), fwd.begin() + 1, fwd.end());
            fwd = std::move(chain);
        }
        std::vector<Vec3> curve;
        curve.reserve(fwd.size());
        for (const auto& e : fwd) curve.push_back(point_on(e));
        curves.push_back(std::move(curve));
    }
    if (curves.empty()) spdlog::warn("surface_profile: the plane does not intersect the mesh");
    return curves;
}

void write_profile_csv(const std::filesystem::path& path, const std::vector<std::vector<Vec3>>& curves,
                       const Plane& plane) {
    const Vec3 n = normalized(plane.normal);
    Vec3 up{0, 1, 0};
    if (std::abs(dot(up, n)) > 0.999) up = {0, 0, 1};
    up = normalized(up - n * dot(up, n));
    std::ofstream out(path);
    if (!out) throw IoError(path, "cannot open for writing");
    out.precision(10);
    out << "curve,arc_length,height,x,y,z\n";
    for (std::size_t c = 0; c < curves.size(); ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < curves[c].size(); ++i) {
            const Vec3& p = curves[c][i];
            if (i > 0) s += norm(p - curves[c][i - 1]);
            out << c << ',' << s << ',' << dot(p, up) << ',' << p.x << ',' << p.y << ',' << p.z << '\n';
        }
    }
}

}  // namespace mvps::mesh
