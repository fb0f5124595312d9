// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#include "mvps/mesh/marching_cubes.hpp"

#include "mvps/common/error.hpp"
#include "mvps/common/parallel.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <unordered_map>

namespace mvps::mesh {

Vec3 GridSpec::point(int i, int j, int k) const {
    return {lo.x + spacing(0) * i, lo.y + spacing(1) * j, lo.z + spacing(2) * k};
}

GridSpec grid_around_sphere(double radius, int resolution) {
    if (resolution < 8) throw Error("grid resolution must be at least 8");
    GridSpec g;
    g.resolution = resolution;
    // (n - 1) cells span 2 (r + pad) with pad = 2 cells
    const double half = radius * (resolution - 1) / (resolution - 5.0);
    g.lo = {-half, -half, -half};
    g.hi = {half, half, half};
    return g;
}

namespace {

// The table is derived from per-face rules rather than typed in. On every cube
// face, each run of inside corners is cut off by one segment joining the edge
// where the run is entered to the edge where it is left. The rule depends
// only on the four corner signs of the face, so two cubes sharing a face cut
// it identically and the extracted surface is closed. Segments chain into
// loops inside the cube, which are fanned into triangles.
CaseTable build_table() {
    CaseTable t{};
    int e = 0;
    for (int c = 0; c < 8; ++c)
        for (int axis = 0; axis < 3; ++axis)
            if (!(c & (1 << axis))) t.edges[static_cast<std::size_t>(e++)] = {c, c | (1 << axis)};
    auto edge_id = [&](int a, int b) {
        for (int i = 0; i < 12; ++i) {
            const auto& ed = t.edges[static_cast<std::size_t>(i)];
            if ((ed[0] == a && ed[1] == b) || (ed[0] == b && ed[1] == a)) return i;
        }
        throw Error("marching cubes: corners do not share an edge");
    };

    // Faces with corners counter-clockwise seen from outside the cube.
    std::vector<std::array<int, 4>> faces;
    for (int d = 0; d < 3; ++d) {
        const int u = (d + 1) % 3, v = (d + 2) % 3;
        for (int side = 0; side < 2; ++side) {
            std::array<int, 4> f{};
            const int uv[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
            for (int k = 0; k < 4; ++k) f[static_cast<std::size_t>(k)] = side << d | uv[k][0] << u | uv[k][1] << v;
            if (side == 0) std::swap(f[1], f[3]);
            faces.push_back(f);
        }
    }

    for (int config = 0; config < 256; ++config) {
        auto inside = [&](int c) { return (config >> c & 1) != 0; };
        std::array<int, 12> next;
        next.fill(-1);
        for (const auto& f : faces) {
            for (int k = 0; k < 4; ++k) {
                const int a = f[static_cast<std::size_t>(k)], b = f[static_cast<std::size_t>((k + 1) % 4)];
                if (!(inside(a) && !inside(b))) continue;
                // walk back to the first corner of this inside run
                int s = k;
                while (inside(f[static_cast<std::size_t>((s + 3) % 4)])) s = (s + 3) % 4;
                const int p = f[static_cast<std::size_t>((s + 3) % 4)], q = f[static_cast<std::size_t>(s)];
                next[static_cast<std::size_t>(edge_id(a, b))] = edge_id(p, q);
            }
        }
        std::array<bool, 12> used{};
        for (int start = 0; start < 12; ++start) {
            if (next[static_cast<std::size_t>(start)] < 0 || used[static_cast<std::size_t>(start)]) continue;
            std::vector<int> loop;
            for (int cur = start; !used[static_cast<std::size_t>(cur)]; cur = next[static_cast<std::size_t>(cur)]) {
                used[static_cast<std::size_t>(cur)] = true;
                loop.push_back(cur);
            }
            for (std::size_t i = 1; i + 1 < loop.size(); ++i)
                t.triangles[static_cast<std::size_t>(config)].push_back({loop[0], loop[i], loop[i + 1]});
        }
    }

    // Orient so triangle normals point from inside to outside. With corner 0
    // alone inside, the outward direction is (1, 1, 1).
    const auto& tri = t.triangles[1].at(0);
    auto mid = [&](int edge) {
        const auto& ed = t.edges[static_cast<std::size_t>(edge)];
        const int a = ed[0], b = ed[1];
        return Vec3{0.5 * ((a & 1) + (b & 1)), 0.5 * ((a >> 1 & 1) + (b >> 1 & 1)),
                    0.5 * ((a >> 2 & 1) + (b >> 2 & 1))};
    };
    const Vec3 n = cross(mid(tri[1]) - mid(tri[0]), mid(tri[2]) - mid(tri[0]));
    if (dot(n, Vec3{1, 1, 1}) < 0.0)
        for (auto& list : t.triangles)
            for (auto& tr : list) std::swap(tr[1], tr[2]);
    return t;
}

}  // namespace

const CaseTable& case_table() {
    static const CaseTable table = build_table();
    return table;
}

TriMesh marching_cubes_grid(const std::vector<double>& values, const GridSpec& g) {
    const int n = g.resolution;
    if (n < 2) throw Error("grid resolution must be at least 2");
    const auto N = static_cast<std::size_t>(n);
    if (values.size() != N * N * N) throw Error("grid value count does not match the resolution");
    const CaseTable& table = case_table();
    auto idx = [&](int i, int j, int k) {
        return (static_cast<std::size_t>(k) * N + static_cast<std::size_t>(j)) * N + static_cast<std::size_t>(i);
    };

    TriMesh m;
    std::unordered_map<std::uint64_t, std::uint32_t> vertex_of;  // grid edge -> vertex
    auto edge_vertex = [&](int i, int j, int k, int c0, int c1) -> std::uint32_t {
        const int i0 = i + (c0 & 1), j0 = j + (c0 >> 1 & 1), k0 = k + (c0 >> 2 & 1);
        const int axis = (c0 ^ c1) == 1 ? 0 : (c0 ^ c1) == 2 ? 1 : 2;
        const std::uint64_t key = static_cast<std::uint64_t>(idx(i0, j0, k0)) * 3 + static_cast<std::uint64_t>(axis);
        const auto it = vertex_of.find(key);
        if (it != vertex_of.end()) return it->second;
        const int i1 = i + (c1 & 1), j1 = j + (c1 >> 1 & 1), k1 = k + (c1 >> 2 & 1);
        const double v0 = values[idx(i0, j0, k0)], v1 = values[idx(i1, j1, k1)];
        const double s = v0 / (v0 - v1);
        const Vec3 p0 = g.point(i0, j0, k0), p1 = g.point(i1, j1, k1);
        const auto id = static_cast<std::uint32_t>(m.vertices.size());
        m.vertices.push_back(p0 + (p1 - p0) * s);
        vertex_of.emplace(key, id);
        return id;
    };

    for (int k = 0; k + 1 < n; ++k)
        for (int j = 0; j + 1 < n; ++j)
            for (int i = 0; i + 1 < n; ++i) {
                int config = 0;
                bool observed = true;
                for (int c = 0; c < 8; ++c) {
                    const double v = values[idx(i + (c & 1), j + (c >> 1 & 1), k + (c >> 2 & 1))];
                    if (std::isnan(v)) observed = false;
                    if (v < 0.0) config |= 1 << c;
                }
                if (!observed || config == 0 || config == 255) continue;
                for (const auto& tri : table.triangles[static_cast<std::size_t>(config)]) {
                    std::array<std::uint32_t, 3> out{};
                    for (int q = 0; q < 3; ++q) {
                        const auto& ed = table.edges[static_cast<std::size_t>(tri[static_cast<std::size_t>(q)])];
                        out[static_cast<std::size_t>(q)] = edge_vertex(i, j, k, ed[0], ed[1]);
                    }
                    m.triangles.push_back(out);
                }
            }
    remove_degenerate(m);
    if (m.empty()) spdlog::warn("marching cubes: the zero level set is empty");
    return m;
}

namespace {

std::vector<double> sample_grid(const BatchSdf& f, const GridSpec& g) {
    const auto N = static_cast<std::size_t>(g.resolution);
    std::vector<double> values(N * N * N);
    ad::Matrix slab(N * N, 3);
    for (std::size_t k = 0; k < N; ++k) {
        for (std::size_t j = 0; j < N; ++j)
            for (std::size_t i = 0; i < N; ++i) {
                const Vec3 p = g.point(static_cast<int>(i), static_cast<int>(j), static_cast<int>(k));
                for (int a = 0; a < 3; ++a) slab(j * N + i, a) = p[a];
            }
        const auto v = f(slab);
        if (v.size() != N * N) throw Error("field returned the wrong number of values");
        std::copy(v.begin(), v.end(), values.begin() + static_cast<std::ptrdiff_t>(k * N * N));
    }
    return values;
}

std::vector<Vec3> central_difference_gradients(const BatchSdf& f, const std::vector<Vec3>& pts, double h) {
    ad::Matrix q(pts.size() * 6, 3);
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (int a = 0; a < 3; ++a)
            for (int s = 0; s < 2; ++s) {
                Vec3 p = pts[i];
                p[a] += s == 0 ? h : -h;
                for (int c = 0; c < 3; ++c) q(i * 6 + static_cast<std::size_t>(a * 2 + s), c) = p[c];
            }
    const auto v = f(q);
    std::vector<Vec3> g(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (int a = 0; a < 3; ++a) g[i][a] = (v[i * 6 + static_cast<std::size_t>(2 * a)] - v[i * 6 + static_cast<std::size_t>(2 * a + 1)]) / (2 * h);
    return g;
}

}  // namespace

TriMesh marching_cubes(const BatchSdf& f, const GridSpec& grid, const GradientFn& grad) {
    if (grid.resolution < 8) throw Error("grid resolution must be at least 8");
    TriMesh m = marching_cubes_grid(sample_grid(f, grid), grid);
    if (m.empty()) return m;
    auto g = grad ? grad(m.vertices) : central_difference_gradients(f, m.vertices, 1e-3 * grid.spacing(0));
    for (auto& n : g) n = norm(n) > 0.0 ? normalized(n) : Vec3{};
    m.normals = std::move(g);
    return m;
}

std::vector<Vec3> field_gradients(const field::SdfField& f, const std::vector<Vec3>& pts) {
    constexpr std::size_t kChunk = 2048;
    std::vector<Vec3> out(pts.size());
    const std::size_t chunks = (pts.size() + kChunk - 1) / kChunk;
    parallel_for(chunks, [&](std::size_t c0, std::size_t c1) {
        for (std::size_t c = c0; c < c1; ++c) {
            const std::size_t b = c * kChunk, e = std::min(pts.size(), b + kChunk);
            ad::Matrix p(e - b, 3);
            for (std::size_t i = b; i < e; ++i)
                for (int a = 0; a < 3; ++a) p(i - b, a) = pts[i][a];
            ad::Tape t;
            const auto& g = f.eval(t, p, true).grad.value();
            for (std::size_t i = b; i < e; ++i) out[i] = {g(i - b, 0), g(i - b, 1), g(i - b, 2)};
        }
    });
    return out;
}

TriMesh marching_cubes(const field::SdfField& f, const GridSpec& grid) {
    return marching_cubes([&](const ad::Matrix& p) { return f.values(p); }, grid,
                          [&](const std::vector<Vec3>& p) { return field_gradients(f, p); });
}

}  // namespace mvps::mesh
