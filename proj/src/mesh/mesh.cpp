// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#include "mvps/mesh/mesh.hpp"

#include "mvps/common/error.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

namespace mvps::mesh {

double triangle_area(const TriMesh& m, std::size_t tri) {
    const auto& t = m.triangles[tri];
    const Vec3 &a = m.vertices[t[0]], &b = m.vertices[t[1]], &c = m.vertices[t[2]];
    return 0.5 * norm(cross(b - a, c - a));
}

double surface_area(const TriMesh& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.triangles.size(); ++i) s += triangle_area(m, i);
    return s;
}

void remove_degenerate(TriMesh& m) {
    std::vector<std::array<std::uint32_t, 3>> kept;
    kept.reserve(m.triangles.size());
    for (std::size_t i = 0; i < m.triangles.size(); ++i)
        if (triangle_area(m, i) > kDegenerateArea) kept.push_back(m.triangles[i]);
    std::vector<std::int64_t> remap(m.vertices.size(), -1);
    std::vector<Vec3> verts, normals;
    const bool has_normals = m.normals.size() == m.vertices.size();
    for (auto& t : kept)
        for (auto& v : t) {
            if (remap[v] < 0) {
                remap[v] = static_cast<std::int64_t>(verts.size());
                verts.push_back(m.vertices[v]);
                if (has_normals) normals.push_back(m.normals[v]);
            }
            v = static_cast<std::uint32_t>(remap[v]);
        }
    m.vertices = std::move(verts);
    m.normals = std::move(normals);
    m.triangles = std::move(kept);
}

bool is_watertight(const TriMesh& m) {
    if (m.triangles.empty()) return false;
    // directed edge -> count; a closed oriented surface uses each directed edge
    // once and its reverse once.
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
    for (const auto& t : m.triangles)
        for (int k = 0; k < 3; ++k) ++directed[{t[k], t[(k + 1) % 3]}];
    for (const auto& [e, n] : directed) {
        if (n != 1) return false;
        const auto rev = directed.find({e.second, e.first});
        if (rev == directed.end() || rev->second != 1) return false;
    }
    return true;
}

void validate(const TriMesh& m) {
    for (std::size_t i = 0; i < m.triangles.size(); ++i)
        for (auto v : m.triangles[i])
            if (v >= m.vertices.size())
                throw Error("triangle " + std::to_string(i) + " references vertex " + std::to_string(v) + " of " +
                            std::to_string(m.vertices.size()));
    if (!m.normals.empty() && m.normals.size() != m.vertices.size())
        throw Error("normal count does not match vertex count");
}

std::vector<Vec3> sample_surface(const TriMesh& m, std::size_t n, Rng& rng) {
    if (m.triangles.empty()) throw Error("cannot sample an empty mesh");
    std::vector<double> cdf(m.triangles.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < m.triangles.size(); ++i) cdf[i] = acc += triangle_area(m, i);
    if (!(acc > 0.0)) throw Error("cannot sample a mesh with zero area");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec3> out(n);
    for (auto& p : out) {
        const double r = u(rng) * acc;
        const std::size_t i = std::min<std::size_t>(
            static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), r) - cdf.begin()), cdf.size() - 1);
        const auto& t = m.triangles[i];
        const double s = std::sqrt(u(rng)), w = u(rng);
        p = m.vertices[t[0]] * (1.0 - s) + m.vertices[t[1]] * (s * (1.0 - w)) + m.vertices[t[2]] * (s * w);
    }
    return out;
}

void write_obj(const std::filesystem::path& path, const TriMesh& m) {
    std::ofstream out(path);
    if (!out) throw IoError(path, "cannot open for writing");
    char buf[128];
    out << "# mvps mesh: " << m.vertices.size() << " vertices, " << m.triangles.size() << " triangles\n";
    for (const auto& v : m.vertices) {
        std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v.x, v.y, v.z);
        out << buf;
    }
    const bool has_normals = m.normals.size() == m.vertices.size() && !m.normals.empty();
    if (has_normals)
        for (const auto& n : m.normals) {
            std::snprintf(buf, sizeof buf, "vn %.6g %.6g %.6g\n", n.x, n.y, n.z);
            out << buf;
        }
    for (const auto& t : m.triangles) {
        if (has_normals)
            out << "f " << t[0] + 1 << "//" << t[0] + 1 << ' ' << t[1] + 1 << "//" << t[1] + 1 << ' ' << t[2] + 1
                << "//" << t[2] + 1 << '\n';
        else
            out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    }
    if (!out) throw IoError(path, "write failed");
}

TriMesh read_obj(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path, "cannot open for reading");
    TriMesh m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream s(line);
        std::string tag;
        s >> tag;
        if (tag == "v" || tag == "vn") {
            Vec3 p;
            if (!(s >> p.x >> p.y >> p.z)) throw IoError(path, "bad " + tag + " record on line " + std::to_string(lineno));
            (tag == "v" ? m.vertices : m.normals).push_back(p);
        } else if (tag == "f") {
            std::array<std::uint32_t, 3> t{};
            for (auto& idx : t) {
                std::string tok;
                if (!(s >> tok)) throw IoError(path, "bad face on line " + std::to_string(lineno));
                const long v = std::stol(tok.substr(0, tok.find('/')));
                if (v <= 0) throw IoError(path, "unsupported face index on line " + std::to_string(lineno));
                idx = static_cast<std::uint32_t>(v - 1);
            }
            m.triangles.push_back(t);
        }
    }
    try {
        validate(m);
    } catch (const Error& e) {
        throw IoError(path, e.what());
    }
    return m;
}

}  // namespace mvps::mesh
