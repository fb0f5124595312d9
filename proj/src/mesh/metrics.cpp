// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#include "mvps/mesh/metrics.hpp"

#include "mvps/common/error.hpp"
#include "mvps/common/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

namespace mvps::mesh {

namespace {
constexpr std::uint32_t kLeafSize = 8;
}

KdTree::KdTree(std::vector<Vec3> points) : pts_(std::move(points)) {
    if (pts_.empty()) throw Error("KdTree: empty point set");
    nodes_.reserve(2 * pts_.size() / kLeafSize + 1);
    build(0, static_cast<std::uint32_t>(pts_.size()), 0);
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end, int depth) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= kLeafSize) return id;
    // split on the widest axis of the range
    Vec3 lo = pts_[begin], hi = pts_[begin];
    for (std::uint32_t i = begin; i < end; ++i)
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], pts_[i][a]);
            hi[a] = std::max(hi[a], pts_[i][a]);
        }
    int axis = 0;
    for (int a = 1; a < 3; ++a)
        if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(pts_.begin() + begin, pts_.begin() + mid, pts_.begin() + end,
                     [axis](const Vec3& p, const Vec3& q) { return p[axis] < q[axis]; });
    const double split = pts_[mid][axis];
    const std::int32_t l = build(begin, mid, depth + 1);
    const std::int32_t r = build(mid, end, depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = l;
    nodes_[static_cast<std::size_t>(id)].right = r;
    nodes_[static_cast<std::size_t>(id)].axis = axis;
    nodes_[static_cast<std::size_t>(id)].split = split;
    return id;
}

void KdTree::search(std::int32_t node, const Vec3& q, double& best) const {
    const Node& n = nodes_[static_cast<std::size_t>(node)];
    if (n.left < 0) {
        for (std::uint32_t i = n.begin; i < n.end; ++i) {
            const Vec3 d = pts_[i] - q;
            best = std::min(best, dot(d, d));
        }
        return;
    }
    const double diff = q[n.axis] - n.split;
    const std::int32_t near = diff < 0.0 ? n.left : n.right;
    const std::int32_t far = diff < 0.0 ? n.right : n.left;
    search(near, q, best);
    if (diff * diff < best) search(far, q, best);
}

double KdTree::nearest_sq(const Vec3& q) const {
    double best = std::numeric_limits<double>::infinity();
    search(0, q, best);
    return best;
}

std::vector<double> nearest_sq_distances(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
    if (from.empty() || to.empty()) throw Error("nearest-neighbour query on an empty point set");
    const KdTree tree(to);
    std::vector<double> d(from.size());
    parallel_for(from.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) d[i] = tree.nearest_sq(from[i]);
    });
    return d;
}

namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double fraction_below(const std::vector<double>& sq, double tau) {
    const double t2 = tau * tau;
    const auto n = std::count_if(sq.begin(), sq.end(), [t2](double d) { return d < t2; });
    return static_cast<double>(n) / static_cast<double>(sq.size());
}

void fill_fscore(EvalReport& r) {
    r.fscore = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
}

}  // namespace

double chamfer_l2(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.empty() || b.empty()) throw Error("chamfer_l2: empty point set");
    return mean_of(nearest_sq_distances(a, b)) + mean_of(nearest_sq_distances(b, a));
}

EvalReport fscore(const std::vector<Vec3>& predicted, const std::vector<Vec3>& reference, double tau) {
    return evaluate_points(predicted, reference, tau);
}

EvalReport evaluate_points(const std::vector<Vec3>& predicted, const std::vector<Vec3>& reference, double tau) {
    if (!(tau > 0.0)) throw Error("F-score threshold must be positive");
    if (predicted.empty() || reference.empty()) throw Error("evaluation on an empty point set");
    const auto d_pr = nearest_sq_distances(predicted, reference);
    const auto d_rp = nearest_sq_distances(reference, predicted);
    EvalReport r;
    r.tau = tau;
    r.predicted_samples = predicted.size();
    r.reference_samples = reference.size();
    r.chamfer_l2 = mean_of(d_pr) + mean_of(d_rp);
    r.precision = fraction_below(d_pr, tau);
    r.recall = fraction_below(d_rp, tau);
    fill_fscore(r);
    return r;
}

std::vector<Vec3> sample_analytic_surface(const sim::SceneSpec& scene, std::size_t n, Rng& rng) {
    std::vector<Vec3> out;
    out.reserve(n);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    switch (scene.shape) {
        case sim::ShapeKind::Sphere:
            while (out.size() < n) {
                const Vec3 d{g(rng), g(rng), g(rng)};
                const double len = norm(d);
                if (len > 1e-12) out.push_back(d * (scene.sphere_radius / len));
            }
            break;
        case sim::ShapeKind::Torus: {
            // area element (R + r cos v) du dv; accept v with that weight
            const double R = scene.torus_major, r = scene.torus_minor;
            while (out.size() < n) {
                const double uu = 2.0 * std::numbers::pi * u(rng);
                const double vv = 2.0 * std::numbers::pi * u(rng);
                if (u(rng) * (R + r) > R + r * std::cos(vv)) continue;
                const double ring = R + r * std::cos(vv);
                out.push_back({ring * std::cos(uu), r * std::sin(vv), ring * std::sin(uu)});
            }
            break;
        }
    }
    return out;
}

EvalReport evaluate_mesh(const TriMesh& m, const sim::SceneSpec& scene, std::size_t samples, double tau,
                         std::uint64_t seed) {
    Rng gt_rng(derive_seed(seed, "eval.reference"));
    const auto reference = sample_analytic_surface(scene, samples, gt_rng);
    if (m.empty()) {
        EvalReport r;
        r.tau = tau;
        r.chamfer_l2 = std::numeric_limits<double>::infinity();
        r.reference_samples = samples;
        return r;
    }
    Rng rng(derive_seed(seed, "eval.mesh"));
    return evaluate_points(sample_surface(m, samples, rng), reference, tau);
}

std::string report_csv_header() { return "label,chamfer_l2,fscore,precision,recall,tau,predicted_samples,reference_samples"; }

std::string report_csv_row(const std::string& label, const EvalReport& r) {
    std::ostringstream s;
    s.precision(17);
    s << label << ',' << r.chamfer_l2 << ',' << r.fscore << ',' << r.precision << ',' << r.recall << ',' << r.tau
      << ',' << r.predicted_samples << ',' << r.reference_samples;
    return s.str();
}

std::string report_text(const std::string& label, const EvalReport& r) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "# %s\n%s\n  chamfer_l2  %.6e\n  fscore      %.6f (tau %.4g)\n  precision   %.6f\n  recall      "
                  "%.6f\n  samples     %zu predicted, %zu reference\n",
                  kChamferConvention, label.c_str(), r.chamfer_l2, r.fscore, r.tau, r.precision, r.recall,
                  r.predicted_samples, r.reference_samples);
    return buf;
}

}  // namespace mvps::mesh
