// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mvps/mesh/mesh.hpp"
#include "mvps/sim/scene.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mvps::mesh {

/// Exact nearest-neighbour queries over a fixed point set.
class KdTree {
public:
    explicit KdTree(std::vector<Vec3> points);
    /// Squared distance to the closest stored point.
    double nearest_sq(const Vec3& q) const;
    std::size_t size() const noexcept { return pts_.size(); }

private:
    struct Node {
        std::uint32_t begin, end;  // leaf range in pts_
        std::int32_t left = -1, right = -1;
        int axis = 0;
        double split = 0.0;
    };
    std::int32_t build(std::uint32_t begin, std::uint32_t end, int depth);
    void search(std::int32_t node, const Vec3& q, double& best) const;

    std::vector<Vec3> pts_;
    std::vector<Node> nodes_;
};

/// Squared nearest-neighbour distance from each point of `from` to `to`.
std::vector<double> nearest_sq_distances(const std::vector<Vec3>& from, const std::vector<Vec3>& to);

/// mean_a min_b |a - b|^2 + mean_b min_a |a - b|^2. Throws on an empty set.
double chamfer_l2(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

struct EvalReport {
    double chamfer_l2 = 0.0;
    double fscore = 0.0;
    double precision = 0.0;  // fraction of predicted samples within tau of ground truth
    double recall = 0.0;     // fraction of ground-truth samples within tau of the prediction
    double tau = 0.0;
    std::size_t predicted_samples = 0;
    std::size_t reference_samples = 0;
};

/// Precision, recall and their harmonic mean at threshold tau (distance < tau).
EvalReport fscore(const std::vector<Vec3>& predicted, const std::vector<Vec3>& reference, double tau);
/// Chamfer and F-score in one pass.
EvalReport evaluate_points(const std::vector<Vec3>& predicted, const std::vector<Vec3>& reference, double tau);

/// Area-uniform samples of the analytic ground-truth surface.
std::vector<Vec3> sample_analytic_surface(const sim::SceneSpec& scene, std::size_t n, Rng& rng);

inline constexpr const char* kChamferConvention =
    "chamfer_l2 = mean_pred min_gt |p-g|^2 + mean_gt min_pred |g-p|^2";

/// Mesh vs analytic ground truth; an empty mesh scores chamfer = inf, F = 0.
EvalReport evaluate_mesh(const TriMesh& m, const sim::SceneSpec& scene, std::size_t samples, double tau,
                         std::uint64_t seed);

std::string report_csv_header();
std::string report_csv_row(const std::string& label, const EvalReport& r);
/// Human-readable summary; the first line states the Chamfer convention.
std::string report_text(const std::string& label, const EvalReport& r);

}  // namespace mvps::mesh
