// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mvps/common/random.hpp"
#include "mvps/field/fields.hpp"
#include "mvps/sim/camera.hpp"

#include <filesystem>
#include <vector>

namespace mvps::render {

using ad::Matrix;
using ad::Tape;
using ad::Var;

/// Laplace CDF with scale beta, evaluated stably on both branches.
double laplace_cdf(double u, double beta);
/// sigma = alpha * Psi_beta(-s).
double density(double s, double alpha, double beta);
/// Differentiable density for a column of signed distances.
Var density(Var sdf, Var alpha, Var beta);

struct SamplingConfig {
    int n_uniform = 48;
    int n_importance = 16;
    bool operator==(const SamplingConfig&) const = default;
};

struct RaySamples {
    double t_near = 0.0;
    double t_far = 0.0;
    std::vector<double> t;  // strictly increasing, inside [t_near, t_far]
};

/// One sample per stratum of [t_near, t_far].
std::vector<double> stratified(double t_near, double t_far, int n, Rng& rng);

/// Per-interval weights T_j (1 - exp(-sigma_j delta_j)) with sigma from the
/// midpoint signed distance (s_j + s_{j+1}) / 2.
std::vector<double> interval_weights(std::span<const double> t, std::span<const double> sdf, double alpha,
                                     double beta);

/// Inverse-CDF draws from the piecewise-constant density over intervals
/// [t_j, t_{j+1}] proportional to weights (falls back to uniform when all are 0).
std::vector<double> importance_resample(std::span<const double> t, std::span<const double> weights, int n, Rng& rng);

/// Stratified samples per ray, augmented by importance samples drawn from the
/// current field. Rays must intersect the bounding sphere.
std::vector<RaySamples> sample_rays(const field::SdfField& f, const std::vector<sim::Ray>& rays,
                                    double bounding_radius, const SamplingConfig& cfg, Rng& rng);

/// Near/far bounds on the bounding sphere; false when the ray misses it.
bool ray_bounds(const sim::Ray& ray, double bounding_radius, double& t_near, double& t_far);

struct RenderOutput {
    std::size_t rays = 0;
    std::size_t samples = 0;  // per ray
    Matrix points;            // (rays * samples) x 3, ray-major
    Matrix view_dirs;         // (rays * samples) x 3
    Matrix deltas;            // rays x samples
    field::SdfEval geometry;  // per point
    Var sigma;                // rays x samples
    Var transmittance;        // rays x samples, T_1 = 1
    Var weights;              // rays x samples
    Var color;                // rays x 3; invalid without a radiance field
    Var normal;               // rays x 3, sum_j w_j grad f(x_j), not renormalized
    Var opacity;              // rays x 1, max_j sigma_j / alpha clamped to [eps, 1 - eps]
};

struct RenderOptions {
    bool color = true;
    bool normals = true;  // requires spatial gradients
    double opacity_eps = 1e-6;
};

RenderOutput render_rays(Tape& t, const field::SdfField& f, const field::RadianceField* radiance,
                         const std::vector<sim::Ray>& rays, const std::vector<RaySamples>& samples, Var alpha,
                         Var beta, const RenderOptions& opts = {});

/// 1 - sum_j w_j per ray, computed as the product of per-interval survivals.
std::vector<double> final_transmittance(const RenderOutput& out);

/// Per-sample (ray, j, t, sigma, T, w) rows for inspection.
void write_ray_debug_csv(const std::filesystem::path& path, const RenderOutput& out,
                         const std::vector<RaySamples>& samples);

}  // namespace mvps::render
