// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mvps/prior/prior_maps.hpp"
#include "mvps/sim/render.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mvps::prior {

inline constexpr double kDefaultTauMvs = 0.9;
inline constexpr double kDefaultTauPs = 0.03;

struct BlendResult {
    double depth = 0.0;       // softmax-weighted mean of hypotheses
    double confidence = 0.0;  // softmax probability of the best-cost hypothesis
    std::size_t best = 0;
};

/// Throws when there are no hypotheses or the spans differ in length.
BlendResult blend_hypotheses(std::span<const double> depths, std::span<const double> costs);

struct MvsConfig {
    int hypotheses = 16;        // H
    double step = 0.01;         // hypothesis spacing in scene units
    double sharpness = 6.0;     // cost curvature on fully textured pixels
    double peak_noise = 0.15;   // std of the cost peak around the true depth, in steps
    int max_shift = 8;          // range of the per-view sweep grid offset, in steps
    int window = 2;             // radius of the texture-variance window
    double texture_var_ref = 1e-4;  // local variance at which costs are fully peaked
    double glossy_flatness = 1e-3; // cost curvature multiplier for non-Lambertian scenes
    bool operator==(const MvsConfig&) const = default;
};

struct PsConfig {
    int ensemble = 100;
    double drop_probability = 0.2;  // per-light dropout per member
    double base_noise = 0.0;        // relative intensity noise on every member
    double residual_gain = 4.0;     // extra relative noise per unit Lambertian-fit residual
    double shadow_threshold = 1e-6; // intensities at or below are treated as shadowed
    bool operator==(const PsConfig&) const = default;
};

struct OracleConfig {
    MvsConfig mvs;
    PsConfig ps;
    double tau_mvs = kDefaultTauMvs;
    double tau_ps = kDefaultTauPs;
    bool operator==(const OracleConfig&) const = default;
};

/// Strict threshold tests.
inline bool mvs_gate(double confidence, double tau) { return confidence > tau; }
inline bool ps_gate(const Vec3& variance, double tau) {
    return std::abs(variance.x) + std::abs(variance.y) + std::abs(variance.z) < tau;
}

/// Depth, confidence and the MVS gate for one view.
void simulate_mvs(const sim::Dataset& ds, std::size_t view, const MvsConfig& cfg, double tau, std::uint64_t seed,
                  ViewPriors& out);

struct NormalStats {
    Vec3 mean;      // renormalized average of the unit members
    Vec3 variance;  // per-component sample variance, 1/(N-1)
};

/// Members are normalized before averaging.
NormalStats summarize_ensemble(std::span<const Vec3> members);

/// Least-squares Lambertian solve: returns albedo-scaled normal b with
/// intensity_j ~= e_j * (l_j . b). Throws "degenerate lighting" on rank < 3.
Vec3 lambertian_solve(std::span<const Vec3> lights, std::span<const double> intensities,
                      std::span<const double> observed);

/// Mean normal, variance and the PS gate for one view.
void simulate_ps(const sim::Dataset& ds, std::size_t view, const PsConfig& cfg, double tau, std::uint64_t seed,
                 ViewPriors& out);

/// Recomputes both gates from the stored maps; always 0 outside the mask.
void apply_gates(ViewPriors& p, const Mask& mask, double tau_mvs, double tau_ps);

/// Runs both oracles on every view. Requires the per-light images.
std::vector<ViewPriors> simulate_priors(const sim::Dataset& ds, const OracleConfig& cfg, std::uint64_t seed);

struct LiftedPoint {
    int x = 0;
    int y = 0;
    Vec3 point;
};

/// World points of the MVS-gated pixels.
std::vector<LiftedPoint> lift_depth(const sim::CameraView& cam, const ViewPriors& p);

}  // namespace mvps::prior
