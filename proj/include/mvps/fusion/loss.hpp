// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mvps/field/fields.hpp"
#include "mvps/render/volume.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mvps::fusion {

using ad::Matrix;
using ad::Tape;
using ad::Var;

struct AblationFlags {
    bool no_mvs = false;
    bool no_ps = false;
    bool no_render = false;
    bool no_uncertainty = false;
    bool operator==(const AblationFlags&) const = default;
};

/// "full", or the '+'-joined active flag names.
std::string ablation_name(const AblationFlags& f);
/// Accepts "full", "" or a comma/plus separated list of flag names.
AblationFlags parse_ablation(const std::string& s);

struct LossConfig {
    double lambda_m = 0.1;
    double lambda_e = 1.0;
    int rays_per_view = 1024;
    int epochs = 2000;
    int eikonal_global = 256;  // uniform box samples per step
    AblationFlags flags;
    int light_index = -1;  // supervision light; negative picks one from the seed
    std::uint64_t seed = 0;
    render::SamplingConfig sampling;
    double lr = 1e-4;
    double lr_decay = 1.0;          // lr at the last epoch relative to the first, exponential in between
    double density_lr_scale = 1.0;  // learning-rate multiplier for log alpha and log beta
    int checkpoint_interval = 500;
    double opacity_eps = 1e-6;
    bool operator==(const LossConfig&) const = default;
};

/// One supervised pixel.
struct RayRecord {
    sim::Ray ray;
    Vec3 color;  // supervision image value
    bool in_mask = false;
    bool c_mvs = false;  // raw prior gates (0 outside the mask)
    bool c_ps = false;
    bool prior_valid = false;  // masked pixel with prior values
    Vec3 mvs_point;            // lifted prior depth
    Vec3 ps_normal;            // prior mean normal
};

struct TrainBatch {
    std::vector<RayRecord> rays;
    std::vector<render::RaySamples> samples;  // one per ray, fixed for the step
    Matrix global_points;                     // eikonal box samples (G x 3)
};

/// Gates after the uncertainty switch: with no_uncertainty every valid masked
/// pixel counts as confident.
bool effective_mvs_gate(const RayRecord& r, const AblationFlags& f);
bool effective_ps_gate(const RayRecord& r, const AblationFlags& f);
/// Whether a pixel receives rendering supervision.
bool renders(const RayRecord& r, const AblationFlags& f);

struct LossTerms {
    Var mvs, ps, render, mask, eikonal, total;
    render::RenderOutput rendered;
};

struct LossValues {
    double mvs = 0, ps = 0, render = 0, mask = 0, eikonal = 0, total = 0;
};

LossValues values_of(const LossTerms& t);

/// Mean over gated pixels of |f(p_i)|.
Var mvs_term(Tape& t, const field::SdfField& f, const std::vector<Vec3>& points);
/// Mean over gated rays of |n_r - n_ps| (Euclidean).
Var ps_term(Tape& t, Var ray_normals, const std::vector<Vec3>& prior_normals, const std::vector<std::uint8_t>& gate);
/// Mean over selected rays of the 3-channel L1 color error.
Var render_term(Tape& t, Var colors, const std::vector<Vec3>& targets, const std::vector<std::uint8_t>& select);
/// lambda_m times the mean over outside rays of -log(1 - opacity).
Var mask_term(Tape& t, Var opacity, const std::vector<std::uint8_t>& outside, double lambda_m);
/// lambda_e * mean of (|grad| - 1)^2 over the given gradient rows.
Var eikonal_term(Tape& t, const std::vector<Var>& grads, double lambda_e);

/// The full objective on a batch with fixed samples.
LossTerms total_loss(Tape& t, const TrainBatch& batch, const field::SdfField& f, const field::RadianceField& rad,
                     const LossConfig& cfg);

}  // namespace mvps::fusion
