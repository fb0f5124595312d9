// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mvps/field/networks.hpp"
#include "mvps/fusion/loss.hpp"
#include "mvps/prior/oracles.hpp"
#include "mvps/sim/render.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

namespace mvps::app {

struct EvalConfig {
    int grid_resolution = 256;  // marching-cubes samples per axis
    double tau_fraction = 0.01;  // F-score threshold as a fraction of the bounding diameter
    std::size_t samples = 100000;
    int tsdf_resolution = 128;
    double tsdf_truncation = 0.05;
    bool operator==(const EvalConfig&) const = default;

    double tau(double bounding_radius) const { return tau_fraction * 2.0 * bounding_radius; }
};

/// Fully resolved configuration of one run. The single seed feeds every stage
/// through stage-name derivation.
struct RunConfig {
    std::string profile = "reference";
    std::uint64_t seed = 0;
    sim::DatasetSpec dataset;
    prior::OracleConfig oracle;
    field::SdfNetConfig sdf;
    field::RadianceNetConfig radiance;
    fusion::LossConfig loss;
    EvalConfig eval;
    bool operator==(const RunConfig&) const = default;

    /// Copies the global seed into the per-stage specs.
    void propagate_seed();
};

/// Full-scale network sizes, batches and schedule.
RunConfig reference_profile();
/// Reduced networks and batches that train in minutes on one CPU core.
RunConfig desk_profile();
/// "reference" or "desk".
RunConfig profile_by_name(const std::string& name);

nlohmann::json to_json(const RunConfig& c);
/// Missing keys keep the values of `base`; unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j, const RunConfig& base);
RunConfig run_config_from_json(const nlohmann::json& j);

void save_run_config(const std::filesystem::path& dir, const RunConfig& c);
RunConfig load_run_config(const std::filesystem::path& file);

}  // namespace mvps::app
