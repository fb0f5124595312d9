// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mvps/app/config.hpp"
#include "mvps/fusion/trainer.hpp"
#include "mvps/mesh/mesh.hpp"
#include "mvps/mesh/metrics.hpp"
#include "mvps/mesh/tsdf.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace mvps::app {

/// Renders the dataset of `cfg` (after seed propagation).
sim::Dataset simulate(const RunConfig& cfg);

std::vector<prior::ViewPriors> compute_priors(const sim::Dataset& ds, const RunConfig& cfg);

struct ReconstructResult {
    std::unique_ptr<field::FieldPair> fields;
    fusion::TrainOutcome outcome;
    mesh::TriMesh mesh;
    int light_index = 0;
};

/// Trains into out_dir (train_log.csv, checkpoint.bin) and extracts mesh.obj.
/// With resume, continues from out_dir/checkpoint.bin when it exists.
ReconstructResult reconstruct(const sim::Dataset& ds, const std::vector<prior::ViewPriors>& priors,
                              const RunConfig& cfg, const std::filesystem::path& out_dir, bool resume = false,
                              const std::function<void(const fusion::EpochRecord&)>& on_epoch = {});

mesh::TriMesh extract_mesh(const field::SdfField& f, const RunConfig& cfg, double bounding_radius);

/// Confidence-weighted TSDF fusion of the MVS depth priors.
mesh::TriMesh tsdf_baseline(const sim::Dataset& ds, const std::vector<prior::ViewPriors>& priors,
                            const RunConfig& cfg);

/// Metrics against analytic samples of the dataset scene, seeded from the run seed.
mesh::EvalReport evaluate(const mesh::TriMesh& m, const sim::SceneSpec& scene, const RunConfig& cfg);

/// report.csv and report.txt in dir.
void write_report(const std::filesystem::path& dir, const std::string& label, const mesh::EvalReport& r);

/// Appends one row to ablation.csv in dir, writing the header on first use.
void append_ablation_row(const std::filesystem::path& dir, const std::string& scene, const std::string& variant,
                         const mesh::EvalReport& r);

/// Short scene label such as "sphere-lambertian".
std::string scene_label(const sim::SceneSpec& s);

}  // namespace mvps::app
