// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mvps/prior/prior_maps.hpp"
#include "mvps/sim/render.hpp"

#include <json.hpp>

#include <filesystem>
#include <vector>

namespace mvps::io {

inline constexpr int kFormatVersion = 1;

/// Layout: view_%03d/light_%03d.pfm, view_%03d/{median.pfm, mask.pgm,
/// gt_depth.pfm, gt_normal.pfm}, cameras.json, meta.json.
std::filesystem::path view_dir(const std::filesystem::path& root, std::size_t view);

nlohmann::json dataset_spec_to_json(const sim::DatasetSpec& spec);
sim::DatasetSpec dataset_spec_from_json(const nlohmann::json& j);

void save_dataset(const std::filesystem::path& root, const sim::Dataset& ds);

struct LoadOptions {
    bool light_images = true;  // false skips the per-light stacks
};

/// Validates the layout; errors name the file and field or view index.
sim::Dataset load_dataset(const std::filesystem::path& root, const LoadOptions& opts = {});

void save_priors(const std::filesystem::path& root, const std::vector<prior::ViewPriors>& priors);
std::vector<prior::ViewPriors> load_priors(const std::filesystem::path& root, std::size_t views);
bool has_priors(const std::filesystem::path& root, std::size_t views);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace mvps::io
