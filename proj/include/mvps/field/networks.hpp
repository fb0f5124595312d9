// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mvps/ad/adam.hpp"
#include "mvps/field/fields.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mvps::field {

struct SdfNetConfig {
    int hidden_layers = 8;
    int width = 256;
    std::vector<int> skip_layers{4};  // linear layers whose input is concat(h, encoding) / sqrt(2)
    int feature_dim = 256;
    double softplus_beta = 100.0;
    int octaves = 6;
    double init_radius = 0.6;  // zero level set of the geometric initialization
    double beta_init = 0.1;    // Laplace scale; alpha starts at 1 / beta
    int init_fit_steps = 0;    // optional regression onto |x| - init_radius after the geometric init
    bool operator==(const SdfNetConfig&) const = default;
};

struct RadianceNetConfig {
    int hidden_layers = 4;
    int width = 256;
    int pos_octaves = 6;
    int dir_octaves = 4;
    bool operator==(const RadianceNetConfig&) const = default;
};

/// MLP signed-distance field with softplus activations and a geometric
/// (approximate sphere) initialization. Each layer propagates both its value
/// and its input Jacobian, so the spatial gradient is an ordinary tape result.
class SdfNet final : public SdfField {
public:
    SdfNet(const SdfNetConfig& cfg, std::uint64_t seed);

    SdfEval eval(Tape& t, const Matrix& pts, bool with_grad) const override;
    Var alpha(Tape& t) const override;
    Var beta(Tape& t) const override;
    std::size_t feature_dim() const override { return static_cast<std::size_t>(cfg_.feature_dim); }
    std::vector<double> values(const Matrix& pts) const override;

    double alpha_value() const;
    double beta_value() const;
    const SdfNetConfig& config() const noexcept { return cfg_; }
    std::vector<ad::Param*> params();
    std::vector<const ad::Param*> params() const;
    /// Linear layer l as (weight, bias); weights are (in x out).
    ad::Param& weight(std::size_t l) { return weights_[l]; }
    ad::Param& bias(std::size_t l) { return biases_[l]; }
    std::size_t linear_layers() const noexcept { return weights_.size(); }
    std::size_t layer_input_dim(std::size_t l) const { return weights_[l].value.rows(); }
    bool is_skip(std::size_t l) const;

private:
    void fit_sphere(std::uint64_t seed);
    SdfEval forward(Tape& t, const Matrix& pts, bool with_grad, bool trainable) const;

    SdfNetConfig cfg_;
    std::vector<ad::Param> weights_;
    std::vector<ad::Param> biases_;
    ad::Param log_alpha_;
    ad::Param log_beta_;
};

/// ReLU MLP with sigmoid output over [enc(x), n, enc(v), z].
class RadianceNet final : public RadianceField {
public:
    RadianceNet(const RadianceNetConfig& cfg, std::size_t feature_dim, std::uint64_t seed);

    Var eval(Tape& t, const Matrix& pts, Var normals, const Matrix& view_dirs, Var feature) const override;

    const RadianceNetConfig& config() const noexcept { return cfg_; }
    std::size_t input_dim() const;
    std::vector<ad::Param*> params();
    std::vector<const ad::Param*> params() const;

private:
    RadianceNetConfig cfg_;
    std::size_t feature_dim_;
    std::vector<ad::Param> weights_;
    std::vector<ad::Param> biases_;
};

struct FieldPair {
    FieldPair(const SdfNetConfig& sdf_cfg, const RadianceNetConfig& rad_cfg, std::uint64_t seed);

    SdfNet sdf;
    RadianceNet radiance;

    std::vector<ad::Param*> params();
};

nlohmann::json to_json(const SdfNetConfig& c);
nlohmann::json to_json(const RadianceNetConfig& c);
SdfNetConfig sdf_config_from_json(const nlohmann::json& j);
RadianceNetConfig radiance_config_from_json(const nlohmann::json& j);

struct AdamSnapshot {
    std::int64_t steps = 0;
    std::vector<ad::Matrix> m;
    std::vector<ad::Matrix> v;
};

struct CheckpointState {
    std::uint64_t epoch = 0;
    std::optional<AdamSnapshot> adam;  // ordered like FieldPair::params()
};

/// Binary layout (little-endian):
///   "MVPSCKPT" | u32 version | u64 epoch | u64 len + JSON architecture |
///   u64 tensor count | per tensor: u64 name len, name, u64 rows, u64 cols, f64[rows*cols] |
///   f64 alpha | f64 beta | u8 has_adam [u64 steps | per tensor: f64 m[], f64 v[]]
void save_checkpoint(const std::filesystem::path& path, FieldPair& fields, const CheckpointState& state);
/// Rebuilds the networks from the stored architecture.
std::unique_ptr<FieldPair> load_checkpoint(const std::filesystem::path& path, CheckpointState* state = nullptr);

}  // namespace mvps::field
