// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#include "mvps/app/config.hpp"

#include "mvps/common/error.hpp"
#include "mvps/io/dataset_io.hpp"
#include "mvps/mesh/metrics.hpp"

namespace mvps::app {

using nlohmann::json;

void RunConfig::propagate_seed() {
    dataset.seed = seed;
    loss.seed = seed;
}

RunConfig reference_profile() {
    RunConfig c;
    c.profile = "reference";
    c.radiance = field::RadianceNetConfig{};
    c.loss.epochs = 10000;
    c.loss.rays_per_view = 1024;
    c.loss.sampling = {48, 16};
    return c;
}

RunConfig desk_profile() {
    RunConfig c;
    c.profile = "desk";
    c.sdf.hidden_layers = 3;
    c.sdf.width = 32;
    c.sdf.skip_layers = {};
    c.sdf.feature_dim = 16;
    c.sdf.init_fit_steps = 300;
    c.radiance.hidden_layers = 2;
    c.radiance.width = 32;
    c.loss.epochs = 2000;
    c.loss.rays_per_view = 16;
    c.loss.sampling = {16, 8};
    c.loss.eikonal_global = 128;
    c.loss.lr = 2e-3;
    c.loss.lr_decay = 0.05;
    c.loss.density_lr_scale = 10.0;
    c.eval.grid_resolution = 128;
    return c;
}

RunConfig profile_by_name(const std::string& name) {
    if (name == "reference") return reference_profile();
    if (name == "desk") return desk_profile();
    throw Error("unknown profile '" + name + "' (expected reference or desk)");
}

namespace {

json oracle_json(const prior::OracleConfig& o) {
    return {{"tau_mvs", o.tau_mvs},
            {"tau_ps", o.tau_ps},
            {"mvs",
             {{"hypotheses", o.mvs.hypotheses},
              {"step", o.mvs.step},
              {"sharpness", o.mvs.sharpness},
              {"peak_noise", o.mvs.peak_noise},
              {"max_shift", o.mvs.max_shift},
              {"window", o.mvs.window},
              {"texture_var_ref", o.mvs.texture_var_ref},
              {"glossy_flatness", o.mvs.glossy_flatness}}},
            {"ps",
             {{"ensemble", o.ps.ensemble},
              {"drop_probability", o.ps.drop_probability},
              {"base_noise", o.ps.base_noise},
              {"residual_gain", o.ps.residual_gain},
              {"shadow_threshold", o.ps.shadow_threshold}}}};
}

prior::OracleConfig oracle_from(const json& j) {
    prior::OracleConfig o;
    o.tau_mvs = j.at("tau_mvs").get<double>();
    o.tau_ps = j.at("tau_ps").get<double>();
    const json& m = j.at("mvs");
    o.mvs.hypotheses = m.at("hypotheses").get<int>();
    o.mvs.step = m.at("step").get<double>();
    o.mvs.sharpness = m.at("sharpness").get<double>();
    o.mvs.peak_noise = m.at("peak_noise").get<double>();
    o.mvs.max_shift = m.at("max_shift").get<int>();
    o.mvs.window = m.at("window").get<int>();
    o.mvs.texture_var_ref = m.at("texture_var_ref").get<double>();
    o.mvs.glossy_flatness = m.at("glossy_flatness").get<double>();
    const json& p = j.at("ps");
    o.ps.ensemble = p.at("ensemble").get<int>();
    o.ps.drop_probability = p.at("drop_probability").get<double>();
    o.ps.base_noise = p.at("base_noise").get<double>();
    o.ps.residual_gain = p.at("residual_gain").get<double>();
    o.ps.shadow_threshold = p.at("shadow_threshold").get<double>();
    return o;
}

json loss_json(const fusion::LossConfig& l) {
    return {{"lambda_m", l.lambda_m},
            {"lambda_e", l.lambda_e},
            {"rays_per_view", l.rays_per_view},
            {"epochs", l.epochs},
            {"eikonal_global", l.eikonal_global},
            {"ablation", fusion::ablation_name(l.flags)},
            {"light_index", l.light_index},
            {"seed", l.seed},
            {"n_uniform", l.sampling.n_uniform},
            {"n_importance", l.sampling.n_importance},
            {"lr", l.lr},
            {"lr_decay", l.lr_decay},
            {"density_lr_scale", l.density_lr_scale},
            {"checkpoint_interval", l.checkpoint_interval},
            {"opacity_eps", l.opacity_eps},
            {"color_error", "l1_sum_over_channels"},
            {"normal_error", "euclidean"}};
}

fusion::LossConfig loss_from(const json& j) {
    fusion::LossConfig l;
    l.lambda_m = j.at("lambda_m").get<double>();
    l.lambda_e = j.at("lambda_e").get<double>();
    l.rays_per_view = j.at("rays_per_view").get<int>();
    l.epochs = j.at("epochs").get<int>();
    l.eikonal_global = j.at("eikonal_global").get<int>();
    l.flags = fusion::parse_ablation(j.at("ablation").get<std::string>());
    l.light_index = j.at("light_index").get<int>();
    l.seed = j.at("seed").get<std::uint64_t>();
    l.sampling.n_uniform = j.at("n_uniform").get<int>();
    l.sampling.n_importance = j.at("n_importance").get<int>();
    l.lr = j.at("lr").get<double>();
    l.lr_decay = j.at("lr_decay").get<double>();
    l.density_lr_scale = j.at("density_lr_scale").get<double>();
    l.checkpoint_interval = j.at("checkpoint_interval").get<int>();
    l.opacity_eps = j.at("opacity_eps").get<double>();
    if (j.at("color_error") != "l1_sum_over_channels" || j.at("normal_error") != "euclidean")
        throw Error("loss conventions are fixed: color_error l1_sum_over_channels, normal_error euclidean");
    return l;
}

json eval_json(const EvalConfig& e) {
    return {{"grid_resolution", e.grid_resolution},
            {"tau_fraction", e.tau_fraction},
            {"samples", e.samples},
            {"tsdf_resolution", e.tsdf_resolution},
            {"tsdf_truncation", e.tsdf_truncation}};
}

EvalConfig eval_from(const json& j) {
    EvalConfig e;
    e.grid_resolution = j.at("grid_resolution").get<int>();
    e.tau_fraction = j.at("tau_fraction").get<double>();
    e.samples = j.at("samples").get<std::size_t>();
    e.tsdf_resolution = j.at("tsdf_resolution").get<int>();
    e.tsdf_truncation = j.at("tsdf_truncation").get<double>();
    return e;
}

// Every key of `patch` must exist in `base`, recursively through objects.
void check_known_keys(const json& base, const json& patch, const std::string& where) {
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        const std::string path = where.empty() ? it.key() : where + "." + it.key();
        if (!base.contains(it.key())) throw Error("unknown configuration key '" + path + "'");
        if (it->is_object() && base.at(it.key()).is_object()) check_known_keys(base.at(it.key()), *it, path);
    }
}

}  // namespace

json to_json(const RunConfig& c) {
    return {{"format_version", io::kFormatVersion},
            {"profile", c.profile},
            {"seed", c.seed},
            {"dataset", io::dataset_spec_to_json(c.dataset)},
            {"oracle", oracle_json(c.oracle)},
            {"sdf", field::to_json(c.sdf)},
            {"radiance", field::to_json(c.radiance)},
            {"loss", loss_json(c.loss)},
            {"eval", eval_json(c.eval)},
            {"chamfer_convention", mesh::kChamferConvention}};
}

RunConfig run_config_from_json(const json& j, const RunConfig& base) {
    if (!j.is_object()) throw Error("run configuration must be a JSON object");
    json merged = to_json(base);
    check_known_keys(merged, j, "");
    merged.merge_patch(j);
    try {
        RunConfig c;
        c.profile = merged.at("profile").get<std::string>();
        c.seed = merged.at("seed").get<std::uint64_t>();
        c.dataset = io::dataset_spec_from_json(merged.at("dataset"));
        c.oracle = oracle_from(merged.at("oracle"));
        c.sdf = field::sdf_config_from_json(merged.at("sdf"));
        c.radiance = field::radiance_config_from_json(merged.at("radiance"));
        c.loss = loss_from(merged.at("loss"));
        c.eval = eval_from(merged.at("eval"));
        return c;
    } catch (const json::exception& e) {
        throw Error(std::string("invalid run configuration: ") + e.what());
    }
}

RunConfig run_config_from_json(const json& j) {
    const std::string profile = j.is_object() && j.contains("profile") ? j.at("profile").get<std::string>() : "reference";
    return run_config_from_json(j, profile_by_name(profile));
}

void save_run_config(const std::filesystem::path& dir, const RunConfig& c) {
    std::filesystem::create_directories(dir);
    io::write_json(dir / "run_config.json", to_json(c));
}

RunConfig load_run_config(const std::filesystem::path& file) {
    try {
        return run_config_from_json(io::read_json(file));
    } catch (const IoError&) {
        throw;
    } catch (const Error& e) {
        throw IoError(file, e.what());
    }
}

}  // namespace mvps::app
