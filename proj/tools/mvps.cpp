// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: simulate, priors, reconstruct, evaluate, ablate, profile.

#include "mvps/app/pipeline.hpp"
#include "mvps/common/error.hpp"
#include "mvps/io/dataset_io.hpp"
#include "mvps/mesh/profile.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace mvps;

namespace {

// Input directory that does not exist; reported with exit code 1.
struct MissingInput : Error {
    explicit MissingInput(const fs::path& p) : Error("input not found: " + p.string()) {}
};

void require_dir(const fs::path& p) {
    if (!fs::is_directory(p)) throw MissingInput(p);
}

void require_file(const fs::path& p) {
    if (!fs::is_regular_file(p)) throw MissingInput(p);
}

struct CommonOptions {
    std::string profile = "desk";
    std::optional<fs::path> config;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--profile", o.profile, "Base settings: desk or reference")
        ->check(CLI::IsMember({"desk", "reference"}))
        ->capture_default_str();
    cmd->add_option("--config", o.config, "JSON file merged over the profile");
    cmd->add_option("--seed", o.seed, "Global seed");
}

struct SceneOptions {
    std::optional<std::string> shape, brdf;
    std::optional<int> views, lights, width, height;
    std::optional<double> noise, specular, elevation;
    std::optional<bool> textured;
};

void add_scene(CLI::App* cmd, SceneOptions& o) {
    cmd->add_option("--shape", o.shape, "sphere or torus");
    cmd->add_option("--brdf", o.brdf, "lambertian, ward or anisotropic");
    cmd->add_option("--views", o.views, "Turntable views");
    cmd->add_option("--lights", o.lights, "Lights per view");
    cmd->add_option("--width", o.width, "Image width");
    cmd->add_option("--height", o.height, "Image height");
    cmd->add_option("--noise", o.noise, "Gaussian image noise std");
    cmd->add_option("--specular", o.specular, "Specular weight of glossy BRDFs");
    cmd->add_option("--elevation", o.elevation, "Camera elevation in degrees");
    cmd->add_option("--textured", o.textured, "Albedo texture on (1) or off (0)");
}

struct OracleOptions {
    std::optional<double> tau_mvs, tau_ps;
    std::optional<int> ensemble, hypotheses;
};

void add_oracle(CLI::App* cmd, OracleOptions& o) {
    cmd->add_option("--tau-mvs", o.tau_mvs, "MVS confidence threshold");
    cmd->add_option("--tau-ps", o.tau_ps, "PS variance threshold");
    cmd->add_option("--ensemble", o.ensemble, "PS ensemble size");
    cmd->add_option("--hypotheses", o.hypotheses, "MVS depth hypotheses");
}

struct LossOptions {
    std::optional<double> lambda_m, lambda_e, lr, lr_decay, density_lr_scale;
    std::optional<int> rays, epochs, eikonal, light, n_uniform, n_importance, checkpoint_interval;
    std::optional<std::string> ablation;
    std::optional<int> grid_res;
};

void add_loss(CLI::App* cmd, LossOptions& o, bool with_ablation) {
    cmd->add_option("--lambda-m", o.lambda_m, "Mask loss weight");
    cmd->add_option("--lambda-e", o.lambda_e, "Eikonal loss weight");
    cmd->add_option("--rays", o.rays, "Rays per view per epoch");
    cmd->add_option("--epochs", o.epochs, "Training epochs");
    cmd->add_option("--eikonal-samples", o.eikonal, "Uniform box samples for the eikonal term");
    cmd->add_option("--light", o.light, "Supervision light index (negative: seeded choice)");
    cmd->add_option("--n-uniform", o.n_uniform, "Stratified samples per ray");
    cmd->add_option("--n-importance", o.n_importance, "Importance samples per ray");
    cmd->add_option("--lr", o.lr, "Adam learning rate");
    cmd->add_option("--lr-decay", o.lr_decay, "Final learning rate relative to the first");
    cmd->add_option("--density-lr-scale", o.density_lr_scale, "Learning-rate multiplier for alpha and beta");
    cmd->add_option("--checkpoint-interval", o.checkpoint_interval, "Epochs between checkpoints");
    cmd->add_option("--grid-res", o.grid_res, "Marching-cubes resolution");
    if (with_ablation) cmd->add_option("--ablation", o.ablation, "full or a list of no_mvs,no_ps,no_render,no_uncertainty");
}

struct EvalOptions {
    std::optional<int> grid_res, samples;
    std::optional<double> tau_fraction;
};

void add_eval(CLI::App* cmd, EvalOptions& o) {
    cmd->add_option("--grid-res", o.grid_res, "Marching-cubes resolution for checkpoints");
    cmd->add_option("--samples", o.samples, "Surface samples per point set");
    cmd->add_option("--tau-fraction", o.tau_fraction, "F-score threshold as a fraction of the bounding diameter");
}

template <class T, class U>
void set_if(const std::optional<T>& v, U& dst) {
    if (v) dst = static_cast<U>(*v);
}

app::RunConfig base_config(const CommonOptions& c, const std::optional<fs::path>& data_dir) {
    app::RunConfig cfg = app::profile_by_name(c.profile);
    if (data_dir) {
        // Scene, oracle and seed carry over from the stage that produced the data.
        const fs::path prev = *data_dir / "run_config.json";
        if (fs::exists(prev)) {
            const app::RunConfig p = app::load_run_config(prev);
            cfg.seed = p.seed;
            cfg.dataset = p.dataset;
            cfg.oracle = p.oracle;
        } else {
            cfg.dataset = io::dataset_spec_from_json(io::read_json(*data_dir / "meta.json"));
            cfg.seed = cfg.dataset.seed;
        }
    }
    if (c.config) {
        require_file(*c.config);
        cfg = app::run_config_from_json(io::read_json(*c.config), cfg);
    }
    set_if(c.seed, cfg.seed);
    return cfg;
}

void apply(const SceneOptions& o, app::RunConfig& cfg) {
    auto& s = cfg.dataset;
    if (o.shape) s.scene.shape = sim::parse_shape(*o.shape);
    if (o.brdf) s.scene.brdf.kind = sim::parse_brdf(*o.brdf);
    set_if(o.views, s.rig.views);
    set_if(o.lights, s.rig.lights);
    set_if(o.width, s.rig.width);
    set_if(o.height, s.rig.height);
    set_if(o.noise, s.noise_std);
    set_if(o.specular, s.scene.brdf.specular);
    set_if(o.elevation, s.rig.elevation_deg);
    set_if(o.textured, s.scene.textured);
}

void apply(const OracleOptions& o, app::RunConfig& cfg) {
    set_if(o.tau_mvs, cfg.oracle.tau_mvs);
    set_if(o.tau_ps, cfg.oracle.tau_ps);
    set_if(o.ensemble, cfg.oracle.ps.ensemble);
    set_if(o.hypotheses, cfg.oracle.mvs.hypotheses);
}

void apply(const LossOptions& o, app::RunConfig& cfg) {
    auto& l = cfg.loss;
    set_if(o.lambda_m, l.lambda_m);
    set_if(o.lambda_e, l.lambda_e);
    set_if(o.rays, l.rays_per_view);
    set_if(o.epochs, l.epochs);
    set_if(o.eikonal, l.eikonal_global);
    set_if(o.light, l.light_index);
    set_if(o.n_uniform, l.sampling.n_uniform);
    set_if(o.n_importance, l.sampling.n_importance);
    set_if(o.lr, l.lr);
    set_if(o.lr_decay, l.lr_decay);
    set_if(o.density_lr_scale, l.density_lr_scale);
    set_if(o.checkpoint_interval, l.checkpoint_interval);
    set_if(o.grid_res, cfg.eval.grid_resolution);
    if (o.ablation) l.flags = fusion::parse_ablation(*o.ablation);
}

void apply(const EvalOptions& o, app::RunConfig& cfg) {
    set_if(o.grid_res, cfg.eval.grid_resolution);
    set_if(o.samples, cfg.eval.samples);
    set_if(o.tau_fraction, cfg.eval.tau_fraction);
}

mesh::Plane parse_plane(const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    for (std::string tok; std::getline(ss, tok, ',');) v.push_back(std::stod(tok));
    if (v.size() != 4) throw Error("plane must be nx,ny,nz,offset (got '" + s + "')");
    const mesh::Plane p{{v[0], v[1], v[2]}, v[3]};
    if (norm(p.normal) == 0.0) throw Error("plane normal must be non-zero");
    return p;
}

// Loads a dataset directory with its priors; the priors stage must have run.
struct LoadedData {
    sim::Dataset dataset;
    std::vector<prior::ViewPriors> priors;
};

LoadedData load_with_priors(const fs::path& dir) {
    LoadedData d;
    d.dataset = io::load_dataset(dir);
    const auto views = d.dataset.cameras.size();
    if (!io::has_priors(dir, views))
        throw Error(dir.string() + " has no priors; run 'mvps priors --data " + dir.string() + "' first");
    d.priors = io::load_priors(dir, views);
    return d;
}

void write_profile(const mesh::TriMesh& m, const mesh::Plane& plane, const fs::path& csv) {
    const auto curves = mesh::surface_profile(m, plane);
    if (curves.empty()) spdlog::warn("profile plane does not intersect the mesh; writing an empty profile");
    mesh::write_profile_csv(csv, curves, plane);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App cli{"Multi-view photometric stereo reconstruction with uncertainty-gated priors"};
    cli.require_subcommand(1);
    bool verbose = false;
    cli.add_flag("-v,--verbose", verbose, "Debug logging");

    // simulate
    CommonOptions sim_common;
    SceneOptions sim_scene;
    fs::path sim_out;
    auto* sim_cmd = cli.add_subcommand("simulate", "Render a synthetic multi-view photometric stereo dataset");
    add_common(sim_cmd, sim_common);
    add_scene(sim_cmd, sim_scene);
    sim_cmd->add_option("--out", sim_out, "Dataset directory")->required();

    // priors
    CommonOptions pri_common;
    OracleOptions pri_oracle;
    fs::path pri_data;
    auto* pri_cmd = cli.add_subcommand("priors", "Simulate MVS depth and PS normal priors with confidence gates");
    add_common(pri_cmd, pri_common);
    add_oracle(pri_cmd, pri_oracle);
    pri_cmd->add_option("--data", pri_data, "Dataset directory (priors are written into it)")->required();

    // reconstruct
    CommonOptions rec_common;
    LossOptions rec_loss;
    fs::path rec_data, rec_out;
    bool rec_resume = false;
    auto* rec_cmd = cli.add_subcommand("reconstruct", "Train the SDF and radiance fields and extract a mesh");
    add_common(rec_cmd, rec_common);
    add_loss(rec_cmd, rec_loss, true);
    rec_cmd->add_option("--data", rec_data, "Dataset directory with priors")->required();
    rec_cmd->add_option("--out", rec_out, "Run directory")->required();
    rec_cmd->add_flag("--resume", rec_resume, "Continue from checkpoint.bin in the run directory");

    // evaluate
    CommonOptions ev_common;
    EvalOptions ev_opts;
    fs::path ev_data, ev_out;
    std::vector<fs::path> ev_meshes;
    std::optional<fs::path> ev_ckpt;
    std::optional<std::string> ev_plane;
    auto* ev_cmd = cli.add_subcommand("evaluate", "Chamfer-L2 and F-score against the analytic scene");
    add_common(ev_cmd, ev_common);
    add_eval(ev_cmd, ev_opts);
    ev_cmd->add_option("--data", ev_data, "Dataset directory (scene definition)")->required();
    auto* mesh_opt = ev_cmd->add_option("--mesh", ev_meshes, "OBJ meshes to evaluate");
    auto* ckpt_opt = ev_cmd->add_option("--checkpoint", ev_ckpt, "Checkpoint to extract and evaluate");
    mesh_opt->excludes(ckpt_opt);
    ev_cmd->add_option("--out", ev_out, "Report directory")->required();
    ev_cmd->add_option("--profile-plane", ev_plane, "Also write profile.csv for plane nx,ny,nz,offset");

    // ablate
    CommonOptions ab_common;
    LossOptions ab_loss;
    EvalOptions ab_eval;
    fs::path ab_data, ab_out;
    std::vector<std::string> ab_flags;
    bool ab_tsdf = false;
    auto* ab_cmd = cli.add_subcommand("ablate", "Train loss variants and append their metrics to ablation.csv");
    add_common(ab_cmd, ab_common);
    add_loss(ab_cmd, ab_loss, false);
    ab_cmd->add_option("--samples", ab_eval.samples, "Surface samples per point set");
    ab_cmd->add_option("--tau-fraction", ab_eval.tau_fraction, "F-score threshold as a fraction of the diameter");
    ab_cmd->add_option("--data", ab_data, "Dataset directory with priors")->required();
    ab_cmd->add_option("--out", ab_out, "Directory holding ablation.csv and one run per variant")->required();
    ab_cmd->add_option("--flags", ab_flags, "Variants, e.g. full no_render no_mvs,no_ps (default: all single ablations)");
    ab_cmd->add_flag("--tsdf", ab_tsdf, "Also evaluate the TSDF fusion baseline");

    // profile
    fs::path pr_mesh, pr_out;
    std::string pr_plane;
    auto* pr_cmd = cli.add_subcommand("profile", "Cross-section of a mesh with a plane as arc length and height");
    pr_cmd->add_option("--mesh", pr_mesh, "OBJ mesh")->required();
    pr_cmd->add_option("--plane", pr_plane, "nx,ny,nz,offset")->required();
    pr_cmd->add_option("--out", pr_out, "Output CSV")->required();

    try {
        cli.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return cli.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return cli.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return cli.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "error: %s\n\n%s", e.what(), cli.help().c_str());
        return 2;
    }
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        if (sim_cmd->parsed()) {
            app::RunConfig cfg = base_config(sim_common, std::nullopt);
            apply(sim_scene, cfg);
            cfg.propagate_seed();
            const sim::Dataset ds = app::simulate(cfg);
            io::save_dataset(sim_out, ds);
            app::save_run_config(sim_out, cfg);
            spdlog::info("wrote {} views x {} lights to {}", ds.views.size(), ds.spec.rig.lights, sim_out.string());
        } else if (pri_cmd->parsed()) {
            require_dir(pri_data);
            app::RunConfig cfg = base_config(pri_common, pri_data);
            apply(pri_oracle, cfg);
            const sim::Dataset ds = io::load_dataset(pri_data);
            const auto priors = app::compute_priors(ds, cfg);
            io::save_priors(pri_data, priors);
            app::save_run_config(pri_data, cfg);
            std::size_t mask = 0, mvs = 0, ps = 0;
            for (std::size_t k = 0; k < priors.size(); ++k) {
                mask += ds.views[k].mask.count();
                mvs += priors[k].gate_mvs.count();
                ps += priors[k].gate_ps.count();
            }
            spdlog::info("gate coverage of the mask: mvs {:.3f}, ps {:.3f}", double(mvs) / std::max<std::size_t>(mask, 1),
                         double(ps) / std::max<std::size_t>(mask, 1));
        } else if (rec_cmd->parsed()) {
            require_dir(rec_data);
            if (rec_resume) require_dir(rec_out);
            app::RunConfig cfg = base_config(rec_common, rec_data);
            apply(rec_loss, cfg);
            cfg.propagate_seed();
            const LoadedData d = load_with_priors(rec_data);
            app::save_run_config(rec_out, cfg);
            const auto res = app::reconstruct(d.dataset, d.priors, cfg, rec_out, rec_resume);
            spdlog::info("trained {} epochs (supervision light {}); mesh has {} triangles",
                         res.outcome.epochs_done, res.light_index, res.mesh.triangles.size());
        } else if (ev_cmd->parsed()) {
            require_dir(ev_data);
            if (ev_meshes.empty() && !ev_ckpt) throw Error("evaluate needs --mesh or --checkpoint");
            app::RunConfig cfg = base_config(ev_common, ev_data);
            apply(ev_opts, cfg);
            const sim::SceneSpec scene = cfg.dataset.scene;
            app::save_run_config(ev_out, cfg);
            std::vector<std::pair<std::string, mesh::TriMesh>> meshes;
            if (ev_ckpt) {
                require_file(*ev_ckpt);
                const auto fields = field::load_checkpoint(*ev_ckpt);
                meshes.emplace_back(ev_ckpt->stem().string(),
                                    app::extract_mesh(fields->sdf, cfg, scene.bounding_radius));
                mesh::write_obj(ev_out / "mesh.obj", meshes.back().second);
            }
            for (const auto& p : ev_meshes) {
                require_file(p);
                meshes.emplace_back(p.stem().string(), mesh::read_obj(p));
            }
            std::string csv = std::string("# ") + mesh::kChamferConvention + "\n" + mesh::report_csv_header() + "\n";
            std::string text;
            for (const auto& [label, m] : meshes) {
                const auto r = app::evaluate(m, scene, cfg);
                csv += mesh::report_csv_row(label, r) + "\n";
                text += mesh::report_text(label, r);
                std::printf("%s", mesh::report_text(label, r).c_str());
            }
            io::write_text(ev_out / "report.csv", csv);
            io::write_text(ev_out / "report.txt", text);
            if (ev_plane) write_profile(meshes.front().second, parse_plane(*ev_plane), ev_out / "profile.csv");
        } else if (ab_cmd->parsed()) {
            require_dir(ab_data);
            app::RunConfig cfg = base_config(ab_common, ab_data);
            apply(ab_loss, cfg);
            apply(ab_eval, cfg);
            cfg.propagate_seed();
            if (ab_flags.empty()) ab_flags = {"full", "no_mvs", "no_ps", "no_render", "no_uncertainty"};
            const LoadedData d = load_with_priors(ab_data);
            const std::string scene = app::scene_label(d.dataset.spec.scene);
            app::save_run_config(ab_out, cfg);
            for (const auto& f : ab_flags) {
                app::RunConfig run = cfg;
                run.loss.flags = fusion::parse_ablation(f);
                const std::string name = fusion::ablation_name(run.loss.flags);
                const fs::path dir = ab_out / name;
                app::save_run_config(dir, run);
                spdlog::info("variant {}: training {} epochs", name, run.loss.epochs);
                const auto res = app::reconstruct(d.dataset, d.priors, run, dir);
                const auto r = app::evaluate(res.mesh, d.dataset.spec.scene, run);
                app::write_report(dir, name, r);
                app::append_ablation_row(ab_out, scene, name, r);
                std::printf("%s", mesh::report_text(name, r).c_str());
            }
            if (ab_tsdf) {
                const auto m = app::tsdf_baseline(d.dataset, d.priors, cfg);
                mesh::write_obj(ab_out / "tsdf" / "mesh.obj", m);
                const auto r = app::evaluate(m, d.dataset.spec.scene, cfg);
                app::write_report(ab_out / "tsdf", "tsdf", r);
                app::append_ablation_row(ab_out, scene, "tsdf", r);
                std::printf("%s", mesh::report_text("tsdf", r).c_str());
            }
        } else if (pr_cmd->parsed()) {
            require_file(pr_mesh);
            write_profile(mesh::read_obj(pr_mesh), parse_plane(pr_plane), pr_out);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
