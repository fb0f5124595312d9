// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#include "mvps/app/pipeline.hpp"

#include "mvps/common/error.hpp"
#include "mvps/common/random.hpp"
#include "mvps/io/dataset_io.hpp"
#include "mvps/mesh/marching_cubes.hpp"

#include <spdlog/spdlog.h>

#include <fstream>

namespace mvps::app {

namespace fs = std::filesystem;

sim::Dataset simulate(const RunConfig& cfg) {
    RunConfig c = cfg;
    c.propagate_seed();
    return sim::render_dataset(c.dataset);
}

std::vector<prior::ViewPriors> compute_priors(const sim::Dataset& ds, const RunConfig& cfg) {
    return prior::simulate_priors(ds, cfg.oracle, cfg.seed);
}

mesh::TriMesh extract_mesh(const field::SdfField& f, const RunConfig& cfg, double bounding_radius) {
    return mesh::marching_cubes(f, mesh::grid_around_sphere(bounding_radius, cfg.eval.grid_resolution));
}

ReconstructResult reconstruct(const sim::Dataset& ds, const std::vector<prior::ViewPriors>& priors,
                              const RunConfig& cfg, const fs::path& out_dir, bool resume,
                              const std::function<void(const fusion::EpochRecord&)>& on_epoch) {
    fusion::LossConfig loss = cfg.loss;
    loss.seed = cfg.seed;
    ReconstructResult res;
    res.light_index = fusion::pick_supervision_light(loss.light_index, ds.spec.rig.lights, cfg.seed);
    loss.light_index = res.light_index;
    const fusion::TrainData data = fusion::build_train_data(ds, priors, res.light_index);

    const fs::path ckpt = out_dir / "checkpoint.bin";
    int start = 0;
    field::CheckpointState state;
    if (resume && fs::exists(ckpt)) {
        res.fields = field::load_checkpoint(ckpt, &state);
        start = static_cast<int>(state.epoch);
        spdlog::info("resuming from {} at epoch {}", ckpt.string(), start);
    } else {
        res.fields = std::make_unique<field::FieldPair>(cfg.sdf, cfg.radiance, cfg.seed);
    }

    fusion::Trainer trainer(data, *res.fields, loss);
    if (start > 0) trainer.restore(state);
    res.outcome = trainer.run(out_dir, start, on_epoch);
    if (res.outcome.aborted) throw NonFiniteError("training aborted: " + res.outcome.message);

    res.mesh = extract_mesh(res.fields->sdf, cfg, ds.spec.scene.bounding_radius);
    mesh::write_obj(out_dir / "mesh.obj", res.mesh);
    return res;
}

mesh::TriMesh tsdf_baseline(const sim::Dataset& ds, const std::vector<prior::ViewPriors>& priors,
                            const RunConfig& cfg) {
    if (priors.size() != ds.cameras.size()) throw Error("prior count does not match the view count");
    std::vector<mesh::DepthObservation> obs;
    for (std::size_t k = 0; k < priors.size(); ++k) {
        mesh::DepthObservation o;
        o.camera = ds.cameras[k];
        o.depth = priors[k].depth;
        o.weight = priors[k].confidence;
        // Depth priors exist only inside the object mask.
        for (int y = 0; y < o.depth.height; ++y)
            for (int x = 0; x < o.depth.width; ++x)
                if (!ds.views[k].mask.at(x, y)) o.depth.at(x, y) = 0.0f;
        obs.push_back(std::move(o));
    }
    mesh::TsdfConfig tc;
    tc.grid = mesh::grid_around_sphere(ds.spec.scene.bounding_radius, cfg.eval.tsdf_resolution);
    tc.truncation = cfg.eval.tsdf_truncation;
    return mesh::tsdf_fuse(obs, tc);
}

mesh::EvalReport evaluate(const mesh::TriMesh& m, const sim::SceneSpec& scene, const RunConfig& cfg) {
    return mesh::evaluate_mesh(m, scene, cfg.eval.samples, cfg.eval.tau(scene.bounding_radius),
                               derive_seed(cfg.seed, "evaluate"));
}

void write_report(const fs::path& dir, const std::string& label, const mesh::EvalReport& r) {
    fs::create_directories(dir);
    io::write_text(dir / "report.csv", std::string("# ") + mesh::kChamferConvention + "\n" +
                                           mesh::report_csv_header() + "\n" + mesh::report_csv_row(label, r) + "\n");
    io::write_text(dir / "report.txt", mesh::report_text(label, r));
}

void append_ablation_row(const fs::path& dir, const std::string& scene, const std::string& variant,
                         const mesh::EvalReport& r) {
    fs::create_directories(dir);
    const fs::path path = dir / "ablation.csv";
    const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
    std::ofstream out(path, std::ios::app);
    if (!out) throw IoError(path, "cannot open for appending");
    if (fresh) out << "scene," << mesh::report_csv_header() << '\n';
    out << scene << ',' << mesh::report_csv_row(variant, r) << '\n';
}

std::string scene_label(const sim::SceneSpec& s) {
    return std::string(sim::shape_name(s.shape)) + "-" + std::string(sim::brdf_name(s.brdf.kind));
}

}  // namespace mvps::app
