// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#include "mvps/fusion/trainer.hpp"

#include "mvps/common/error.hpp"
#include "mvps/common/random.hpp"
#include "mvps/render/volume.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace mvps::fusion {

int pick_supervision_light(int requested, int lights, std::uint64_t seed) {
    if (lights <= 0) throw Error("dataset has no lights");
    if (requested >= lights) throw Error("supervision light " + std::to_string(requested) + " out of range");
    if (requested >= 0) return requested;
    Rng rng(derive_seed(seed, "render_light"));
    return static_cast<int>(std::uniform_int_distribution<int>(0, lights - 1)(rng));
}

TrainData build_train_data(const sim::Dataset& ds, const std::vector<prior::ViewPriors>& priors, int light_index) {
    if (priors.size() != ds.views.size()) throw Error("prior count does not match the view count");
    TrainData data;
    data.bounding_radius = ds.spec.rig.bounding_radius;
    data.light_index = light_index;
    for (std::size_t v = 0; v < ds.views.size(); ++v) {
        const auto& cam = ds.cameras[v];
        const auto& view = ds.views[v];
        const auto& p = priors[v];
        if (light_index < 0 || static_cast<std::size_t>(light_index) >= view.images.size())
            throw Error("view " + std::to_string(v) + ": supervision light image not loaded");
        const Image& img = view.images[static_cast<std::size_t>(light_index)];
        TrainView tv;
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x) {
                RayRecord r;
                r.ray = cam.pixel_ray(x, y);
                double tn, tf;
                if (!render::ray_bounds(r.ray, data.bounding_radius, tn, tf)) continue;
                r.color = {img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)};
                r.in_mask = view.mask.at(x, y) != 0;
                r.c_mvs = p.gate_mvs.at(x, y) != 0;
                r.c_ps = p.gate_ps.at(x, y) != 0;
                const double d = p.depth.at(x, y, 0);
                const Vec3 n{p.normal.at(x, y, 0), p.normal.at(x, y, 1), p.normal.at(x, y, 2)};
                r.prior_valid = r.in_mask && d > 0.0 && norm(n) > 0.5;
                if (r.prior_valid) {
                    r.mvs_point = cam.unproject(x + 0.5, y + 0.5, d);
                    r.ps_normal = normalized(n);
                }
                tv.pixels.push_back(r);
            }
        if (tv.pixels.empty()) throw Error("view " + std::to_string(v) + ": no pixel sees the bounding sphere");
        data.views.push_back(std::move(tv));
    }
    return data;
}

TrainBatch draw_batch(const TrainData& data, const LossConfig& cfg, int epoch, const field::SdfField& f) {
    TrainBatch b;
    const std::uint64_t root = derive_seed(cfg.seed, "train");
    std::vector<sim::Ray> rays;
    for (std::size_t v = 0; v < data.views.size(); ++v) {
        Rng rng(derive_seed(root, static_cast<std::uint64_t>(epoch), v));
        const auto& px = data.views[v].pixels;
        std::uniform_int_distribution<std::size_t> pick(0, px.size() - 1);
        for (int i = 0; i < cfg.rays_per_view; ++i) b.rays.push_back(px[pick(rng)]);
    }
    rays.reserve(b.rays.size());
    for (const auto& r : b.rays) rays.push_back(r.ray);
    Rng srng(derive_seed(root, static_cast<std::uint64_t>(epoch), 0x5a3d1e5ULL));
    b.samples = render::sample_rays(f, rays, data.bounding_radius, cfg.sampling, srng);
    b.global_points = Matrix(static_cast<std::size_t>(cfg.eikonal_global), 3);
    std::uniform_real_distribution<double> u(-data.bounding_radius, data.bounding_radius);
    for (double& x : b.global_points.flat()) x = u(srng);
    return b;
}

std::string train_log_header() { return "epoch,mvs,ps,render,mask,eikonal,total,beta,alpha"; }

std::string train_log_row(const EpochRecord& r) {
    std::ostringstream s;
    s.precision(17);
    s << r.epoch << ',' << r.loss.mvs << ',' << r.loss.ps << ',' << r.loss.render << ',' << r.loss.mask << ','
      << r.loss.eikonal << ',' << r.loss.total << ',' << r.beta << ',' << r.alpha;
    return s.str();
}

Trainer::Trainer(const TrainData& data, field::FieldPair& fields, const LossConfig& cfg)
    : data_(data), fields_(fields), cfg_(cfg), adam_(fields.params(), ad::AdamConfig{.lr = cfg.lr}) {
    const auto params = fields.params();
    for (std::size_t i = 0; i < params.size(); ++i)
        if (params[i]->name == "sdf.log_alpha" || params[i]->name == "sdf.log_beta")
            adam_.set_lr_scale(i, cfg.density_lr_scale);
}

LossValues Trainer::evaluate(int epoch) {
    const TrainBatch batch = draw_batch(data_, cfg_, epoch, fields_.sdf);
    Tape t;
    return values_of(total_loss(t, batch, fields_.sdf, fields_.radiance, cfg_));
}

double Trainer::learning_rate(int epoch) const {
    if (cfg_.epochs <= 1 || cfg_.lr_decay == 1.0) return cfg_.lr;
    return cfg_.lr * std::pow(cfg_.lr_decay, static_cast<double>(epoch) / (cfg_.epochs - 1));
}

EpochRecord Trainer::step(int epoch) {
    const TrainBatch batch = draw_batch(data_, cfg_, epoch, fields_.sdf);
    Tape t;
    const LossTerms terms = total_loss(t, batch, fields_.sdf, fields_.radiance, cfg_);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = values_of(terms);
    rec.beta = fields_.sdf.beta_value();
    rec.alpha = fields_.sdf.alpha_value();
    if (!std::isfinite(rec.loss.total)) throw NonFiniteError("non-finite loss at epoch " + std::to_string(epoch));
    t.backward(terms.total);
    adam_.set_lr(learning_rate(epoch));
    if (!adam_.step()) throw NonFiniteError("non-finite gradient at epoch " + std::to_string(epoch));
    return rec;
}

void Trainer::restore(const field::CheckpointState& state) {
    if (!state.adam) return;
    const auto& snap = *state.adam;
    if (snap.m.size() != adam_.first_moments().size() || snap.v.size() != adam_.second_moments().size())
        throw Error("checkpoint optimizer state does not match the networks");
    adam_.first_moments() = snap.m;
    adam_.second_moments() = snap.v;
    adam_.set_steps(snap.steps);
}

field::CheckpointState Trainer::state(int epochs_done) const {
    field::CheckpointState s;
    s.epoch = static_cast<std::uint64_t>(epochs_done);
    s.adam = field::AdamSnapshot{adam_.steps(), adam_.first_moments(), adam_.second_moments()};
    return s;
}

TrainOutcome Trainer::run(const std::filesystem::path& out_dir, int start_epoch,
                          const std::function<void(const EpochRecord&)>& on_epoch) {
    std::filesystem::create_directories(out_dir);
    const auto log_path = out_dir / "train_log.csv";
    const auto ckpt_path = out_dir / "checkpoint.bin";
    const bool append = start_epoch > 0 && std::filesystem::exists(log_path);
    if (append) {
        // Rows past the checkpoint were written by the interrupted run; drop them.
        std::ifstream in(log_path);
        std::vector<std::string> keep;
        for (std::string line; std::getline(in, line);)
            if (keep.empty() || std::stoi(line.substr(0, line.find(','))) < start_epoch) keep.push_back(line);
        in.close();
        std::ofstream rewrite(log_path, std::ios::trunc);
        for (const auto& line : keep) rewrite << line << '\n';
    }
    std::ofstream log(log_path, append ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError(log_path, "cannot open for writing");
    if (!append) log << train_log_header() << '\n';

    TrainOutcome out;
    out.epochs_done = start_epoch;
    for (int e = start_epoch; e < cfg_.epochs; ++e) {
        EpochRecord rec;
        try {
            rec = step(e);
        } catch (const NonFiniteError& err) {
            out.aborted = true;
            out.message = err.what();
            spdlog::error("training aborted at epoch {}: {}", e, out.message);
            save_checkpoint(ckpt_path, fields_, state(e));
            return out;
        }
        log << train_log_row(rec) << '\n';
        out.log.push_back(rec);
        out.epochs_done = e + 1;
        if (on_epoch) on_epoch(rec);
        if (cfg_.checkpoint_interval > 0 && (e + 1) % cfg_.checkpoint_interval == 0 && e + 1 < cfg_.epochs) {
            log.flush();
            save_checkpoint(ckpt_path, fields_, state(e + 1));
        }
    }
    save_checkpoint(ckpt_path, fields_, state(out.epochs_done));
    return out;
}

}  // namespace mvps::fusion
