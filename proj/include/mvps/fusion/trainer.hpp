// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mvps/field/networks.hpp"
#include "mvps/fusion/loss.hpp"
#include "mvps/prior/prior_maps.hpp"
#include "mvps/sim/render.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mvps::fusion {

/// Pixels of one view whose rays cross the bounding sphere.
struct TrainView {
    std::vector<RayRecord> pixels;
};

struct TrainData {
    std::vector<TrainView> views;
    double bounding_radius = 1.0;
    int light_index = 0;
};

/// Resolves a negative request to a seeded uniform choice in [0, lights).
int pick_supervision_light(int requested, int lights, std::uint64_t seed);

/// Requires the per-light images of the chosen light.
TrainData build_train_data(const sim::Dataset& ds, const std::vector<prior::ViewPriors>& priors, int light_index);

/// Rays, samples and eikonal points for one epoch; depends only on
/// (seed, epoch) and the current field.
TrainBatch draw_batch(const TrainData& data, const LossConfig& cfg, int epoch, const field::SdfField& f);

struct EpochRecord {
    int epoch = 0;
    LossValues loss;
    double beta = 0.0;
    double alpha = 0.0;
};

std::string train_log_header();
std::string train_log_row(const EpochRecord& r);

struct TrainOutcome {
    bool aborted = false;
    std::string message;
    int epochs_done = 0;  // completed epochs, counting from zero
    std::vector<EpochRecord> log;
};

class Trainer {
public:
    Trainer(const TrainData& data, field::FieldPair& fields, const LossConfig& cfg);

    /// One optimizer step on the batch of `epoch`. Throws NonFiniteError when
    /// the loss or its gradient is not finite; parameters are then untouched.
    EpochRecord step(int epoch);
    /// Loss of the batch of `epoch` without updating anything.
    LossValues evaluate(int epoch);

    double learning_rate(int epoch) const;

    void restore(const field::CheckpointState& state);
    field::CheckpointState state(int epochs_done) const;
    ad::Adam& optimizer() noexcept { return adam_; }

    /// Runs epochs [start, cfg.epochs). Writes train_log.csv (on resume, rows
    /// from start onward are replaced) and checkpoint.bin every checkpoint_interval epochs and at the
    /// end. On a non-finite loss it stops, keeps the last good parameters in
    /// checkpoint.bin and reports aborted.
    TrainOutcome run(const std::filesystem::path& out_dir, int start_epoch = 0,
                     const std::function<void(const EpochRecord&)>& on_epoch = {});

private:
    const TrainData& data_;
    field::FieldPair& fields_;
    LossConfig cfg_;
    ad::Adam adam_;
};

}  // namespace mvps::fusion
