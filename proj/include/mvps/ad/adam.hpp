// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mvps/ad/tape.hpp"

#include <cstdint>
#include <vector>

namespace mvps::ad {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers start at zero (t = 0).
class Adam {
public:
    Adam(std::vector<Param*> params, AdamConfig config);

    /// Applies one update in place. Returns false and leaves every parameter
    /// untouched when any gradient entry is non-finite.
    bool step();

    std::int64_t steps() const noexcept { return t_; }
    const AdamConfig& config() const noexcept { return config_; }
    void set_lr(double lr) noexcept { config_.lr = lr; }
    /// Per-parameter multiplier on the learning rate (default 1).
    void set_lr_scale(std::size_t param, double scale) { lr_scale_.at(param) = scale; }

    // Optimizer state, exposed for checkpointing.
    std::vector<Matrix>& first_moments() noexcept { return m_; }
    std::vector<Matrix>& second_moments() noexcept { return v_; }
    const std::vector<Matrix>& first_moments() const noexcept { return m_; }
    const std::vector<Matrix>& second_moments() const noexcept { return v_; }
    void set_steps(std::int64_t t) noexcept { t_ = t; }

private:
    std::vector<Param*> params_;
    AdamConfig config_;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
    std::vector<double> lr_scale_;
    std::int64_t t_ = 0;
};

}  // namespace mvps::ad
