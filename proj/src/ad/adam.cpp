// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#include "mvps/ad/adam.hpp"

#include <spdlog/spdlog.h>

#include <cmath>

namespace mvps::ad {

Adam::Adam(std::vector<Param*> params, AdamConfig config)
    : params_(std::move(params)), config_(config), lr_scale_(params_.size(), 1.0) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Param* p : params_) {
        m_.emplace_back(p->value.rows(), p->value.cols());
        v_.emplace_back(p->value.rows(), p->value.cols());
    }
}

bool Adam::step() {
    for (const Param* p : params_)
        for (double g : p->grad.flat())
            if (!std::isfinite(g)) {
                spdlog::warn("adam: non-finite gradient in '{}', update skipped", p->name);
                return false;
            }

    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Param& p = *params_[k];
        Matrix& m = m_[k];
        Matrix& v = v_[k];
        const double lr = config_.lr * lr_scale_[k];
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            p.value[i] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
    }
    return true;
}

}  // namespace mvps::ad
