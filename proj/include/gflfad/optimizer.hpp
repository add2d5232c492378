// Copyright 2026 gflfad contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "gflfad/nn.hpp"

// AdamW with decoupled weight decay applied before the moment update, and the
// cosine annealing schedule. Per-element arithmetic runs in double regardless
// of the storage type, in a fixed order, so runs are bit-reproducible.

namespace gfl {

inline double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_peak,
                        double lr_min = 0.0) {
    if (total_steps <= 0) throw std::invalid_argument("cosine_lr: total_steps must be positive");
    if (step < 0 || step > total_steps) {
        throw std::invalid_argument("cosine_lr: step " + std::to_string(step) +
                                    " outside [0, " + std::to_string(total_steps) + "]");
    }
    const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
    return lr_min + 0.5 * (lr_peak - lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

// One bias-corrected AdamW update; t is the 1-based step count after this
// update. Decay first (p -= lr*wd*p), then the Adam step.
template <typename T>
void adamw_update(std::vector<T>& p, const std::vector<T>& g, std::vector<T>& m, std::vector<T>& v,
                  std::int64_t t, double lr, double beta1, double beta2, double eps,
                  double weight_decay) {
    if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size()) {
        throw std::invalid_argument("adamw_update: parameter/gradient/moment sizes differ");
    }
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < p.size(); ++i) {
        double pi = static_cast<double>(p[i]);
        const double gi = static_cast<double>(g[i]);
        pi -= lr * weight_decay * pi;
        const double mi = beta1 * static_cast<double>(m[i]) + (1.0 - beta1) * gi;
        const double vi = beta2 * static_cast<double>(v[i]) + (1.0 - beta2) * gi * gi;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double m_hat = mi / bc1;
        const double v_hat = vi / bc2;
        pi -= lr * m_hat / (std::sqrt(v_hat) + eps);
        p[i] = static_cast<T>(pi);
    }
}

template <typename T>
class AdamW {
public:
    AdamW() = default;

    AdamW(std::vector<nn::ParamRef<T>> params, double beta1 = 0.9, double beta2 = 0.999,
          double eps = 1e-8, double weight_decay = 0.01)
        : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps), wd_(weight_decay) {
        m_.resize(params_.size());
        v_.resize(params_.size());
        frozen_.assign(params_.size(), false);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            m_[i].assign(params_[i].tensor.numel(), T(0));
            v_[i].assign(params_[i].tensor.numel(), T(0));
        }
    }

    // Frozen parameters are skipped entirely (no update, no weight decay).
    void set_frozen(std::vector<bool> frozen) {
        if (frozen.size() != params_.size()) {
            throw std::invalid_argument("AdamW: frozen mask size mismatch");
        }
        frozen_ = std::move(frozen);
    }

    void zero_grad() {
        for (auto& p : params_) {
            auto t = p.tensor;
            t.zero_grad();
        }
    }

    void step(double lr) {
        ++t_;
        for (std::size_t i = 0; i < params_.size(); ++i) {
            if (frozen_[i]) continue;
            auto tensor = params_[i].tensor;
            adamw_update<T>(tensor.data(), tensor.grad(), m_[i], v_[i], t_, lr, beta1_, beta2_,
                            eps_, wd_);
        }
    }

    std::size_t size() const { return params_.size(); }
    const std::vector<nn::ParamRef<T>>& params() const { return params_; }
    std::int64_t step_count() const { return t_; }
    void set_step_count(std::int64_t t) { t_ = t; }
    std::vector<T>& moment1(std::size_t i) { return m_[i]; }
    std::vector<T>& moment2(std::size_t i) { return v_[i]; }
    const std::vector<T>& moment1(std::size_t i) const { return m_[i]; }
    const std::vector<T>& moment2(std::size_t i) const { return v_[i]; }

private:
    std::vector<nn::ParamRef<T>> params_;
    std::vector<std::vector<T>> m_, v_;
    std::vector<bool> frozen_;
    std::int64_t t_ = 0;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8, wd_ = 0.01;
};

}  // namespace gfl
