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

#include <string>
#include <vector>

#include "gflfad/nn.hpp"
#include "gflfad/rng.hpp"
#include "gflfad/tensor.hpp"

// Pooled two-class head: mean over token rows, layer norm, then a 2-layer MLP
// with a 2 * d hidden width. Column 1 is the genuine class, column 0 spoof;
// the detection score is logit(genuine) - logit(spoof).

namespace gfl {

template <typename T>
class ClassifierHead {
public:
    ClassifierHead() = default;

    ClassifierHead(std::size_t in_dim, Rng& rng)
        : ln_(in_dim), fc1_(in_dim, 2 * in_dim, rng), fc2_(2 * in_dim, 2, rng) {}

    // fused: [rows x in_dim] for one sample; returns [1 x 2] logits.
    ad::Tensor<T> forward(ad::Tape<T>& tape, const ad::Tensor<T>& fused) const {
        const std::size_t rows = fused.rows();
        if (rows == 0) throw std::invalid_argument("classifier: empty token sequence");
        auto pool_weights =
            ad::Tensor<T>::full({1, rows}, T(1) / static_cast<T>(rows));
        auto pooled = tape.matmul(pool_weights, fused);
        auto h = tape.gelu(fc1_.forward(tape, ln_.forward(tape, pooled)));
        return fc2_.forward(tape, h);
    }

    void collect(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) const {
        ln_.collect(prefix + ".ln", out);
        fc1_.collect(prefix + ".fc1", out);
        fc2_.collect(prefix + ".fc2", out);
    }

private:
    nn::LayerNorm<T> ln_;
    nn::Linear<T> fc1_;
    nn::Linear<T> fc2_;
};

// Detection score from a [1 x 2] logits row.
template <typename T>
T detection_score(const ad::Tensor<T>& logits) {
    return logits.at(0, 1) - logits.at(0, 0);
}

}  // namespace gfl
