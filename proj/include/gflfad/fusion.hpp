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

// Cross-attention fusion of BN features with CRER. BN rows are mapped to the
// common width and act as queries; CRER rows are mapped by a second,
// independent linear layer and act as keys and values. Output length follows
// the queries. One pre-norm block by default; stacking is configurable.

namespace gfl {

struct FusionConfig {
    std::size_t d_model = 64;
    std::size_t heads = 4;
    std::size_t ffn_mult = 4;
    std::size_t blocks = 1;
};

template <typename T>
class FusionBlock {
public:
    FusionBlock() = default;

    FusionBlock(std::size_t q_in_dim, std::size_t kv_in_dim, const FusionConfig& cfg, Rng& rng)
        : cfg_(cfg), q_proj_(q_in_dim, cfg.d_model, rng), kv_proj_(kv_in_dim, cfg.d_model, rng) {
        if (cfg.d_model % cfg.heads != 0) {
            throw std::invalid_argument("fusion: d_model " + std::to_string(cfg.d_model) +
                                        " not divisible by " + std::to_string(cfg.heads) +
                                        " heads");
        }
        for (std::size_t i = 0; i < cfg.blocks; ++i) {
            blocks_.emplace_back(cfg.d_model, cfg.d_model, cfg.heads, cfg.ffn_mult * cfg.d_model,
                                 rng);
        }
    }

    // The two independent projections to the common width.
    std::pair<ad::Tensor<T>, ad::Tensor<T>> project(ad::Tape<T>& tape, const ad::Tensor<T>& bn,
                                                    const ad::Tensor<T>& crer) const {
        return {q_proj_.forward(tape, bn), kv_proj_.forward(tape, crer)};
    }

    ad::Tensor<T> forward(ad::Tape<T>& tape, const ad::Tensor<T>& bn,
                          const ad::Tensor<T>& crer) const {
        auto [q, kv] = project(tape, bn, crer);
        auto x = q;
        for (const auto& block : blocks_) x = block.forward_cross(tape, x, kv);
        return x;
    }

    // "w/o EN" wiring: CRER drives queries, keys, and values alike.
    ad::Tensor<T> forward_self(ad::Tape<T>& tape, const ad::Tensor<T>& crer) const {
        auto q = q_proj_.forward(tape, crer);
        auto kv = kv_proj_.forward(tape, crer);
        auto x = q;
        for (const auto& block : blocks_) x = block.forward_cross(tape, x, kv);
        return x;
    }

    const nn::Linear<T>& q_proj() const { return q_proj_; }
    const nn::Linear<T>& kv_proj() const { return kv_proj_; }
    const FusionConfig& config() const { return cfg_; }

    void collect(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) const {
        q_proj_.collect(prefix + ".q_proj", out);
        kv_proj_.collect(prefix + ".kv_proj", out);
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            blocks_[i].collect(prefix + ".block." + std::to_string(i), out);
        }
    }

private:
    FusionConfig cfg_;
    nn::Linear<T> q_proj_;
    nn::Linear<T> kv_proj_;
    std::vector<nn::TransformerBlock<T>> blocks_;
};

}  // namespace gfl
