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

#include <stdexcept>
#include <string>
#include <vector>

#include "gflfad/classifier.hpp"
#include "gflfad/fusion.hpp"
#include "gflfad/losses.hpp"
#include "gflfad/mae.hpp"
#include "gflfad/nn.hpp"
#include "gflfad/patches.hpp"
#include "gflfad/rng.hpp"

// Whole detection pipeline for one sample: patch embedding, MAE encode/decode,
// fusion, classifier, plus the per-sample reconstruction loss. The two branch
// ablations rewire it:
//   - disable_crer_branch ("w/o DE"): no decoder is built; the classifier
//     consumes BN features directly and the reconstruction loss is a constant
//     zero.
//   - disable_bn_branch ("w/o EN"): fusion runs self-attention with
//     Q = K = V = CRER; the encoder still runs (the decoder needs it).

namespace gfl {

struct ModelConfig {
    std::size_t patch_h = 16;
    std::size_t patch_w = 16;
    MaeConfig mae;
    FusionConfig fusion;
    bool disable_bn_branch = false;
    bool disable_crer_branch = false;

    std::size_t patch_pixels() const { return patch_h * patch_w; }

    void validate() const {
        if (patch_h == 0 || patch_w == 0) {
            throw std::invalid_argument("model: patch extents must be positive");
        }
        if (disable_bn_branch && disable_crer_branch) {
            throw std::invalid_argument("model: at most one branch ablation may be active");
        }
        mae.validate();
    }
};

template <typename T>
class GflModel {
public:
    struct SampleOut {
        ad::Tensor<T> logits;  // [1 x 2]
        ad::Tensor<T> recon;   // scalar, constant zero when the decoder is off
    };

    GflModel() = default;

    GflModel(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
        cfg.validate();
        embed_ = PatchEmbed<T>(cfg.patch_pixels(), cfg.mae.embed_dim, rng);
        mae_ = MaeBackbone<T>(cfg.patch_pixels(), cfg.mae, rng, !cfg.disable_crer_branch);
        if (!cfg.disable_crer_branch) {
            const std::size_t q_dim = cfg.disable_bn_branch ? cfg.mae.dec_dim : cfg.mae.embed_dim;
            fusion_ = FusionBlock<T>(q_dim, cfg.mae.dec_dim, cfg.fusion, rng);
            head_ = ClassifierHead<T>(cfg.fusion.d_model, rng);
        } else {
            head_ = ClassifierHead<T>(cfg.mae.embed_dim, rng);
        }
    }

    SampleOut forward(ad::Tape<T>& tape, const ad::Tensor<T>& patch_rows, const GridShape& grid,
                      const MaskPartition& part, const ad::Tensor<T>& targets) const {
        auto xp = embed_.forward(tape, patch_rows, grid);
        auto bn = mae_.encode(tape, xp, part);
        if (cfg_.disable_crer_branch) {
            return {head_.forward(tape, bn.values), ad::Tensor<T>::scalar(T(0))};
        }
        auto crer = mae_.decode(tape, bn, part);
        auto recon = recon_loss_per_sample(tape, crer.pixel_pred, targets, part);
        auto fused = cfg_.disable_bn_branch ? fusion_.forward_self(tape, crer.hidden)
                                            : fusion_.forward(tape, bn.values, crer.hidden);
        return {head_.forward(tape, fused), recon};
    }

    // Convenience for scoring: builds the patch constants internally.
    SampleOut forward(ad::Tape<T>& tape, const PatchGrid& grid, const MaskPartition& part) const {
        auto targets_raw = standardize_targets(grid);
        std::vector<T> tv(targets_raw.size());
        for (std::size_t i = 0; i < tv.size(); ++i) tv[i] = static_cast<T>(targets_raw[i]);
        auto targets =
            ad::Tensor<T>::from_data({grid.n_patches(), grid.pixels()}, std::move(tv));
        return forward(tape, embed_.patch_constant(grid), grid.grid, part, targets);
    }

    // Named parameters in a fixed construction order.
    std::vector<nn::ParamRef<T>> parameters() const {
        std::vector<nn::ParamRef<T>> out;
        out.push_back({"patch_embed.weight", embed_.weight()});
        mae_.collect("mae", out);
        if (!cfg_.disable_crer_branch) fusion_.collect("fusion", out);
        head_.collect("classifier", out);
        return out;
    }

    void zero_grads() const {
        for (auto& p : parameters()) {
            auto t = p.tensor;
            t.zero_grad();
        }
    }

    const ModelConfig& config() const { return cfg_; }
    PatchEmbed<T>& patch_embed() { return embed_; }
    MaeBackbone<T>& backbone() { return mae_; }
    const MaeBackbone<T>& backbone() const { return mae_; }
    FusionBlock<T>& fusion() { return fusion_; }
    ClassifierHead<T>& classifier() { return head_; }

private:
    ModelConfig cfg_;
    PatchEmbed<T> embed_;
    MaeBackbone<T> mae_;
    FusionBlock<T> fusion_;
    ClassifierHead<T> head_;
};

// Hook for importing pre-trained backbone weights. The interchange tables it
// would read are not something this build produces, so it is intentionally
// left unimplemented.
template <typename T>
void import_pretrained_backbone(GflModel<T>&, const std::string& path) {
    throw std::runtime_error("import_pretrained_backbone: not implemented (no pre-trained " +
                             std::string("weights ship with this build); requested: ") + path);
}

}  // namespace gfl
