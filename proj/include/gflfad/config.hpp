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

#include <cstdint>
#include <string>
#include <vector>

#include "gflfad/frontend.hpp"
#include "gflfad/model.hpp"
#include "gflfad/patches.hpp"

// Run configuration. Config files are flat "key=value" lines ('#' starts a
// comment) with keys identical to the field names below; CLI flags override
// file values. The desk defaults train the tiny model; apply_paper_profile()
// switches to the full published recipe (12/16 layers, lr 5e-6, 100 epochs),
// which is selectable but far beyond desk-scale budgets.

namespace gfl {

struct TrainConfig {
    // schedule / optimizer
    int epochs = 30;
    int batch_size = 16;
    double lr_peak = 1e-3;
    double lr_min = 0.0;
    double weight_decay = 0.01;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    // objective
    double alpha = 0.01;
    bool disable_gar = false;
    bool disable_bn_branch = false;   // "w/o EN"
    bool disable_crer_branch = false; // "w/o DE"
    bool balanced_ce = false;         // optional class weighting, off by default

    // masking
    double mask_ratio = 0.3;
    std::string mask_policy = "unstructured";  // unstructured | time | freq
    double eval_mask_ratio = -1.0;             // -1: reuse mask_ratio; 0: no masking at eval
    std::uint64_t eval_mask_seed = 9001;

    // model
    int enc_layers = 2;
    int dec_layers = 2;
    int embed_dim = 64;
    int dec_dim = 48;
    int heads = 4;
    int local_window = 2;
    int fusion_dim = 64;
    int fusion_heads = 4;
    int fusion_blocks = 1;
    int patch_h = 16;
    int patch_w = 16;
    bool freeze_encoder = false;
    bool freeze_decoder = false;

    // frontend / data
    int sample_rate = 16000;
    int mel_bands = 128;
    double window_s = 0.025;
    double hop_s = 0.010;
    int fixed_samples = 64600;

    // run control
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::string precision = "f64";  // f64 for exactness, f32 for speed
    int dev_every = 1;              // 0 disables dev scoring
    std::string out_dir;            // empty: no files written
    bool save_checkpoints = true;
    bool check_finite = true;
    double tdcf_c1 = 0.0;  // t-DCF costs; 0 means unset (the metric is skipped)
    double tdcf_c2 = 0.0;

    bool has_tdcf_costs() const { return tdcf_c1 > 0.0 && tdcf_c2 > 0.0; }
    void validate() const;

    FrontendConfig frontend_config() const;
    ModelConfig model_config() const;
    MaskPolicy mask_policy_enum() const;
    double effective_eval_mask_ratio() const {
        return eval_mask_ratio < 0.0 ? mask_ratio : eval_mask_ratio;
    }
};

// Published full-scale recipe: 100 epochs, batch 16, lr 5e-6, ViT-Base-sized
// encoder (12 layers) and a 16-layer decoder.
void apply_paper_profile(TrainConfig& cfg);

// Set one field by its name. Throws on unknown keys or unparsable values.
void apply_config_kv(TrainConfig& cfg, const std::string& key, const std::string& value);

// Reads "key=value" lines over the defaults in `base`.
TrainConfig parse_config_file(const std::string& path, TrainConfig base = {});
TrainConfig parse_config_text(const std::string& text, TrainConfig base = {});

// Canonical "key=value" text covering every field; parse_config of this text
// reproduces the config exactly.
std::string serialize_config(const TrainConfig& cfg);

}  // namespace gfl
