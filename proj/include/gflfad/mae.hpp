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

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gflfad/nn.hpp"
#include "gflfad/patches.hpp"
#include "gflfad/rng.hpp"
#include "gflfad/tensor.hpp"

// Masked-autoencoder backbone. The encoder runs only over visible patch rows
// and its outputs are the content-related BN features; the decoder re-inserts
// a shared learned mask token at every masked position, adds a fixed
// sinusoidal position table, runs blocks whose self-attention is restricted
// to a local window over (f, t) patch coordinates, and emits both hidden
// states (the CRER) and per-patch pixel predictions through a linear head.

namespace gfl {

struct MaeConfig {
    std::size_t enc_layers = 2;
    std::size_t dec_layers = 2;
    std::size_t embed_dim = 64;  // C
    std::size_t dec_dim = 48;
    std::size_t heads = 4;
    std::size_t local_window = 2;  // Chebyshev radius in patches; 0 = global
    std::size_t ffn_mult = 4;

    void validate() const {
        if (embed_dim == 0 || dec_dim == 0 || heads == 0) {
            throw std::invalid_argument("mae: dimensions and heads must be positive");
        }
        if (embed_dim % heads != 0 || dec_dim % heads != 0) {
            throw std::invalid_argument("mae: embed_dim " + std::to_string(embed_dim) +
                                        " and dec_dim " + std::to_string(dec_dim) +
                                        " must be divisible by " + std::to_string(heads) +
                                        " heads");
        }
    }
};

template <typename T>
struct BnFeatures {
    ad::Tensor<T> values;                  // [N_visible x C], rows in ascending index order
    std::vector<std::size_t> visible_idx;  // ascending
};

template <typename T>
struct Crer {
    ad::Tensor<T> hidden;      // [N x dec_dim], rows in patch order
    ad::Tensor<T> pixel_pred;  // [N x patch_pixels]
};

template <typename T>
class MaeBackbone {
public:
    MaeBackbone() = default;

    // with_decoder = false builds an encoder-only backbone (the "w/o DE"
    // ablation): no decoder parameters exist and decode() is unavailable.
    MaeBackbone(std::size_t patch_pixels, const MaeConfig& cfg, Rng& rng, bool with_decoder = true)
        : cfg_(cfg), pixels_(patch_pixels), has_decoder_(with_decoder) {
        cfg.validate();
        const std::size_t c = cfg.embed_dim, d = cfg.dec_dim;
        for (std::size_t i = 0; i < cfg.enc_layers; ++i) {
            enc_blocks_.emplace_back(c, c, cfg.heads, cfg.ffn_mult * c, rng);
        }
        if (cfg.enc_layers > 0) enc_ln_ = nn::LayerNorm<T>(c);
        if (!with_decoder) return;
        dec_proj_ = nn::Linear<T>(c, d, rng);
        mask_token_ = nn::trunc_normal_tensor<T>({1, d}, rng);
        for (std::size_t i = 0; i < cfg.dec_layers; ++i) {
            dec_blocks_.emplace_back(d, d, cfg.heads, cfg.ffn_mult * d, rng);
        }
        if (cfg.dec_layers > 0) dec_ln_ = nn::LayerNorm<T>(d);
        pixel_head_ = nn::Linear<T>(d, patch_pixels, rng);
    }

    // Transformer stack over the visible rows of the embedded patches.
    BnFeatures<T> encode(ad::Tape<T>& tape, const ad::Tensor<T>& x_p,
                         const MaskPartition& part) const {
        validate_partition(part, x_p.rows());
        if (part.visible.empty()) throw std::invalid_argument("encode: empty visible set");
        std::vector<std::size_t> order = part.visible;
        std::sort(order.begin(), order.end());
        auto h = tape.gather_rows(x_p, order);
        for (const auto& block : enc_blocks_) h = block.forward(tape, h);
        if (!enc_blocks_.empty()) h = enc_ln_.forward(tape, h);
        return {h, std::move(order)};
    }

    // Projects BN rows to the decoder width, fills masked positions with the
    // mask token, adds the decoder position table, and runs the local-attention
    // stack. pixel_pred predicts standardized patch pixels.
    Crer<T> decode(ad::Tape<T>& tape, const BnFeatures<T>& bn, const MaskPartition& part) const {
        if (!has_decoder_) throw std::runtime_error("decode: backbone was built encoder-only");
        const std::size_t n = part.grid.n();
        const std::size_t v = part.visible.size();
        if (bn.visible_idx.size() != v || bn.values.rows() != v) {
            throw std::invalid_argument("decode: BN features not aligned with the partition");
        }
        auto proj = dec_proj_.forward(tape, bn.values);  // [V x D]
        ad::Tensor<T> stacked = proj;
        if (!part.masked.empty()) {
            auto tokens = tape.gather_rows(mask_token_, nn::zero_rows(part.masked.size()));
            stacked = tape.concat({proj, tokens}, 0);  // visible rows first, then tokens
        }
        // Route row (visible-rank | V + masked-rank) back to its patch position.
        std::vector<std::size_t> perm(n);
        std::size_t vi = 0, mi = 0;
        for (std::size_t pos = 0; pos < n; ++pos) {
            if (vi < part.visible.size() && part.visible[vi] == pos) {
                perm[pos] = vi++;
            } else {
                perm[pos] = v + mi++;
            }
        }
        auto x = tape.gather_rows(stacked, perm);
        x = tape.add(x, dec_pos_table(part.grid));
        const ad::Tensor<T>* mask = nullptr;
        ad::Tensor<T> mask_store;
        if (cfg_.local_window > 0 && !dec_blocks_.empty()) {
            mask_store = local_attention_mask(part.grid);
            mask = &mask_store;
        }
        for (const auto& block : dec_blocks_) x = block.forward(tape, x, mask);
        if (!dec_blocks_.empty()) x = dec_ln_.forward(tape, x);
        return {x, pixel_head_.forward(tape, x)};
    }

    ad::Tensor<T>& mask_token() { return mask_token_; }
    const MaeConfig& config() const { return cfg_; }
    std::size_t patch_pixels() const { return pixels_; }
    bool has_decoder() const { return has_decoder_; }

    void collect(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) const {
        for (std::size_t i = 0; i < enc_blocks_.size(); ++i) {
            enc_blocks_[i].collect(prefix + ".encoder." + std::to_string(i), out);
        }
        if (!enc_blocks_.empty()) enc_ln_.collect(prefix + ".encoder.norm", out);
        if (!has_decoder_) return;
        dec_proj_.collect(prefix + ".decoder.proj", out);
        out.push_back({prefix + ".decoder.mask_token", mask_token_});
        for (std::size_t i = 0; i < dec_blocks_.size(); ++i) {
            dec_blocks_[i].collect(prefix + ".decoder." + std::to_string(i), out);
        }
        if (!dec_blocks_.empty()) dec_ln_.collect(prefix + ".decoder.norm", out);
        pixel_head_.collect(prefix + ".decoder.pixel_head", out);
    }

    // Additive [N x N] score mask: 0 where |df| <= w and |dt| <= w, else -1e30.
    ad::Tensor<T> local_attention_mask(const GridShape& grid) const {
        auto key = std::make_pair(grid.f_bins, grid.t_bins);
        auto it = mask_cache_.find(key);
        if (it != mask_cache_.end()) return it->second;
        const std::size_t n = grid.n();
        const long w = static_cast<long>(cfg_.local_window);
        std::vector<T> m(n * n, T(0));
        for (std::size_t i = 0; i < n; ++i) {
            const long fi = static_cast<long>(i / grid.t_bins), ti = static_cast<long>(i % grid.t_bins);
            for (std::size_t j = 0; j < n; ++j) {
                const long fj = static_cast<long>(j / grid.t_bins),
                           tj = static_cast<long>(j % grid.t_bins);
                if (std::labs(fi - fj) > w || std::labs(ti - tj) > w) m[i * n + j] = T(-1e30);
            }
        }
        auto tensor = ad::Tensor<T>::from_data({n, n}, std::move(m));
        mask_cache_.emplace(key, tensor);
        return tensor;
    }

private:
    void validate_partition(const MaskPartition& part, std::size_t rows) const {
        if (part.grid.n() != rows || part.visible.size() + part.masked.size() != rows) {
            throw std::invalid_argument("mae: partition does not cover the " +
                                        std::to_string(rows) + " patch rows");
        }
    }

    const ad::Tensor<T>& dec_pos_table(const GridShape& grid) const {
        auto key = std::make_pair(grid.f_bins, grid.t_bins);
        auto it = pos_cache_.find(key);
        if (it == pos_cache_.end()) {
            auto table = sinusoidal_pos_table(grid, cfg_.dec_dim);
            std::vector<T> v(table.size());
            for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(table[i]);
            it = pos_cache_
                     .emplace(key, ad::Tensor<T>::from_data({grid.n(), cfg_.dec_dim}, std::move(v)))
                     .first;
        }
        return it->second;
    }

    MaeConfig cfg_;
    std::size_t pixels_ = 0;
    bool has_decoder_ = true;
    std::vector<nn::TransformerBlock<T>> enc_blocks_;
    nn::LayerNorm<T> enc_ln_;
    nn::Linear<T> dec_proj_;
    ad::Tensor<T> mask_token_;
    std::vector<nn::TransformerBlock<T>> dec_blocks_;
    nn::LayerNorm<T> dec_ln_;
    nn::Linear<T> pixel_head_;
    mutable std::map<std::pair<std::size_t, std::size_t>, ad::Tensor<T>> pos_cache_;
    mutable std::map<std::pair<std::size_t, std::size_t>, ad::Tensor<T>> mask_cache_;
};

}  // namespace gfl
