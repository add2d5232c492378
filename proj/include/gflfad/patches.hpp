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

#include <cstddef>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "gflfad/frontend.hpp"
#include "gflfad/rng.hpp"
#include "gflfad/tensor.hpp"

// Spectrogram patching, fixed 2-D sinusoidal position tables, and mask
// sampling. Patches are indexed sub-band-major: patch p sits at
// (f, t) = (p / T, p % T).

namespace gfl {

struct GridShape {
    std::size_t f_bins = 0;  // sub-band count F
    std::size_t t_bins = 0;  // temporal segment count T
    std::size_t n() const { return f_bins * t_bins; }
    bool operator==(const GridShape&) const = default;
};

struct PatchGrid {
    std::vector<double> patches;  // [N x (patch_h * patch_w)] row-major
    std::size_t patch_h = 0;
    std::size_t patch_w = 0;
    GridShape grid;
    std::size_t padded_mels = 0;
    std::size_t padded_frames = 0;

    std::size_t n_patches() const { return grid.n(); }
    std::size_t pixels() const { return patch_h * patch_w; }
    std::pair<std::size_t, std::size_t> coords(std::size_t p) const {
        return {p / grid.t_bins, p % grid.t_bins};
    }
};

// Zero-pads the spectrogram on the right/bottom to patch multiples and cuts it
// into flattened patch rows.
PatchGrid patchify(const MelSpectrogram& spec, std::size_t patch_h, std::size_t patch_w);

// Inverse of patchify: the padded [padded_mels x padded_frames] plane.
std::vector<double> reassemble(const PatchGrid& grid);

// Fixed 2-D sinusoidal table, [N x dim] with dim divisible by 4. The first
// dim/2 channels encode the sub-band index f, the rest the segment index t;
// each half is [sin(p * w_0..), cos(p * w_0..)] with w_k = 10000^(-k / (dim/4)).
std::vector<double> sinusoidal_pos_table(const GridShape& grid, std::size_t dim);

enum class MaskPolicy { unstructured, time, freq };

struct MaskPartition {
    GridShape grid;
    std::vector<std::size_t> masked;   // ascending
    std::vector<std::size_t> visible;  // ascending
};

// Samples round(ratio * N) masked patches. The default policy draws uniformly
// without replacement; "time"/"freq" mask whole columns/rows, keeping the
// budget within one structural unit of round(ratio * N).
MaskPartition sample_mask(const GridShape& grid, double ratio, MaskPolicy policy, Rng& rng);

// Per-patch standardization of raw pixels: (x - mean) / sqrt(var + 1e-6) with
// the population variance. Constant patches map to all-zero targets.
std::vector<double> standardize_targets(const PatchGrid& grid);

// Trainable patch projection plus the fixed position table: row i of the
// output is patches[i] * W + pos[i]. No bias term.
template <typename T>
class PatchEmbed {
public:
    PatchEmbed() = default;
    PatchEmbed(std::size_t pixels, std::size_t embed_dim, Rng& rng)
        : pixels_(pixels), dim_(embed_dim) {
        std::vector<T> w(pixels * embed_dim);
        for (auto& v : w) v = static_cast<T>(rng.trunc_normal(0.02));
        weight_ = ad::Tensor<T>::from_data({pixels, embed_dim}, std::move(w), true);
    }

    ad::Tensor<T> forward(ad::Tape<T>& tape, const ad::Tensor<T>& patch_rows,
                          const GridShape& grid) const {
        return tape.add(tape.matmul(patch_rows, weight_), pos_table(grid));
    }

    ad::Tensor<T> forward(ad::Tape<T>& tape, const PatchGrid& grid) const {
        return forward(tape, patch_constant(grid), grid.grid);
    }

    // Raw pixel rows as a constant (no-grad) tensor.
    ad::Tensor<T> patch_constant(const PatchGrid& grid) const {
        std::vector<T> v(grid.patches.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(grid.patches[i]);
        return ad::Tensor<T>::from_data({grid.n_patches(), grid.pixels()}, std::move(v));
    }

    const ad::Tensor<T>& pos_table(const GridShape& grid) const {
        auto key = std::make_pair(grid.f_bins, grid.t_bins);
        auto it = pos_cache_.find(key);
        if (it == pos_cache_.end()) {
            auto table = sinusoidal_pos_table(grid, dim_);
            std::vector<T> v(table.size());
            for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(table[i]);
            it = pos_cache_.emplace(key, ad::Tensor<T>::from_data({grid.n(), dim_}, std::move(v)))
                     .first;
        }
        return it->second;
    }

    ad::Tensor<T>& weight() { return weight_; }
    const ad::Tensor<T>& weight() const { return weight_; }
    std::size_t embed_dim() const { return dim_; }
    std::size_t pixels() const { return pixels_; }

private:
    std::size_t pixels_ = 0;
    std::size_t dim_ = 0;
    ad::Tensor<T> weight_;
    mutable std::map<std::pair<std::size_t, std::size_t>, ad::Tensor<T>> pos_cache_;
};

}  // namespace gfl
