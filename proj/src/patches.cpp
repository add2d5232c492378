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

#include "gflfad/patches.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace gfl {

PatchGrid patchify(const MelSpectrogram& spec, std::size_t patch_h, std::size_t patch_w) {
    if (patch_h == 0 || patch_w == 0) {
        throw std::invalid_argument("patchify: patch extents must be positive");
    }
    if (spec.mel_bands == 0 || spec.frames == 0) {
        throw std::invalid_argument("patchify: empty spectrogram");
    }
    PatchGrid g;
    g.patch_h = patch_h;
    g.patch_w = patch_w;
    g.padded_mels = ((spec.mel_bands + patch_h - 1) / patch_h) * patch_h;
    g.padded_frames = ((spec.frames + patch_w - 1) / patch_w) * patch_w;
    g.grid.f_bins = g.padded_mels / patch_h;
    g.grid.t_bins = g.padded_frames / patch_w;
    const std::size_t pix = patch_h * patch_w;
    g.patches.assign(g.grid.n() * pix, 0.0);
    for (std::size_t f = 0; f < g.grid.f_bins; ++f) {
        for (std::size_t t = 0; t < g.grid.t_bins; ++t) {
            double* dst = g.patches.data() + (f * g.grid.t_bins + t) * pix;
            for (std::size_t i = 0; i < patch_h; ++i) {
                const std::size_t band = f * patch_h + i;
                if (band >= spec.mel_bands) continue;  // padded rows stay zero
                for (std::size_t j = 0; j < patch_w; ++j) {
                    const std::size_t frame = t * patch_w + j;
                    if (frame >= spec.frames) continue;
                    dst[i * patch_w + j] = spec.at(band, frame);
                }
            }
        }
    }
    return g;
}

std::vector<double> reassemble(const PatchGrid& g) {
    std::vector<double> plane(g.padded_mels * g.padded_frames, 0.0);
    const std::size_t pix = g.pixels();
    for (std::size_t p = 0; p < g.n_patches(); ++p) {
        const auto [f, t] = g.coords(p);
        const double* src = g.patches.data() + p * pix;
        for (std::size_t i = 0; i < g.patch_h; ++i)
            for (std::size_t j = 0; j < g.patch_w; ++j)
                plane[(f * g.patch_h + i) * g.padded_frames + (t * g.patch_w + j)] =
                    src[i * g.patch_w + j];
    }
    return plane;
}

std::vector<double> sinusoidal_pos_table(const GridShape& grid, std::size_t dim) {
    if (dim == 0 || dim % 4 != 0) {
        throw std::invalid_argument("sinusoidal_pos_table: dim " + std::to_string(dim) +
                                    " must be a positive multiple of 4");
    }
    const std::size_t axis_dim = dim / 2;
    const std::size_t half = axis_dim / 2;
    std::vector<double> omega(half);
    for (std::size_t k = 0; k < half; ++k) {
        omega[k] = std::pow(10000.0, -static_cast<double>(k) / static_cast<double>(half));
    }
    std::vector<double> table(grid.n() * dim);
    for (std::size_t p = 0; p < grid.n(); ++p) {
        const double f = static_cast<double>(p / grid.t_bins);
        const double t = static_cast<double>(p % grid.t_bins);
        double* row = table.data() + p * dim;
        for (std::size_t k = 0; k < half; ++k) {
            row[k] = std::sin(f * omega[k]);
            row[half + k] = std::cos(f * omega[k]);
            row[axis_dim + k] = std::sin(t * omega[k]);
            row[axis_dim + half + k] = std::cos(t * omega[k]);
        }
    }
    return table;
}

namespace {

// First k values of a partial Fisher-Yates draw over [0, n), sorted.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace

MaskPartition sample_mask(const GridShape& grid, double ratio, MaskPolicy policy, Rng& rng) {
    if (grid.n() == 0) throw std::invalid_argument("sample_mask: empty grid");
    if (ratio < 0.0 || ratio >= 1.0) {
        throw std::invalid_argument("sample_mask: ratio " + std::to_string(ratio) +
                                    " outside [0, 1)");
    }
    const std::size_t n = grid.n();
    MaskPartition part;
    part.grid = grid;

    if (policy == MaskPolicy::unstructured) {
        const std::size_t m = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
        if (m >= n) {
            throw std::invalid_argument("sample_mask: ratio " + std::to_string(ratio) +
                                        " rounds to all " + std::to_string(n) + " patches masked");
        }
        part.masked = sample_without_replacement(n, m, rng);
    } else {
        const bool time = (policy == MaskPolicy::time);
        const std::size_t units = time ? grid.t_bins : grid.f_bins;
        const std::size_t unit_size = time ? grid.f_bins : grid.t_bins;
        const std::size_t k =
            static_cast<std::size_t>(std::llround(ratio * static_cast<double>(units)));
        if (k >= units) {
            throw std::invalid_argument("sample_mask: ratio " + std::to_string(ratio) +
                                        " masks every structural unit");
        }
        const auto chosen = sample_without_replacement(units, k, rng);
        part.masked.reserve(k * unit_size);
        for (std::size_t u : chosen) {
            for (std::size_t j = 0; j < unit_size; ++j) {
                part.masked.push_back(time ? j * grid.t_bins + u : u * grid.t_bins + j);
            }
        }
        std::sort(part.masked.begin(), part.masked.end());
    }

    part.visible.reserve(n - part.masked.size());
    std::size_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (next < part.masked.size() && part.masked[next] == i) {
            ++next;
        } else {
            part.visible.push_back(i);
        }
    }
    return part;
}

std::vector<double> standardize_targets(const PatchGrid& g) {
    const std::size_t pix = g.pixels();
    std::vector<double> out(g.patches.size());
    for (std::size_t p = 0; p < g.n_patches(); ++p) {
        const double* src = g.patches.data() + p * pix;
        double mean = 0.0;
        for (std::size_t i = 0; i < pix; ++i) mean += src[i];
        mean /= static_cast<double>(pix);
        double var = 0.0;
        for (std::size_t i = 0; i < pix; ++i) var += (src[i] - mean) * (src[i] - mean);
        var /= static_cast<double>(pix);
        const double inv = 1.0 / std::sqrt(var + 1e-6);
        for (std::size_t i = 0; i < pix; ++i) out[p * pix + i] = (src[i] - mean) * inv;
    }
    return out;
}

}  // namespace gfl
