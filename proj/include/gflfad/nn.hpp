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
#include <string>
#include <vector>

#include "gflfad/rng.hpp"
#include "gflfad/tensor.hpp"

// Small layer toolkit shared by the backbone, fusion, and classifier.
// Initialization is pinned for reproducibility: weights are zero-mean
// Gaussian with std 0.02 truncated at +-2 sigma, biases zero, layer-norm
// gain one. Pre-norm residual blocks throughout, GELU activations.

namespace gfl::nn {

template <typename T>
struct ParamRef {
    std::string name;
    ad::Tensor<T> tensor;
};

template <typename T>
ad::Tensor<T> trunc_normal_tensor(ad::Shape shape, Rng& rng, double stddev = 0.02) {
    std::vector<T> v(ad::shape_numel(shape));
    for (auto& x : v) x = static_cast<T>(rng.trunc_normal(stddev));
    return ad::Tensor<T>::from_data(std::move(shape), std::move(v), true);
}

inline std::vector<std::size_t> zero_rows(std::size_t n) {
    return std::vector<std::size_t>(n, 0);
}

template <typename T>
struct Linear {
    ad::Tensor<T> weight;  // [in x out]
    ad::Tensor<T> bias;    // [1 x out], undefined when bias-free
    bool has_bias = true;

    Linear() = default;
    Linear(std::size_t in, std::size_t out, Rng& rng, bool with_bias = true) : has_bias(with_bias) {
        weight = trunc_normal_tensor<T>({in, out}, rng);
        if (with_bias) bias = ad::Tensor<T>::zeros({1, out}, true);
    }

    ad::Tensor<T> forward(ad::Tape<T>& tape, const ad::Tensor<T>& x) const {
        auto y = tape.matmul(x, weight);
        if (has_bias) y = tape.add(y, tape.gather_rows(bias, zero_rows(x.rows())));
        return y;
    }

    std::size_t in_dim() const { return weight.shape()[0]; }
    std::size_t out_dim() const { return weight.shape()[1]; }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) const {
        out.push_back({prefix + ".weight", weight});
        if (has_bias) out.push_back({prefix + ".bias", bias});
    }
};

template <typename T>
struct LayerNorm {
    ad::Tensor<T> gain;   // [1 x dim]
    ad::Tensor<T> shift;  // [1 x dim]

    LayerNorm() = default;
    explicit LayerNorm(std::size_t dim) {
        gain = ad::Tensor<T>::full({1, dim}, T(1), true);
        shift = ad::Tensor<T>::zeros({1, dim}, true);
    }

    ad::Tensor<T> forward(ad::Tape<T>& tape, const ad::Tensor<T>& x) const {
        auto idx = zero_rows(x.rows());
        auto y = tape.layer_norm(x);
        return tape.add(tape.mul(y, tape.gather_rows(gain, idx)), tape.gather_rows(shift, idx));
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) const {
        out.push_back({prefix + ".gain", gain});
        out.push_back({prefix + ".shift", shift});
    }
};

// softmax(Q K^T / sqrt(d_k)) V, with an optional additive mask on the scores.
template <typename T>
ad::Tensor<T> scaled_dot_attention(ad::Tape<T>& tape, const ad::Tensor<T>& q,
                                   const ad::Tensor<T>& k, const ad::Tensor<T>& v,
                                   const ad::Tensor<T>* mask = nullptr) {
    const T inv_sqrt_dk = T(1) / static_cast<T>(std::sqrt(static_cast<double>(k.cols())));
    auto scores = tape.scale(tape.matmul(q, tape.transpose(k)), inv_sqrt_dk);
    if (mask != nullptr) scores = tape.add(scores, *mask);
    return tape.matmul(tape.softmax(scores, 1), v);
}

// Multi-head attention with per-head projections realized as column slices of
// full-width maps; heads are concatenated and projected by an output map. The
// projections carry no bias.
template <typename T>
struct MultiHeadAttention {
    Linear<T> wq, wk, wv, wo;
    std::size_t heads = 1;

    MultiHeadAttention() = default;
    MultiHeadAttention(std::size_t q_dim, std::size_t kv_dim, std::size_t d_model,
                       std::size_t n_heads, Rng& rng)
        : wq(q_dim, d_model, rng, false),
          wk(kv_dim, d_model, rng, false),
          wv(kv_dim, d_model, rng, false),
          wo(d_model, d_model, rng, false),
          heads(n_heads) {
        if (d_model % n_heads != 0) {
            throw std::invalid_argument("attention: d_model " + std::to_string(d_model) +
                                        " not divisible by " + std::to_string(n_heads) + " heads");
        }
    }

    ad::Tensor<T> forward(ad::Tape<T>& tape, const ad::Tensor<T>& q_in, const ad::Tensor<T>& kv_in,
                          const ad::Tensor<T>* mask = nullptr) const {
        const std::size_t d_model = wq.out_dim();
        const std::size_t dk = d_model / heads;
        auto q = wq.forward(tape, q_in);
        auto k = wk.forward(tape, kv_in);
        auto v = wv.forward(tape, kv_in);
        std::vector<ad::Tensor<T>> outs;
        outs.reserve(heads);
        for (std::size_t h = 0; h < heads; ++h) {
            auto qh = tape.slice(q, 1, h * dk, dk);
            auto kh = tape.slice(k, 1, h * dk, dk);
            auto vh = tape.slice(v, 1, h * dk, dk);
            outs.push_back(scaled_dot_attention(tape, qh, kh, vh, mask));
        }
        return wo.forward(tape, heads == 1 ? outs[0] : tape.concat(outs, 1));
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) const {
        wq.collect(prefix + ".wq", out);
        wk.collect(prefix + ".wk", out);
        wv.collect(prefix + ".wv", out);
        wo.collect(prefix + ".wo", out);
    }
};

// Pre-norm residual block: x += attn(ln1(x), kv); x += ffn(ln2(x)). For
// self-attention the normalized stream is both query and key/value; for
// cross-attention the memory is used untouched.
template <typename T>
struct TransformerBlock {
    LayerNorm<T> ln1, ln2;
    MultiHeadAttention<T> attn;
    Linear<T> ff1, ff2;

    TransformerBlock() = default;
    TransformerBlock(std::size_t dim, std::size_t kv_dim, std::size_t n_heads,
                     std::size_t ffn_hidden, Rng& rng)
        : ln1(dim),
          ln2(dim),
          attn(dim, kv_dim, dim, n_heads, rng),
          ff1(dim, ffn_hidden, rng),
          ff2(ffn_hidden, dim, rng) {}

    ad::Tensor<T> forward(ad::Tape<T>& tape, const ad::Tensor<T>& x,
                          const ad::Tensor<T>* mask = nullptr) const {
        auto a = ln1.forward(tape, x);
        auto h = tape.add(x, attn.forward(tape, a, a, mask));
        return tape.add(h, ff2.forward(tape, tape.gelu(ff1.forward(tape, ln2.forward(tape, h)))));
    }

    ad::Tensor<T> forward_cross(ad::Tape<T>& tape, const ad::Tensor<T>& x, const ad::Tensor<T>& kv,
                                const ad::Tensor<T>* mask = nullptr) const {
        auto h = tape.add(x, attn.forward(tape, ln1.forward(tape, x), kv, mask));
        return tape.add(h, ff2.forward(tape, tape.gelu(ff1.forward(tape, ln2.forward(tape, h)))));
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) const {
        ln1.collect(prefix + ".ln1", out);
        attn.collect(prefix + ".attn", out);
        ln2.collect(prefix + ".ln2", out);
        ff1.collect(prefix + ".ff1", out);
        ff2.collect(prefix + ".ff2", out);
    }
};

}  // namespace gfl::nn
