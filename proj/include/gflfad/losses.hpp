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

#include "gflfad/patches.hpp"
#include "gflfad/tensor.hpp"

// Objective pieces. The reconstruction loss counts masked patches only; the
// GAR loss averages per-sample reconstruction losses over genuine samples
// (label 1) and is an unconnected zero when a batch has none, so spoof-only
// batches contribute no gradient through the reconstruction path. The total
// is ce + alpha * gar with a fixed, non-learnable alpha.

namespace gfl {

// Mean squared error over masked patch rows only. Returns a constant zero
// when nothing is masked (the loss is undefined there and must not steer
// training).
template <typename T>
ad::Tensor<T> recon_loss_per_sample(ad::Tape<T>& tape, const ad::Tensor<T>& pred,
                                    const ad::Tensor<T>& target, const MaskPartition& part) {
    if (pred.shape() != target.shape()) {
        throw std::invalid_argument("recon_loss: prediction shape " + ad::shape_str(pred.shape()) +
                                    " != target shape " + ad::shape_str(target.shape()));
    }
    if (part.masked.empty()) return ad::Tensor<T>::scalar(T(0));
    return tape.mse(tape.gather_rows(pred, part.masked), tape.gather_rows(target, part.masked));
}

// Sum(label_i * loss_i) / sum(label_i); exactly zero with no genuine samples.
template <typename T>
ad::Tensor<T> gar_loss(ad::Tape<T>& tape, const std::vector<ad::Tensor<T>>& per_sample,
                       const std::vector<int>& labels) {
    if (per_sample.size() != labels.size()) {
        throw std::invalid_argument("gar_loss: " + std::to_string(per_sample.size()) +
                                    " losses vs " + std::to_string(labels.size()) + " labels");
    }
    std::vector<ad::Tensor<T>> genuine;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) {
            throw std::invalid_argument("gar_loss: label " + std::to_string(labels[i]) +
                                        " outside {0, 1}");
        }
        if (labels[i] == 1) genuine.push_back(per_sample[i]);
    }
    if (genuine.empty()) return ad::Tensor<T>::scalar(T(0));
    auto acc = genuine[0];
    for (std::size_t i = 1; i < genuine.size(); ++i) acc = tape.add(acc, genuine[i]);
    return tape.scale(acc, T(1) / static_cast<T>(genuine.size()));
}

template <typename T>
ad::Tensor<T> ce_loss(ad::Tape<T>& tape, const ad::Tensor<T>& logits,
                      const std::vector<int>& labels) {
    return tape.cross_entropy_with_logits(logits, labels);
}

// Optional class-weighted variant (off by default): weighted mean of per-row
// cross-entropies with weights w_spoof / w_genuine by label.
template <typename T>
ad::Tensor<T> ce_loss_weighted(ad::Tape<T>& tape, const ad::Tensor<T>& logits,
                               const std::vector<int>& labels, T w_spoof, T w_genuine) {
    if (logits.rows() != labels.size()) {
        throw std::invalid_argument("ce_loss_weighted: " + std::to_string(logits.rows()) +
                                    " rows vs " + std::to_string(labels.size()) + " labels");
    }
    ad::Tensor<T> acc;
    T wsum = T(0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const T w = labels[i] == 1 ? w_genuine : w_spoof;
        auto row_ce = tape.cross_entropy_with_logits(tape.slice(logits, 0, i, 1), {labels[i]});
        auto term = tape.scale(row_ce, w);
        acc = acc.defined() ? tape.add(acc, term) : term;
        wsum += w;
    }
    return tape.scale(acc, T(1) / wsum);
}

template <typename T>
ad::Tensor<T> total_loss(ad::Tape<T>& tape, const ad::Tensor<T>& ce, const ad::Tensor<T>& gar,
                         T alpha) {
    if (alpha < T(0)) throw std::invalid_argument("total_loss: alpha must be non-negative");
    return tape.add(ce, tape.scale(gar, alpha));
}

template <typename T>
struct LossBundle {
    ad::Tensor<T> ce;
    ad::Tensor<T> gar;
    ad::Tensor<T> total;
    T alpha;
};

// disable_gar keeps the GAR term visible in logs but removes it from the
// objective by zeroing the effective alpha.
template <typename T>
LossBundle<T> make_loss_bundle(ad::Tape<T>& tape, const ad::Tensor<T>& ce,
                               const ad::Tensor<T>& gar, T alpha, bool disable_gar = false) {
    const T effective = disable_gar ? T(0) : alpha;
    return {ce, gar, total_loss(tape, ce, gar, effective), alpha};
}

}  // namespace gfl
