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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "gflfad/losses.hpp"
#include "gflfad/model.hpp"

using gfl::gar_loss;
using gfl::GridShape;
using gfl::make_loss_bundle;
using gfl::MaskPartition;
using gfl::recon_loss_per_sample;
using gfl::Rng;
using gfl::total_loss;
using Tensor = gfl::ad::Tensor<double>;
using TapeD = gfl::ad::Tape<double>;

namespace {

MaskPartition partition_of(const GridShape& grid, std::vector<std::size_t> masked) {
    MaskPartition part;
    part.grid = grid;
    part.masked = std::move(masked);
    std::size_t next = 0;
    for (std::size_t i = 0; i < grid.n(); ++i) {
        if (next < part.masked.size() && part.masked[next] == i) {
            ++next;
        } else {
            part.visible.push_back(i);
        }
    }
    return part;
}

Tensor random_tensor(gfl::ad::Shape shape, Rng& rng) {
    std::vector<double> v(gfl::ad::shape_numel(shape));
    for (auto& x : v) x = rng.uniform(-1, 1);
    return Tensor::from_data(std::move(shape), std::move(v));
}

}  // namespace

TEST_CASE("reconstruction loss worked examples") {
    Rng rng(101);
    const GridShape grid{2, 2};
    auto part = partition_of(grid, {1, 3});
    auto target = random_tensor({4, 4}, rng);

    TapeD tape;
    CHECK(recon_loss_per_sample(tape, target, target, part).item() == 0.0);

    // +1 on every masked cell -> MSE of 1 exactly.
    auto off = Tensor::from_data({4, 4}, target.data());
    for (std::size_t p : part.masked)
        for (std::size_t c = 0; c < 4; ++c) off.data()[p * 4 + c] += 1.0;
    CHECK(recon_loss_per_sample(tape, off, target, part).item() == doctest::Approx(1.0).epsilon(1e-12));

    // Residuals of 1 and 3 on the two masked patches: (4*1 + 4*9) / 8 = 5.
    auto pred = Tensor::from_data({4, 4}, target.data());
    for (std::size_t c = 0; c < 4; ++c) pred.data()[1 * 4 + c] += 1.0;
    for (std::size_t c = 0; c < 4; ++c) pred.data()[3 * 4 + c] += 3.0;
    CHECK(recon_loss_per_sample(tape, pred, target, part).item() ==
          doctest::Approx(5.0).epsilon(1e-9));
}

TEST_CASE("reconstruction loss ignores visible positions entirely") {
    Rng rng(102);
    const GridShape grid{2, 3};
    auto part = partition_of(grid, {0, 4});
    auto target = random_tensor({6, 4}, rng);
    auto pred = random_tensor({6, 4}, rng);

    TapeD tape;
    const double base = recon_loss_per_sample(tape, pred, target, part).item();
    auto perturbed = Tensor::from_data({6, 4}, pred.data());
    for (std::size_t p : part.visible)
        for (std::size_t c = 0; c < 4; ++c) perturbed.data()[p * 4 + c] += rng.uniform(-9, 9);
    const double after = recon_loss_per_sample(tape, perturbed, target, part).item();
    CHECK(after == base);  // exactly zero change

    auto none = partition_of(grid, {});
    CHECK(recon_loss_per_sample(tape, pred, target, none).item() == 0.0);
}

TEST_CASE("GAR loss worked examples") {
    TapeD tape;
    std::vector<Tensor> losses = {Tensor::scalar(0.4), Tensor::scalar(0.9)};
    CHECK(gar_loss(tape, losses, {1, 0}).item() == doctest::Approx(0.4).epsilon(1e-12));

    CHECK(gar_loss(tape, losses, {0, 0}).item() == 0.0);

    std::vector<Tensor> three = {Tensor::scalar(0.2), Tensor::scalar(0.6), Tensor::scalar(1.0)};
    CHECK(gar_loss(tape, three, {1, 1, 0}).item() == doctest::Approx(0.4).epsilon(1e-9));
}

TEST_CASE("GAR loss is permutation-invariant over the batch") {
    Rng rng(103);
    TapeD tape;
    std::vector<Tensor> losses;
    std::vector<int> labels;
    for (int i = 0; i < 6; ++i) {
        losses.push_back(Tensor::scalar(rng.uniform(0, 2)));
        labels.push_back(i % 2);
    }
    const double a = gar_loss(tape, losses, labels).item();
    std::vector<Tensor> rev(losses.rbegin(), losses.rend());
    std::vector<int> rev_labels(labels.rbegin(), labels.rend());
    const double b = gar_loss(tape, rev, rev_labels).item();
    CHECK(std::abs(a - b) < 1e-12);
}

TEST_CASE("GAR loss input validation") {
    TapeD tape;
    std::vector<Tensor> losses = {Tensor::scalar(0.5)};
    CHECK_THROWS_AS(gar_loss(tape, losses, {1, 0}), std::invalid_argument);
    CHECK_THROWS_AS(gar_loss(tape, losses, {2}), std::invalid_argument);
}

TEST_CASE("cross-entropy worked examples") {
    TapeD tape;
    auto uniform = Tensor::from_data({1, 2}, {0.0, 0.0});
    CHECK(gfl::ce_loss(tape, uniform, {0}).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(gfl::ce_loss(tape, uniform, {1}).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    auto saturated = Tensor::from_data({1, 2}, {30.0, -30.0});
    CHECK(gfl::ce_loss(tape, saturated, {0}).item() < 1e-9);

    auto two = Tensor::from_data({1, 2}, {2.0, 0.0});
    const double expect = 2.0 + std::log(1.0 + std::exp(-2.0));  // 2.126928...
    CHECK(gfl::ce_loss(tape, two, {1}).item() == doctest::Approx(expect).epsilon(1e-9));
    CHECK(gfl::ce_loss(tape, two, {1}).item() == doctest::Approx(2.126928011).epsilon(1e-9));
}

TEST_CASE("raising the correct-class logit strictly lowers the loss") {
    Rng rng(104);
    for (int trial = 0; trial < 20; ++trial) {
        const double wrong = rng.uniform(-3, 3);
        double correct = rng.uniform(-3, 3);
        TapeD tape;
        double prev = gfl::ce_loss(tape, Tensor::from_data({1, 2}, {wrong, correct}), {1}).item();
        for (int step = 0; step < 5; ++step) {
            correct += rng.uniform(0.1, 1.0);
            const double cur =
                gfl::ce_loss(tape, Tensor::from_data({1, 2}, {wrong, correct}), {1}).item();
            CHECK(cur < prev);
            prev = cur;
        }
    }
}

TEST_CASE("total loss wiring") {
    TapeD tape;
    auto ce = Tensor::scalar(0.5);
    auto gar = Tensor::scalar(2.0);
    CHECK(total_loss(tape, ce, gar, 0.0).item() == 0.5);
    CHECK(total_loss(tape, ce, gar, 0.01).item() == doctest::Approx(0.52).epsilon(1e-12));
    CHECK_THROWS_AS(total_loss(tape, ce, gar, -0.1), std::invalid_argument);

    // The bundle total follows the same arithmetic path as add(ce, scale(gar, a)).
    auto bundle = make_loss_bundle(tape, ce, gar, 0.01);
    CHECK(bundle.total.item() == total_loss(tape, ce, gar, 0.01).item());
    auto disabled = make_loss_bundle(tape, ce, gar, 0.01, true);
    CHECK(disabled.total.item() == ce.item());
    CHECK(disabled.gar.item() == 2.0);  // still reported
}

TEST_CASE("spoof-only batches send exactly zero gradient to the pixel head") {
    Rng rng(105);
    gfl::ModelConfig cfg;
    cfg.patch_h = 2;
    cfg.patch_w = 2;
    cfg.mae = {.enc_layers = 1, .dec_layers = 1, .embed_dim = 8, .dec_dim = 8, .heads = 2,
               .local_window = 0};
    cfg.fusion = {.d_model = 8, .heads = 2};
    gfl::GflModel<double> model(cfg, rng);

    gfl::MelSpectrogram spec;
    spec.mel_bands = 4;
    spec.frames = 4;
    spec.values.resize(16);

    auto run_batch = [&](const std::vector<int>& labels) {
        model.zero_grads();
        TapeD tape;
        std::vector<Tensor> logit_rows, recons;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            for (auto& v : spec.values) v = rng.uniform(-2, 2);
            auto grid = gfl::patchify(spec, 2, 2);
            Rng mask_rng(7 + i);
            auto part = gfl::sample_mask(grid.grid, 0.3, gfl::MaskPolicy::unstructured, mask_rng);
            auto out = model.forward(tape, grid, part);
            logit_rows.push_back(out.logits);
            recons.push_back(out.recon);
        }
        auto ce = gfl::ce_loss(tape, tape.concat(logit_rows, 0), labels);
        auto gar = gar_loss(tape, recons, labels);
        auto bundle = make_loss_bundle(tape, ce, gar, 0.01);
        tape.backward(bundle.total);

        double head_norm = 0.0;
        for (auto& p : model.parameters()) {
            if (p.name.starts_with("mae.decoder.pixel_head")) {
                for (double g : p.tensor.grad()) head_norm += g * g;
            }
        }
        return head_norm;
    };

    CHECK(run_batch({0, 0, 0}) == 0.0);  // exactly zero, not approximately
    CHECK(run_batch({1, 0, 0}) > 0.0);
}
