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
#include <map>
#include <numbers>
#include <vector>

#include "gflfad/mae.hpp"
#include "gflfad/patches.hpp"

using gfl::GridShape;
using gfl::MaeBackbone;
using gfl::MaeConfig;
using gfl::MaskPartition;
using gfl::MaskPolicy;
using gfl::MelSpectrogram;
using gfl::patchify;
using gfl::PatchGrid;
using gfl::Rng;
using gfl::sample_mask;
using Tensor = gfl::ad::Tensor<double>;
using TapeD = gfl::ad::Tape<double>;

namespace {

MelSpectrogram random_spec(std::size_t bands, std::size_t frames, Rng& rng) {
    MelSpectrogram s;
    s.mel_bands = bands;
    s.frames = frames;
    s.values.resize(bands * frames);
    for (auto& v : s.values) v = rng.uniform(-2, 2);
    return s;
}

MaskPartition manual_partition(const GridShape& grid, std::vector<std::size_t> masked) {
    MaskPartition part;
    part.grid = grid;
    part.masked = std::move(masked);
    std::sort(part.masked.begin(), part.masked.end());
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

std::map<std::string, std::vector<double>> named_params(const MaeBackbone<double>& mae) {
    std::vector<gfl::nn::ParamRef<double>> refs;
    mae.collect("mae", refs);
    std::map<std::string, std::vector<double>> out;
    for (const auto& r : refs) out[r.name] = r.tensor.data();
    return out;
}

// Plain-double helpers for the straight-line oracle.
std::vector<double> oracle_ln(const std::vector<double>& x, const std::vector<double>& gain,
                              const std::vector<double>& shift) {
    const std::size_t n = x.size();
    double mean = 0, var = 0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = (x[i] - mean) * inv * gain[i] + shift[i];
    return out;
}

std::vector<double> oracle_vecmat(const std::vector<double>& x, const std::vector<double>& w,
                                  std::size_t in, std::size_t out_dim) {
    std::vector<double> y(out_dim, 0.0);
    for (std::size_t j = 0; j < out_dim; ++j)
        for (std::size_t i = 0; i < in; ++i) y[j] += x[i] * w[i * out_dim + j];
    return y;
}

double oracle_gelu(double x) {
    const double c = std::sqrt(2.0 / std::numbers::pi);
    return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

}  // namespace

TEST_CASE("zero-depth encoder returns the visible rows unchanged") {
    Rng rng(61);
    auto g = patchify(random_spec(8, 8, rng), 4, 4);  // 2x2 grid
    gfl::PatchEmbed<double> embed(16, 8, rng);
    MaeConfig cfg{.enc_layers = 0, .dec_layers = 0, .embed_dim = 8, .dec_dim = 8, .heads = 2};
    MaeBackbone<double> mae(16, cfg, rng);
    auto part = manual_partition(g.grid, {1, 2});

    TapeD tape;
    auto xp = embed.forward(tape, g);
    auto bn = mae.encode(tape, xp, part);
    REQUIRE(bn.values.rows() == 2);
    CHECK(bn.visible_idx == std::vector<std::size_t>{0, 3});
    for (std::size_t c = 0; c < 8; ++c) {
        CHECK(bn.values.at(0, c) == xp.at(0, c));
        CHECK(bn.values.at(1, c) == xp.at(3, c));
    }
}

TEST_CASE("encode normalizes visible index order") {
    Rng rng(62);
    auto g = patchify(random_spec(8, 8, rng), 4, 4);
    gfl::PatchEmbed<double> embed(16, 8, rng);
    MaeConfig cfg{.enc_layers = 1, .dec_layers = 0, .embed_dim = 8, .dec_dim = 8, .heads = 2};
    MaeBackbone<double> mae(16, cfg, rng);

    auto part = manual_partition(g.grid, {2});
    MaskPartition shuffled = part;
    std::swap(shuffled.visible[0], shuffled.visible[2]);  // {3, 1, 0}

    TapeD t1, t2;
    auto a = mae.encode(t1, embed.forward(t1, g), part);
    auto b = mae.encode(t2, embed.forward(t2, g), shuffled);
    CHECK(a.visible_idx == b.visible_idx);
    CHECK(a.values.data() == b.values.data());
}

TEST_CASE("one block over a single token matches a straight-line evaluation") {
    Rng rng(63);
    auto g = patchify(random_spec(4, 4, rng), 2, 2);  // 2x2 grid, 4-pixel patches
    gfl::PatchEmbed<double> embed(4, 8, rng);
    MaeConfig cfg{.enc_layers = 1, .dec_layers = 0, .embed_dim = 8, .dec_dim = 8, .heads = 2};
    MaeBackbone<double> mae(4, cfg, rng);
    auto part = manual_partition(g.grid, {0, 1, 3});  // only patch 2 visible

    TapeD tape;
    auto xp = embed.forward(tape, g);
    auto bn = mae.encode(tape, xp, part);
    REQUIRE(bn.values.rows() == 1);

    // Independent evaluation of the same block on the same weights.
    auto params = named_params(mae);
    std::vector<double> x(8);
    for (std::size_t c = 0; c < 8; ++c) x[c] = xp.at(2, c);

    auto a = oracle_ln(x, params.at("mae.encoder.0.ln1.gain"), params.at("mae.encoder.0.ln1.shift"));
    auto v = oracle_vecmat(a, params.at("mae.encoder.0.attn.wv.weight"), 8, 8);
    // One token: softmax over a single score is 1, so attention output is V.
    auto attn = oracle_vecmat(v, params.at("mae.encoder.0.attn.wo.weight"), 8, 8);
    std::vector<double> h(8);
    for (std::size_t c = 0; c < 8; ++c) h[c] = x[c] + attn[c];
    auto b = oracle_ln(h, params.at("mae.encoder.0.ln2.gain"), params.at("mae.encoder.0.ln2.shift"));
    auto f1 = oracle_vecmat(b, params.at("mae.encoder.0.ff1.weight"), 8, 32);
    const auto& bias1 = params.at("mae.encoder.0.ff1.bias");
    for (std::size_t i = 0; i < 32; ++i) f1[i] = oracle_gelu(f1[i] + bias1[i]);
    auto f2 = oracle_vecmat(f1, params.at("mae.encoder.0.ff2.weight"), 32, 8);
    const auto& bias2 = params.at("mae.encoder.0.ff2.bias");
    std::vector<double> block_out(8);
    for (std::size_t c = 0; c < 8; ++c) block_out[c] = h[c] + f2[c] + bias2[c];
    auto final_out =
        oracle_ln(block_out, params.at("mae.encoder.norm.gain"), params.at("mae.encoder.norm.shift"));

    for (std::size_t c = 0; c < 8; ++c) {
        CHECK(bn.values.at(0, c) == doctest::Approx(final_out[c]).epsilon(1e-12));
    }
}

TEST_CASE("encoder never reads masked patches") {
    Rng rng(64);
    auto g = patchify(random_spec(16, 24, rng), 4, 4);
    gfl::PatchEmbed<double> embed(16, 8, rng);
    MaeConfig cfg{.enc_layers = 2, .dec_layers = 0, .embed_dim = 8, .dec_dim = 8, .heads = 2};
    MaeBackbone<double> mae(16, cfg, rng);
    Rng mask_rng(7);
    auto part = sample_mask(g.grid, 0.4, MaskPolicy::unstructured, mask_rng);

    PatchGrid zeroed = g;
    for (std::size_t p : part.masked) {
        for (std::size_t i = 0; i < g.pixels(); ++i) zeroed.patches[p * g.pixels() + i] = 0.0;
    }

    TapeD t1, t2;
    auto a = mae.encode(t1, embed.forward(t1, g), part);
    auto b = mae.encode(t2, embed.forward(t2, zeroed), part);
    CHECK(a.values.data() == b.values.data());  // bit-identical
}

TEST_CASE("CRER always covers all patch positions") {
    Rng rng(65);
    auto g = patchify(random_spec(8, 12, rng), 4, 4);  // 2x3 grid
    gfl::PatchEmbed<double> embed(16, 8, rng);
    MaeConfig cfg{.enc_layers = 1, .dec_layers = 1, .embed_dim = 8, .dec_dim = 8, .heads = 2};
    MaeBackbone<double> mae(16, cfg, rng);
    for (double rho : {0.0, 0.3, 0.6}) {
        Rng mask_rng(11);
        auto part = sample_mask(g.grid, rho, MaskPolicy::unstructured, mask_rng);
        TapeD tape;
        auto crer = mae.decode(tape, mae.encode(tape, embed.forward(tape, g), part), part);
        CHECK(crer.hidden.rows() == g.n_patches());
        CHECK(crer.hidden.cols() == 8);
        CHECK(crer.pixel_pred.rows() == g.n_patches());
        CHECK(crer.pixel_pred.cols() == 16);
    }
}

TEST_CASE("mask token receives gradient through the reconstruction path") {
    Rng rng(66);
    auto g = patchify(random_spec(8, 8, rng), 4, 4);
    gfl::PatchEmbed<double> embed(16, 8, rng);
    MaeConfig cfg{.enc_layers = 1, .dec_layers = 1, .embed_dim = 8, .dec_dim = 8, .heads = 2};
    MaeBackbone<double> mae(16, cfg, rng);
    auto targets_raw = gfl::standardize_targets(g);
    auto targets = Tensor::from_data({g.n_patches(), g.pixels()}, std::move(targets_raw));

    auto run = [&](const MaskPartition& part) {
        mae.mask_token().zero_grad();
        TapeD tape;
        auto crer = mae.decode(tape, mae.encode(tape, embed.forward(tape, g), part), part);
        gfl::ad::Tensor<double> loss;
        if (part.masked.empty()) {
            loss = tape.mse(crer.pixel_pred, targets);
        } else {
            loss = tape.mse(tape.gather_rows(crer.pixel_pred, part.masked),
                            tape.gather_rows(targets, part.masked));
        }
        tape.backward(loss);
        double norm = 0;
        for (double v : mae.mask_token().grad()) norm += v * v;
        return norm;
    };

    CHECK(run(manual_partition(g.grid, {1, 3})) > 0.0);
    CHECK(run(manual_partition(g.grid, {})) == 0.0);  // no tokens inserted at rho = 0
}

TEST_CASE("global sentinel equals a window that covers the whole grid") {
    auto build = [](std::size_t window) {
        Rng rng(67);  // same seed -> same weights
        MaeConfig cfg{.enc_layers = 1,
                      .dec_layers = 2,
                      .embed_dim = 8,
                      .dec_dim = 8,
                      .heads = 2,
                      .local_window = window};
        return MaeBackbone<double>(16, cfg, rng);
    };
    auto global = build(0);
    auto windowed = build(2);

    Rng rng(68);
    auto g = patchify(random_spec(8, 8, rng), 4, 4);  // 2x2 grid: max distance 1
    gfl::PatchEmbed<double> embed(16, 8, rng);
    auto part = manual_partition(g.grid, {2});

    TapeD t1, t2;
    auto a = global.decode(t1, global.encode(t1, embed.forward(t1, g), part), part);
    auto b = windowed.decode(t2, windowed.encode(t2, embed.forward(t2, g), part), part);
    CHECK(a.hidden.data() == b.hidden.data());
    CHECK(a.pixel_pred.data() == b.pixel_pred.data());
}

TEST_CASE("local window actually restricts attention") {
    Rng rng(69);
    MaeConfig cfg{.enc_layers = 0,
                  .dec_layers = 1,
                  .embed_dim = 8,
                  .dec_dim = 8,
                  .heads = 2,
                  .local_window = 1};
    MaeBackbone<double> mae(16, cfg, rng);
    auto m = mae.local_attention_mask(GridShape{1, 4});
    // Patch 0 may attend to {0, 1} only on a 1x4 strip with radius 1.
    CHECK(m.at(0, 0) == 0.0);
    CHECK(m.at(0, 1) == 0.0);
    CHECK(m.at(0, 2) == -1e30);
    CHECK(m.at(0, 3) == -1e30);
    CHECK(m.at(2, 1) == 0.0);
    CHECK(m.at(2, 0) == -1e30);
}

TEST_CASE("full backbone gradient matches finite differences on a toy grid") {
    Rng rng(70);
    auto g = patchify(random_spec(4, 4, rng), 2, 2);  // 2x2 grid of 4-pixel patches
    gfl::PatchEmbed<double> embed(4, 8, rng);
    MaeConfig cfg{.enc_layers = 1,
                  .dec_layers = 1,
                  .embed_dim = 8,
                  .dec_dim = 8,
                  .heads = 2,
                  .local_window = 0};
    MaeBackbone<double> mae(4, cfg, rng);
    auto part = manual_partition(g.grid, {1, 2});
    auto targets = Tensor::from_data({4, 4}, gfl::standardize_targets(g));

    auto pipeline = [&](TapeD& tape, const Tensor& w) {
        auto consts = embed.patch_constant(g);
        auto xp = tape.add(tape.matmul(consts, w), embed.pos_table(g.grid));
        auto crer = mae.decode(tape, mae.encode(tape, xp, part), part);
        return tape.mse(tape.gather_rows(crer.pixel_pred, part.masked),
                        tape.gather_rows(targets, part.masked));
    };
    CHECK(gfl::ad::grad_check<double>(pipeline, embed.weight(), 1e-5) < 1e-4);
}

TEST_CASE("backbone construction is seed-deterministic") {
    auto run = [] {
        Rng rng(71);
        auto g = patchify(random_spec(8, 8, rng), 4, 4);
        gfl::PatchEmbed<double> embed(16, 8, rng);
        MaeConfig cfg{.enc_layers = 1, .dec_layers = 1, .embed_dim = 8, .dec_dim = 8, .heads = 2};
        MaeBackbone<double> mae(16, cfg, rng);
        auto part = manual_partition(g.grid, {0, 3});
        TapeD tape;
        auto crer = mae.decode(tape, mae.encode(tape, embed.forward(tape, g), part), part);
        return crer.pixel_pred.data();
    };
    CHECK(run() == run());
}

TEST_CASE("config validation") {
    MaeConfig bad{.enc_layers = 1, .dec_layers = 1, .embed_dim = 10, .dec_dim = 8, .heads = 4};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    Rng rng(72);
    MaeConfig cfg{.enc_layers = 1, .dec_layers = 0, .embed_dim = 8, .dec_dim = 8, .heads = 2};
    MaeBackbone<double> mae(16, cfg, rng);
    auto g = patchify(random_spec(8, 8, rng), 4, 4);
    gfl::PatchEmbed<double> embed(16, 8, rng);
    MaskPartition all_masked;
    all_masked.grid = g.grid;
    all_masked.masked = {0, 1, 2, 3};
    TapeD tape;
    CHECK_THROWS_AS(mae.encode(tape, embed.forward(tape, g), all_masked), std::invalid_argument);
}
