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
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gflfad/trainer.hpp"

using gfl::adamw_update;
using gfl::Corpus;
using gfl::cosine_lr;
using gfl::Rng;
using gfl::TrainConfig;

namespace fs = std::filesystem;

namespace {

TrainConfig micro_cfg() {
    TrainConfig c;
    c.epochs = 2;
    c.batch_size = 8;
    c.lr_peak = 1e-3;
    c.enc_layers = 1;
    c.dec_layers = 1;
    c.embed_dim = 16;
    c.dec_dim = 12;
    c.heads = 2;
    c.local_window = 0;
    c.fusion_dim = 16;
    c.fusion_heads = 2;
    c.patch_h = 8;
    c.patch_w = 8;
    c.mel_bands = 32;
    c.fixed_samples = 4000;
    c.seeds = {1};
    c.dev_every = 0;
    c.save_checkpoints = false;
    return c;
}

Corpus micro_corpus(std::size_t n_genuine, std::size_t n_spoof, std::uint64_t seed) {
    gfl::SynthConfig s;
    s.n_genuine = n_genuine;
    s.n_spoof = n_spoof;
    s.duration_s = 0.25;
    s.seed = seed;
    return gfl::synth_corpus(s);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("adamw_update worked examples") {
    // Zero gradient, zero decay: fixed point.
    std::vector<double> p = {1.0}, g = {0.0}, m = {0.0}, v = {0.0};
    adamw_update(p, g, m, v, 1, 0.1, 0.9, 0.999, 1e-8, 0.0);
    CHECK(p[0] == 1.0);

    // First step with g = 1: bias-corrected ratio is 1, so p ~ 1 - lr.
    p = {1.0};
    g = {1.0};
    m = {0.0};
    v = {0.0};
    adamw_update(p, g, m, v, 1, 0.1, 0.9, 0.999, 1e-8, 0.0);
    CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(m[0] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(v[0] == doctest::Approx(0.001).epsilon(1e-12));

    // Decay-only path multiplies by exactly (1 - lr*wd).
    p = {2.0};
    g = {0.0};
    m = {0.0};
    v = {0.0};
    adamw_update(p, g, m, v, 1, 0.1, 0.9, 0.999, 1e-8, 0.1);
    CHECK(p[0] == 2.0 * (1.0 - 0.01));
}

TEST_CASE("cosine schedule boundaries and monotonicity") {
    CHECK(cosine_lr(0, 100, 3e-4) == doctest::Approx(3e-4).epsilon(1e-15));
    CHECK(cosine_lr(100, 100, 3e-4) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(cosine_lr(50, 100, 3e-4, 1e-5) ==
          doctest::Approx((3e-4 + 1e-5) / 2.0).epsilon(1e-12));

    double prev = cosine_lr(0, 777, 1e-3, 1e-6);
    for (int s = 1; s <= 777; ++s) {
        const double cur = cosine_lr(s, 777, 1e-3, 1e-6);
        CHECK(cur <= prev);
        prev = cur;
    }

    CHECK_THROWS_AS(cosine_lr(0, 0, 1e-3), std::invalid_argument);
    CHECK_THROWS_AS(cosine_lr(-1, 10, 1e-3), std::invalid_argument);
    CHECK_THROWS_AS(cosine_lr(11, 10, 1e-3), std::invalid_argument);
}

TEST_CASE("tiny run completes and writes per-epoch checkpoints and a log") {
    TempDir tmp("gflfad_smoke");
    auto cfg = micro_cfg();
    cfg.out_dir = tmp.path.string();
    cfg.save_checkpoints = true;
    auto corpus = micro_corpus(4, 4, 3);

    auto run = gfl::train_one_seed<double>(cfg, 1, corpus, nullptr);
    REQUIRE(run.log.size() == 2);
    CHECK(fs::exists(tmp.path / "seed_1" / "ckpt_epoch_1.bin"));
    CHECK(fs::exists(tmp.path / "seed_1" / "ckpt_epoch_2.bin"));
    CHECK(run.final_checkpoint == (tmp.path / "seed_1" / "ckpt_epoch_2.bin").string());

    std::ifstream log(tmp.path / "seed_1" / "train_log.csv");
    std::string line;
    std::getline(log, line);
    CHECK(line == gfl::kLogHeader);
    std::size_t lines = 0;
    while (std::getline(log, line)) ++lines;
    CHECK(lines == 2);
}

TEST_CASE("alpha wiring and the disable_gar ablation") {
    auto cfg = micro_cfg();
    cfg.epochs = 1;
    auto corpus = micro_corpus(3, 3, 7);  // one batch per epoch at batch_size 8

    auto normal = gfl::train_one_seed<double>(cfg, 1, corpus, nullptr);
    const auto& el = normal.log[0];
    CHECK(el.l_gar > 0.0);
    CHECK(std::abs(el.l_total - (el.l_ce + 0.01 * el.l_gar)) < 1e-12);

    cfg.disable_gar = true;
    auto ablated = gfl::train_one_seed<double>(cfg, 1, corpus, nullptr);
    const auto& al = ablated.log[0];
    CHECK(al.l_gar > 0.0);       // still logged
    CHECK(al.l_total == al.l_ce);  // contributes nothing to the objective
}

TEST_CASE("two identical runs are bit-identical in logs and checkpoints") {
    TempDir tmp("gflfad_determinism");
    auto cfg = micro_cfg();
    cfg.out_dir = tmp.path.string();
    cfg.save_checkpoints = true;
    auto corpus = micro_corpus(4, 6, 11);

    auto run1 = gfl::train_one_seed<double>(cfg, 9, corpus, nullptr);
    const std::string log1 = slurp((tmp.path / "seed_9" / "train_log.csv").string());
    const std::string ckpt1 = slurp(run1.final_checkpoint);

    auto run2 = gfl::train_one_seed<double>(cfg, 9, corpus, nullptr);
    const std::string log2 = slurp((tmp.path / "seed_9" / "train_log.csv").string());
    const std::string ckpt2 = slurp(run2.final_checkpoint);

    CHECK(log1 == log2);
    CHECK(ckpt1 == ckpt2);
    REQUIRE(run1.log.size() == run2.log.size());
    for (std::size_t i = 0; i < run1.log.size(); ++i) {
        CHECK(gfl::format_epoch_line(run1.log[i]) == gfl::format_epoch_line(run2.log[i]));
    }
}

TEST_CASE("checkpoint resume continues bit-identically") {
    TempDir tmp("gflfad_resume");
    auto cfg = micro_cfg();
    cfg.epochs = 3;
    cfg.out_dir = tmp.path.string();
    cfg.save_checkpoints = true;
    auto corpus = micro_corpus(4, 6, 13);

    auto straight = gfl::train_one_seed<double>(cfg, 5, corpus, nullptr);
    const fs::path epoch2 = tmp.path / "seed_5" / "ckpt_epoch_2.bin";
    const fs::path epoch3 = tmp.path / "seed_5" / "ckpt_epoch_3.bin";
    const std::string straight_epoch3 = slurp(epoch3.string());
    fs::remove(epoch3);

    auto resumed = gfl::train_one_seed<double>(cfg, 5, corpus, nullptr, epoch2.string());
    REQUIRE(resumed.log.size() == 1);  // only epoch 3 replayed
    CHECK(resumed.log[0].epoch == 3);
    CHECK(gfl::format_epoch_line(resumed.log[0]) == gfl::format_epoch_line(straight.log[2]));
    CHECK(slurp(epoch3.string()) == straight_epoch3);
}

TEST_CASE("branch ablations rewire the pipeline") {
    auto corpus = micro_corpus(3, 5, 17);

    auto cfg = micro_cfg();
    cfg.epochs = 1;
    cfg.disable_crer_branch = true;
    auto no_de = gfl::train_one_seed<double>(cfg, 2, corpus, nullptr);
    for (const auto& p : no_de.model->parameters()) {
        CHECK_FALSE(p.name.starts_with("mae.decoder"));
        CHECK_FALSE(p.name.starts_with("fusion"));
    }
    CHECK(no_de.log[0].l_gar == 0.0);  // no reconstruction path at all

    cfg = micro_cfg();
    cfg.epochs = 1;
    cfg.disable_bn_branch = true;
    auto no_en = gfl::train_one_seed<double>(cfg, 2, corpus, nullptr);
    CHECK(no_en.log[0].l_gar > 0.0);
    bool saw_decoder = false;
    for (const auto& p : no_en.model->parameters()) saw_decoder |= p.name.starts_with("mae.decoder");
    CHECK(saw_decoder);

    cfg.disable_crer_branch = true;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("freeze flags hold the named blocks fixed") {
    auto cfg = micro_cfg();
    cfg.epochs = 1;
    cfg.freeze_encoder = true;
    auto corpus = micro_corpus(3, 5, 19);

    Rng probe(gfl::mix_seed(4, 0x1217ull));
    gfl::GflModel<double> reference(cfg.model_config(), probe);

    auto run = gfl::train_one_seed<double>(cfg, 4, corpus, nullptr);
    bool encoder_seen = false, other_changed = false;
    auto ref_params = reference.parameters();
    auto params = run.model->parameters();
    REQUIRE(ref_params.size() == params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].name.starts_with("mae.encoder")) {
            encoder_seen = true;
            CHECK(params[i].tensor.data() == ref_params[i].tensor.data());
        } else if (params[i].tensor.data() != ref_params[i].tensor.data()) {
            other_changed = true;
        }
    }
    CHECK(encoder_seen);
    CHECK(other_changed);
}

TEST_CASE("evaluation is deterministic and writes scores before failing on one class") {
    auto cfg = micro_cfg();
    cfg.epochs = 1;
    auto corpus = micro_corpus(3, 5, 23);
    auto run = gfl::train_one_seed<double>(cfg, 1, corpus, nullptr);

    auto a = gfl::score_corpus(*run.model, cfg, corpus);
    auto b = gfl::score_corpus(*run.model, cfg, corpus);
    REQUIRE(a.entries.size() == b.entries.size());
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        CHECK(a.entries[i].score == b.entries[i].score);
    }

    TempDir tmp("gflfad_eval");
    const std::string scores_path = (tmp.path / "scores.txt").string();
    auto spoof_only = micro_corpus(0, 4, 29);
    CHECK_THROWS_AS(gfl::evaluate_model(*run.model, cfg, spoof_only, scores_path),
                    std::invalid_argument);
    auto written = gfl::read_scores(scores_path);
    CHECK(written.entries.size() == 4);
}

TEST_CASE("checkpoint evaluation matches in-memory evaluation") {
    TempDir tmp("gflfad_ckpt_eval");
    auto cfg = micro_cfg();
    cfg.out_dir = tmp.path.string();
    cfg.save_checkpoints = true;
    cfg.tdcf_c1 = 1.0;
    cfg.tdcf_c2 = 10.0;
    auto corpus = micro_corpus(4, 6, 31);
    auto run = gfl::train_one_seed<double>(cfg, 1, corpus, nullptr);

    auto direct = gfl::evaluate_model(*run.model, cfg, corpus);
    auto from_ckpt = gfl::evaluate_checkpoint(run.final_checkpoint, corpus, cfg);
    CHECK(direct.eer == from_ckpt.eer);
    CHECK(direct.min_tdcf == from_ckpt.min_tdcf);
    REQUIRE(direct.scores.entries.size() == from_ckpt.scores.entries.size());
    for (std::size_t i = 0; i < direct.scores.entries.size(); ++i) {
        CHECK(direct.scores.entries[i].score == from_ckpt.scores.entries[i].score);
    }
}

TEST_CASE("untrained models score at chance level") {
    auto cfg = micro_cfg();
    // Balanced corpus with the phase_jump artifact: its spectral footprint is
    // subtle enough that a randomly initialized model carries no signal. The
    // pinned seeds below land in [0.43, 0.67] empirically; the asserted band
    // is the looser chance band.
    gfl::SynthConfig s;
    s.n_genuine = 30;
    s.n_spoof = 30;
    s.duration_s = 0.25;
    s.seed = 37;
    s.artifact = gfl::SpoofArtifact::phase_jump;
    auto corpus = gfl::synth_corpus(s);
    const auto cache = gfl::build_feature_cache<double>(cfg, corpus);
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
        Rng rng(gfl::mix_seed(seed, 0x1217ull));
        gfl::GflModel<double> model(cfg.model_config(), rng);
        const auto scores = gfl::score_cached(model, cfg, corpus, cache);
        const double eer = gfl::compute_eer(scores).eer;
        CHECK(eer >= 0.2);
        CHECK(eer <= 0.8);
    }
}

TEST_CASE("single-value sweep equals a plain train-and-evaluate run") {
    auto cfg = micro_cfg();
    cfg.tdcf_c1 = 1.0;
    cfg.tdcf_c2 = 10.0;
    auto train = micro_corpus(4, 6, 41);
    auto eval = micro_corpus(3, 4, 43);

    auto rows = gfl::sweep("alpha", {0.01}, cfg, train, eval);
    REQUIRE(rows.size() == 1);
    auto plain = gfl::train_and_evaluate(cfg, train, eval);
    CHECK(rows[0].eer == plain.mean_eer);
    CHECK(rows[0].min_tdcf == plain.mean_tdcf);

    CHECK_THROWS_AS(gfl::sweep("epochs", {1.0}, cfg, train, eval), std::invalid_argument);
    CHECK_THROWS_AS(gfl::sweep("alpha", {}, cfg, train, eval), std::invalid_argument);
    CHECK_THROWS_AS(gfl::sweep("mask_ratio", {1.5}, cfg, train, eval), std::invalid_argument);
}

TEST_CASE("sweep CSV is well-formed") {
    TempDir tmp("gflfad_sweep");
    std::vector<gfl::SweepRow> rows = {{0.1, 0.25, 0.5, true}, {0.3, 0.125, 0.25, true}};
    const std::string path = (tmp.path / "sweep.csv").string();
    gfl::write_sweep_csv(rows, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "value,eer,min_tdcf");
    std::getline(in, line);
    CHECK(line == "0.1,0.250000,0.500000");
    std::getline(in, line);
    CHECK(line == "0.3,0.125000,0.250000");
}

TEST_CASE("config file parsing, overrides, and serialization round-trip") {
    TempDir tmp("gflfad_config");
    const std::string path = (tmp.path / "run.cfg").string();
    {
        std::ofstream os(path);
        os << "# comment line\n";
        os << "epochs = 7\n";
        os << "alpha=0.1\n";
        os << "seeds=4,5\n";
        os << "precision=f32\n";
    }
    auto cfg = gfl::parse_config_file(path);
    CHECK(cfg.epochs == 7);
    CHECK(cfg.alpha == 0.1);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{4, 5});
    CHECK(cfg.precision == "f32");
    CHECK(cfg.batch_size == 16);  // untouched default

    CHECK_THROWS_AS(gfl::apply_config_kv(cfg, "no_such_key", "1"), std::invalid_argument);

    const std::string text = gfl::serialize_config(cfg);
    auto reparsed = gfl::parse_config_text(text);
    CHECK(gfl::serialize_config(reparsed) == text);

    gfl::TrainConfig paper;
    gfl::apply_paper_profile(paper);
    CHECK(paper.epochs == 100);
    CHECK(paper.lr_peak == 5e-6);
    CHECK(paper.enc_layers == 12);
    CHECK(paper.dec_layers == 16);
}

TEST_CASE("divergence guard aborts with a diagnostic") {
    auto cfg = micro_cfg();
    cfg.lr_peak = 1e37;
    cfg.check_finite = false;  // let values flow until the loss-level guard
    cfg.precision = "f32";
    auto corpus = micro_corpus(3, 5, 47);
    CHECK_THROWS_AS(gfl::train_one_seed<float>(cfg, 1, corpus, nullptr), std::runtime_error);
}

TEST_CASE("pre-trained backbone import hook is declared but unimplemented") {
    auto cfg = micro_cfg();
    Rng rng(1);
    gfl::GflModel<double> model(cfg.model_config(), rng);
    CHECK_THROWS_AS(gfl::import_pretrained_backbone(model, "weights.bin"), std::runtime_error);
}

TEST_CASE("training rejects degenerate corpora") {
    auto cfg = micro_cfg();
    auto spoof_only = micro_corpus(0, 4, 53);
    CHECK_THROWS_AS(gfl::train_one_seed<double>(cfg, 1, spoof_only, nullptr),
                    std::invalid_argument);
    Corpus empty;
    CHECK_THROWS_AS(gfl::train_one_seed<double>(cfg, 1, empty, nullptr), std::invalid_argument);
}
