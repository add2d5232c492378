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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "gflfad/checkpoint.hpp"
#include "gflfad/config.hpp"
#include "gflfad/data.hpp"
#include "gflfad/losses.hpp"
#include "gflfad/metrics.hpp"
#include "gflfad/model.hpp"
#include "gflfad/optimizer.hpp"

// Training orchestration. One seed = one run: per batch the pipeline goes
// frontend -> patchify -> mask -> encode -> decode -> standardized targets ->
// per-sample reconstruction -> GAR -> fusion -> classify -> CE -> total ->
// backward -> AdamW with the cosine schedule. All randomness (shuffles, train
// masks, eval masks) is derived statelessly from (seed, epoch, counter), so
// runs are bit-reproducible and checkpoints resume exactly.
//
// Evaluation keeps masking on by default with one fixed seed per run so
// scores are deterministic; eval_mask_ratio = 0 instead runs the decoder over
// all patches. Neither policy is canonical; both ship behind config.

namespace gfl {

struct EpochLog {
    int epoch = 0;
    double l_ce = 0.0;
    double l_gar = 0.0;
    double l_total = 0.0;
    double lr = 0.0;
    double dev_eer = std::numeric_limits<double>::quiet_NaN();
};

inline constexpr const char* kLogHeader = "epoch,l_ce,l_gar,l_total,lr,dev_eer";
std::string format_epoch_line(const EpochLog& log);

struct EvalReport {
    ScoreSet scores;
    double eer = std::numeric_limits<double>::quiet_NaN();
    double threshold = std::numeric_limits<double>::quiet_NaN();
    double min_tdcf = std::numeric_limits<double>::quiet_NaN();
    bool has_tdcf = false;
};

struct SeedRunResult {
    std::uint64_t seed = 0;
    std::vector<EpochLog> log;
    std::string final_checkpoint;  // empty when nothing was written
};

struct TrainReport {
    std::vector<SeedRunResult> runs;
};

struct SeedMetric {
    std::uint64_t seed = 0;
    double eer = 0.0;
    double min_tdcf = std::numeric_limits<double>::quiet_NaN();
};

struct EvalSummary {
    std::vector<SeedMetric> per_seed;
    double mean_eer = 0.0;
    double mean_tdcf = std::numeric_limits<double>::quiet_NaN();
    bool has_tdcf = false;
};

struct SweepRow {
    double value = 0.0;
    double eer = 0.0;
    double min_tdcf = std::numeric_limits<double>::quiet_NaN();
    bool has_tdcf = false;
};

inline MaskPartition full_visible_partition(const GridShape& grid) {
    MaskPartition part;
    part.grid = grid;
    part.visible.resize(grid.n());
    std::iota(part.visible.begin(), part.visible.end(), 0);
    return part;
}

// ---- templated engine ----

template <typename T>
struct CachedSample {
    GridShape grid;
    ad::Tensor<T> patches;  // [N x pixels] constants
    ad::Tensor<T> targets;  // standardized, [N x pixels]
};

template <typename T>
std::vector<CachedSample<T>> build_feature_cache(const TrainConfig& cfg, const Corpus& corpus) {
    const FrontendConfig fcfg = cfg.frontend_config();
    std::vector<CachedSample<T>> out;
    out.reserve(corpus.size());
    for (const auto& u : corpus) {
        const auto fixed = fix_length(u.wave, static_cast<std::size_t>(cfg.fixed_samples));
        const auto spec = log_mel(fixed, fcfg);
        const auto grid = patchify(spec, static_cast<std::size_t>(cfg.patch_h),
                                   static_cast<std::size_t>(cfg.patch_w));
        CachedSample<T> cs;
        cs.grid = grid.grid;
        std::vector<T> pv(grid.patches.size());
        for (std::size_t i = 0; i < pv.size(); ++i) pv[i] = static_cast<T>(grid.patches[i]);
        cs.patches = ad::Tensor<T>::from_data({grid.n_patches(), grid.pixels()}, std::move(pv));
        const auto raw = standardize_targets(grid);
        std::vector<T> tv(raw.size());
        for (std::size_t i = 0; i < tv.size(); ++i) tv[i] = static_cast<T>(raw[i]);
        cs.targets = ad::Tensor<T>::from_data({grid.n_patches(), grid.pixels()}, std::move(tv));
        out.push_back(std::move(cs));
    }
    return out;
}

template <typename T>
struct TrainedRun {
    std::shared_ptr<GflModel<T>> model;
    std::shared_ptr<AdamW<T>> opt;
    std::vector<EpochLog> log;
    std::uint64_t seed = 0;
    std::uint64_t global_step = 0;
    std::string final_checkpoint;
};

template <typename T>
ScoreSet score_cached(const GflModel<T>& model, const TrainConfig& cfg, const Corpus& corpus,
                      const std::vector<CachedSample<T>>& cache) {
    const double ratio = cfg.effective_eval_mask_ratio();
    const MaskPolicy policy = cfg.mask_policy_enum();
    ScoreSet out;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& cs = cache[i];
        MaskPartition part;
        if (ratio == 0.0) {
            part = full_visible_partition(cs.grid);
        } else {
            Rng rng(mix_seed(cfg.eval_mask_seed, 0xE7A1ull, i));
            part = sample_mask(cs.grid, ratio, policy, rng);
        }
        ad::Tape<T> tape(cfg.check_finite);
        auto sample = model.forward(tape, cs.patches, cs.grid, part, cs.targets);
        out.entries.push_back({corpus[i].utt_id, static_cast<double>(detection_score(sample.logits)),
                               corpus[i].label});
    }
    return out;
}

template <typename T>
ScoreSet score_corpus(const GflModel<T>& model, const TrainConfig& cfg, const Corpus& corpus) {
    return score_cached(model, cfg, corpus, build_feature_cache<T>(cfg, corpus));
}

// EER (and min t-DCF when costs are configured) from labeled scores.
EvalReport metrics_from_scores(const ScoreSet& scores, const TrainConfig& cfg);

// Scores the corpus, writes the score file first (so a metric failure on a
// single-class corpus still leaves scores on disk), then computes metrics.
template <typename T>
EvalReport evaluate_model(const GflModel<T>& model, const TrainConfig& cfg, const Corpus& corpus,
                          const std::string& scores_out = "", const std::string& report_out = "") {
    auto scores = score_corpus(model, cfg, corpus);
    if (!scores_out.empty()) write_scores(scores, scores_out);
    EvalReport report = metrics_from_scores(scores, cfg);
    if (!report_out.empty()) {
        std::vector<std::pair<std::string, double>> rows = {{"eer", report.eer},
                                                            {"threshold", report.threshold}};
        if (report.has_tdcf) rows.emplace_back("min_tdcf", report.min_tdcf);
        write_metrics_csv(rows, report_out);
    }
    return report;
}

namespace detail_train {

inline void require_both_classes(const Corpus& corpus, const char* what) {
    bool has_genuine = false, has_spoof = false;
    for (const auto& u : corpus) (u.label == 1 ? has_genuine : has_spoof) = true;
    if (corpus.empty() || !has_genuine || !has_spoof) {
        throw std::invalid_argument(std::string(what) + ": corpus must contain both classes");
    }
}

inline std::vector<bool> frozen_mask(const std::vector<std::string>& names,
                                     const TrainConfig& cfg) {
    std::vector<bool> frozen(names.size(), false);
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (cfg.freeze_encoder && names[i].starts_with("mae.encoder")) frozen[i] = true;
        if (cfg.freeze_decoder && names[i].starts_with("mae.decoder")) frozen[i] = true;
    }
    return frozen;
}

}  // namespace detail_train

template <typename T>
TrainedRun<T> train_one_seed(const TrainConfig& cfg, std::uint64_t seed, const Corpus& train,
                             const Corpus* dev, const std::string& resume_from = "",
                             const std::vector<CachedSample<T>>* shared_cache = nullptr,
                             const std::vector<CachedSample<T>>* shared_dev_cache = nullptr) {
    cfg.validate();
    detail_train::require_both_classes(train, "train");
    const bool score_dev = dev != nullptr && cfg.dev_every > 0;
    if (score_dev) detail_train::require_both_classes(*dev, "train (dev)");

    Rng init_rng(mix_seed(seed, 0x1217ull));
    auto model = std::make_shared<GflModel<T>>(cfg.model_config(), init_rng);
    auto params = model->parameters();
    auto opt = std::make_shared<AdamW<T>>(params, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps,
                                          cfg.weight_decay);
    {
        std::vector<std::string> names;
        for (const auto& p : params) names.push_back(p.name);
        opt->set_frozen(detail_train::frozen_mask(names, cfg));
    }

    std::vector<CachedSample<T>> own_cache;
    if (shared_cache == nullptr) {
        own_cache = build_feature_cache<T>(cfg, train);
        shared_cache = &own_cache;
    }
    std::vector<CachedSample<T>> own_dev_cache;
    if (score_dev && shared_dev_cache == nullptr) {
        own_dev_cache = build_feature_cache<T>(cfg, *dev);
        shared_dev_cache = &own_dev_cache;
    }

    const std::size_t batch_size = static_cast<std::size_t>(cfg.batch_size);
    const std::int64_t steps_per_epoch =
        static_cast<std::int64_t>((train.size() + batch_size - 1) / batch_size);
    const std::int64_t total_steps = steps_per_epoch * cfg.epochs;
    const MaskPolicy policy = cfg.mask_policy_enum();

    TrainedRun<T> run;
    run.model = model;
    run.opt = opt;
    run.seed = seed;

    int start_epoch = 1;
    if (!resume_from.empty()) {
        const auto meta = load_checkpoint<T>(resume_from, params, opt.get());
        if (meta.seed != seed) {
            throw std::runtime_error("train: checkpoint seed " + std::to_string(meta.seed) +
                                     " does not match requested seed " + std::to_string(seed));
        }
        start_epoch = static_cast<int>(meta.epoch) + 1;
        run.global_step = meta.global_step;
    }

    std::string run_dir;
    std::ofstream log_file;
    if (!cfg.out_dir.empty()) {
        run_dir = cfg.out_dir + "/seed_" + std::to_string(seed);
        std::filesystem::create_directories(run_dir);
        log_file.open(run_dir + "/train_log.csv",
                      start_epoch > 1 ? std::ios::app : std::ios::trunc);
        if (start_epoch == 1) log_file << kLogHeader << '\n';
    }

    for (int epoch = start_epoch; epoch <= cfg.epochs; ++epoch) {
        const auto batches = make_batches(train, batch_size, seed, static_cast<std::size_t>(epoch - 1),
                                          static_cast<std::size_t>(cfg.fixed_samples));
        double sum_ce = 0.0, sum_gar = 0.0, sum_total = 0.0, last_lr = 0.0;
        std::size_t seen = 0, genuine_seen = 0, sample_counter = 0;

        for (std::size_t b = 0; b < batches.size(); ++b) {
            const Batch& batch = batches[b];
            ad::Tape<T> tape(cfg.check_finite);
            std::vector<ad::Tensor<T>> logit_rows, recons;
            logit_rows.reserve(batch.index.size());
            recons.reserve(batch.index.size());
            for (std::size_t i = 0; i < batch.index.size(); ++i) {
                const auto& cs = (*shared_cache)[batch.index[i]];
                Rng mask_rng(mix_seed(seed, 0x3A5Cull, static_cast<std::uint64_t>(epoch),
                                      sample_counter));
                ++sample_counter;
                const auto part = sample_mask(cs.grid, cfg.mask_ratio, policy, mask_rng);
                auto out = model->forward(tape, cs.patches, cs.grid, part, cs.targets);
                logit_rows.push_back(out.logits);
                recons.push_back(out.recon);
            }
            auto logits = tape.concat(logit_rows, 0);
            ad::Tensor<T> ce;
            if (cfg.balanced_ce) {
                std::size_t genuine = 0;
                for (int lab : batch.labels) genuine += lab == 1;
                const std::size_t spoof = batch.labels.size() - genuine;
                if (genuine == 0 || spoof == 0) {
                    ce = ce_loss(tape, logits, batch.labels);
                } else {
                    const T b_total = static_cast<T>(batch.labels.size());
                    ce = ce_loss_weighted(tape, logits, batch.labels,
                                          b_total / (T(2) * static_cast<T>(spoof)),
                                          b_total / (T(2) * static_cast<T>(genuine)));
                }
            } else {
                ce = ce_loss(tape, logits, batch.labels);
            }
            auto gar = gar_loss(tape, recons, batch.labels);
            auto bundle = make_loss_bundle(tape, ce, gar, static_cast<T>(cfg.alpha),
                                           cfg.disable_gar);
            const double total_value = static_cast<double>(bundle.total.item());
            if (!std::isfinite(total_value)) {
                throw std::runtime_error("train: diverged at epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(b) +
                                         ": l_total is non-finite");
            }
            opt->zero_grad();
            tape.backward(bundle.total);
            last_lr = cosine_lr(static_cast<std::int64_t>(run.global_step), total_steps,
                                cfg.lr_peak, cfg.lr_min);
            opt->step(last_lr);
            ++run.global_step;

            const std::size_t bsz = batch.labels.size();
            std::size_t genuine_in_batch = 0;
            for (int lab : batch.labels) genuine_in_batch += lab == 1;
            sum_ce += static_cast<double>(bundle.ce.item()) * static_cast<double>(bsz);
            sum_total += total_value * static_cast<double>(bsz);
            sum_gar += static_cast<double>(bundle.gar.item()) * static_cast<double>(genuine_in_batch);
            seen += bsz;
            genuine_seen += genuine_in_batch;
        }

        EpochLog el;
        el.epoch = epoch;
        el.l_ce = sum_ce / static_cast<double>(seen);
        el.l_gar = genuine_seen > 0 ? sum_gar / static_cast<double>(genuine_seen) : 0.0;
        el.l_total = sum_total / static_cast<double>(seen);
        el.lr = last_lr;
        if (score_dev && (epoch % cfg.dev_every == 0 || epoch == cfg.epochs)) {
            el.dev_eer = compute_eer(score_cached(*model, cfg, *dev, *shared_dev_cache)).eer;
        }
        run.log.push_back(el);
        if (log_file.is_open()) log_file << format_epoch_line(el) << '\n';

        if (!run_dir.empty() && cfg.save_checkpoints) {
            CheckpointMeta meta;
            meta.precision = cfg.precision;
            meta.epoch = static_cast<std::uint64_t>(epoch);
            meta.seed = seed;
            meta.global_step = run.global_step;
            meta.adam_step = static_cast<std::uint64_t>(opt->step_count());
            meta.config_text = serialize_config(cfg);
            const std::string path = run_dir + "/ckpt_epoch_" + std::to_string(epoch) + ".bin";
            save_checkpoint<T>(path, meta, params, opt.get());
            run.final_checkpoint = path;
        }
    }
    return run;
}

// ---- precision-dispatched entry points (implemented in trainer.cpp) ----

// Trains every seed in cfg.seeds, writing per-seed logs/checkpoints under
// cfg.out_dir when set.
TrainReport run_training(const TrainConfig& cfg, const Corpus& train, const Corpus* dev);

// Trains per seed and scores eval_corpus with each final model; reports
// per-seed metrics and their mean.
EvalSummary train_and_evaluate(const TrainConfig& cfg, const Corpus& train,
                               const Corpus& eval_corpus, const Corpus* dev = nullptr);

// Rebuilds the model from the checkpoint's own config snapshot (eval masking
// and t-DCF costs are taken from eval_cfg) and evaluates the corpus.
EvalReport evaluate_checkpoint(const std::string& ckpt_path, const Corpus& corpus,
                               const TrainConfig& eval_cfg, const std::string& scores_out = "",
                               const std::string& report_out = "");

// Trains/evaluates once per axis value with shared seeds. axis is
// "mask_ratio" or "alpha".
std::vector<SweepRow> sweep(const std::string& axis, const std::vector<double>& values,
                            const TrainConfig& cfg, const Corpus& train, const Corpus& eval_corpus);

// CSV "value,eer,min_tdcf" (min_tdcf column is "nan" without costs).
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

}  // namespace gfl
