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

#include "gflfad/trainer.hpp"

#include <cstdio>

namespace gfl {

std::string format_epoch_line(const EpochLog& log) {
    char buf[192];
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%.9g", log.epoch, log.l_ce, log.l_gar,
                  log.l_total, log.lr, log.dev_eer);
    return buf;
}

EvalReport metrics_from_scores(const ScoreSet& scores, const TrainConfig& cfg) {
    EvalReport report;
    report.scores = scores;
    const auto eer = compute_eer(scores);
    report.eer = eer.eer;
    report.threshold = eer.threshold;
    if (cfg.has_tdcf_costs()) {
        report.min_tdcf = compute_min_tdcf(scores, {cfg.tdcf_c1, cfg.tdcf_c2});
        report.has_tdcf = true;
    }
    return report;
}

namespace {

template <typename T>
TrainReport run_training_impl(const TrainConfig& cfg, const Corpus& train, const Corpus* dev) {
    const auto cache = build_feature_cache<T>(cfg, train);
    std::vector<CachedSample<T>> dev_cache;
    if (dev != nullptr && cfg.dev_every > 0) dev_cache = build_feature_cache<T>(cfg, *dev);

    TrainReport report;
    for (std::uint64_t seed : cfg.seeds) {
        auto run = train_one_seed<T>(cfg, seed, train, dev, "", &cache,
                                     dev_cache.empty() ? nullptr : &dev_cache);
        report.runs.push_back({seed, std::move(run.log), std::move(run.final_checkpoint)});
    }
    return report;
}

template <typename T>
EvalSummary train_and_evaluate_impl(const TrainConfig& cfg, const Corpus& train,
                                    const Corpus& eval_corpus, const Corpus* dev) {
    const auto cache = build_feature_cache<T>(cfg, train);
    const auto eval_cache = build_feature_cache<T>(cfg, eval_corpus);
    std::vector<CachedSample<T>> dev_cache;
    if (dev != nullptr && cfg.dev_every > 0) dev_cache = build_feature_cache<T>(cfg, *dev);

    EvalSummary summary;
    double eer_sum = 0.0, tdcf_sum = 0.0;
    for (std::uint64_t seed : cfg.seeds) {
        auto run = train_one_seed<T>(cfg, seed, train, dev, "", &cache,
                                     dev_cache.empty() ? nullptr : &dev_cache);
        const auto scores = score_cached(*run.model, cfg, eval_corpus, eval_cache);
        const auto report = metrics_from_scores(scores, cfg);
        SeedMetric metric;
        metric.seed = seed;
        metric.eer = report.eer;
        metric.min_tdcf = report.min_tdcf;
        summary.per_seed.push_back(metric);
        eer_sum += report.eer;
        if (report.has_tdcf) {
            tdcf_sum += report.min_tdcf;
            summary.has_tdcf = true;
        }
    }
    const double n = static_cast<double>(summary.per_seed.size());
    summary.mean_eer = eer_sum / n;
    if (summary.has_tdcf) summary.mean_tdcf = tdcf_sum / n;
    return summary;
}

template <typename T>
EvalReport evaluate_checkpoint_impl(const std::string& ckpt_path, const CheckpointMeta& meta,
                                    const Corpus& corpus, const TrainConfig& eval_cfg,
                                    const std::string& scores_out, const std::string& report_out) {
    TrainConfig cfg = parse_config_text(meta.config_text);
    cfg.eval_mask_ratio = eval_cfg.eval_mask_ratio;
    cfg.eval_mask_seed = eval_cfg.eval_mask_seed;
    cfg.tdcf_c1 = eval_cfg.tdcf_c1;
    cfg.tdcf_c2 = eval_cfg.tdcf_c2;
    cfg.check_finite = eval_cfg.check_finite;

    Rng init_rng(mix_seed(meta.seed, 0x1217ull));
    GflModel<T> model(cfg.model_config(), init_rng);
    auto params = model.parameters();
    load_checkpoint<T>(ckpt_path, params, static_cast<AdamW<T>*>(nullptr));
    return evaluate_model(model, cfg, corpus, scores_out, report_out);
}

}  // namespace

TrainReport run_training(const TrainConfig& cfg, const Corpus& train, const Corpus* dev) {
    cfg.validate();
    return cfg.precision == "f32" ? run_training_impl<float>(cfg, train, dev)
                                  : run_training_impl<double>(cfg, train, dev);
}

EvalSummary train_and_evaluate(const TrainConfig& cfg, const Corpus& train,
                               const Corpus& eval_corpus, const Corpus* dev) {
    cfg.validate();
    return cfg.precision == "f32" ? train_and_evaluate_impl<float>(cfg, train, eval_corpus, dev)
                                  : train_and_evaluate_impl<double>(cfg, train, eval_corpus, dev);
}

EvalReport evaluate_checkpoint(const std::string& ckpt_path, const Corpus& corpus,
                               const TrainConfig& eval_cfg, const std::string& scores_out,
                               const std::string& report_out) {
    const auto meta = read_checkpoint_meta(ckpt_path);
    return meta.precision == "f32"
               ? evaluate_checkpoint_impl<float>(ckpt_path, meta, corpus, eval_cfg, scores_out,
                                                 report_out)
               : evaluate_checkpoint_impl<double>(ckpt_path, meta, corpus, eval_cfg, scores_out,
                                                  report_out);
}

std::vector<SweepRow> sweep(const std::string& axis, const std::vector<double>& values,
                            const TrainConfig& cfg, const Corpus& train,
                            const Corpus& eval_corpus) {
    if (axis != "mask_ratio" && axis != "alpha") {
        throw std::invalid_argument("sweep: axis must be mask_ratio or alpha, got '" + axis + "'");
    }
    if (values.empty()) throw std::invalid_argument("sweep: no values given");
    std::vector<SweepRow> rows;
    for (double value : values) {
        TrainConfig point = cfg;
        if (axis == "mask_ratio") {
            point.mask_ratio = value;
        } else {
            point.alpha = value;
        }
        point.validate();  // rejects invalid axis values up front
        const auto summary = train_and_evaluate(point, train, eval_corpus, nullptr);
        SweepRow row;
        row.value = value;
        row.eer = summary.mean_eer;
        row.min_tdcf = summary.mean_tdcf;
        row.has_tdcf = summary.has_tdcf;
        rows.push_back(row);
    }
    return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("sweep: cannot open " + path + " for writing");
    os << "value,eer,min_tdcf\n";
    char buf[128];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof buf, "%.6g,%.6f,%.6f", row.value, row.eer, row.min_tdcf);
        os << buf << '\n';
    }
    if (!os) throw std::runtime_error("sweep: write to " + path + " failed");
}

}  // namespace gfl
