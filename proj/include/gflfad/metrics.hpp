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

#include <string>
#include <utility>
#include <vector>

// Detection metrics over per-utterance scores. Predicting "genuine" means
// score >= threshold; FRR(t) is the fraction of genuine below t, FAR(t) the
// fraction of spoof at or above t. The EER is read off the crossing of the
// two rates, linearly interpolating between the adjacent operating points
// when no threshold hits it exactly; entries with equal scores move
// atomically because only distinct scores are candidate thresholds.
//
// The min t-DCF here is the normalized two-cost form
//   min over t of (c_miss * Pmiss(t) + c_fa * Pfa(t)) / min(c_miss, c_fa)
// with +-infinity sentinels included among the candidate thresholds. The
// cost constants are caller-supplied; there are no defaults.

namespace gfl {

struct ScoreEntry {
    std::string utt_id;
    double score = 0.0;
    int label = -1;  // 1 genuine, 0 spoof, -1 unknown
};

struct ScoreSet {
    std::vector<ScoreEntry> entries;
};

struct TdcfCosts {
    double cm_miss = 0.0;         // C1
    double cm_false_alarm = 0.0;  // C2
};

struct EerResult {
    double eer = 0.0;
    double threshold = 0.0;
};

EerResult compute_eer(const ScoreSet& scores);

double compute_min_tdcf(const ScoreSet& scores, const TdcfCosts& costs);

// Line format: "utterance_id<space>score". Writing uses six decimal places.
ScoreSet read_scores(const std::string& path);
void write_scores(const ScoreSet& scores, const std::string& path);

// CSV with the header "metric,value".
void write_metrics_csv(const std::vector<std::pair<std::string, double>>& rows,
                       const std::string& path);

}  // namespace gfl
