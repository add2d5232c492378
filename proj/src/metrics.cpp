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

#include "gflfad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace gfl {

namespace {

struct SplitScores {
    std::vector<double> genuine;
    std::vector<double> spoof;
};

SplitScores split_and_validate(const ScoreSet& scores, const char* op) {
    SplitScores out;
    for (const auto& e : scores.entries) {
        if (!std::isfinite(e.score)) {
            throw std::invalid_argument(std::string(op) + ": non-finite score for '" + e.utt_id +
                                        "'");
        }
        if (e.label == 1) {
            out.genuine.push_back(e.score);
        } else if (e.label == 0) {
            out.spoof.push_back(e.score);
        } else {
            throw std::invalid_argument(std::string(op) + ": unlabeled entry '" + e.utt_id + "'");
        }
    }
    if (out.genuine.empty() || out.spoof.empty()) {
        throw std::invalid_argument(std::string(op) + ": need at least one genuine and one spoof " +
                                    "score (got " + std::to_string(out.genuine.size()) + " / " +
                                    std::to_string(out.spoof.size()) + ")");
    }
    std::sort(out.genuine.begin(), out.genuine.end());
    std::sort(out.spoof.begin(), out.spoof.end());
    return out;
}

std::vector<double> distinct_thresholds(const SplitScores& s) {
    std::vector<double> t;
    t.reserve(s.genuine.size() + s.spoof.size());
    t.insert(t.end(), s.genuine.begin(), s.genuine.end());
    t.insert(t.end(), s.spoof.begin(), s.spoof.end());
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

double frr_at(const SplitScores& s, double t) {
    const auto below = std::lower_bound(s.genuine.begin(), s.genuine.end(), t) - s.genuine.begin();
    return static_cast<double>(below) / static_cast<double>(s.genuine.size());
}

double far_at(const SplitScores& s, double t) {
    const auto below = std::lower_bound(s.spoof.begin(), s.spoof.end(), t) - s.spoof.begin();
    return static_cast<double>(s.spoof.size() - below) / static_cast<double>(s.spoof.size());
}

}  // namespace

EerResult compute_eer(const ScoreSet& scores) {
    const auto s = split_and_validate(scores, "compute_eer");
    const auto thresholds = distinct_thresholds(s);

    // Operating points in threshold order, closed with a +inf sentinel where
    // everything is rejected. At the lowest threshold FRR = 0 and FAR = 1, so
    // FAR - FRR starts at 1 and is non-increasing; the crossing always exists.
    double prev_t = thresholds[0], prev_frr = 0.0, prev_far = 1.0;
    for (std::size_t j = 0; j <= thresholds.size(); ++j) {
        double t, frr, far;
        if (j < thresholds.size()) {
            t = thresholds[j];
            frr = frr_at(s, t);
            far = far_at(s, t);
        } else {
            t = std::numeric_limits<double>::infinity();
            frr = 1.0;
            far = 0.0;
        }
        const double d = far - frr;
        if (d == 0.0) return {frr, std::isinf(t) ? prev_t : t};
        if (d < 0.0) {
            const double prev_d = prev_far - prev_frr;
            const double lambda = prev_d / (prev_d - d);
            EerResult r;
            r.eer = prev_frr + lambda * (frr - prev_frr);
            r.threshold = std::isinf(t) ? prev_t : prev_t + lambda * (t - prev_t);
            return r;
        }
        prev_t = t;
        prev_frr = frr;
        prev_far = far;
    }
    return {1.0, prev_t};  // unreachable: the sentinel has d = -1
}

double compute_min_tdcf(const ScoreSet& scores, const TdcfCosts& costs) {
    if (!(costs.cm_miss > 0.0) || !(costs.cm_false_alarm > 0.0) ||
        !std::isfinite(costs.cm_miss) || !std::isfinite(costs.cm_false_alarm)) {
        throw std::invalid_argument("compute_min_tdcf: costs must be positive finite");
    }
    const auto s = split_and_validate(scores, "compute_min_tdcf");
    const double norm = std::min(costs.cm_miss, costs.cm_false_alarm);

    // -inf sentinel: accept everything (Pmiss 0, Pfa 1); +inf: reject
    // everything (Pmiss 1, Pfa 0).
    double best = std::min(costs.cm_false_alarm / norm, costs.cm_miss / norm);
    for (const double t : distinct_thresholds(s)) {
        const double cost = (costs.cm_miss * frr_at(s, t) + costs.cm_false_alarm * far_at(s, t)) / norm;
        best = std::min(best, cost);
    }
    return best;
}

ScoreSet read_scores(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("scores: cannot open " + path);
    ScoreSet out;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ss(line);
        ScoreEntry e;
        std::string extra;
        if (!(ss >> e.utt_id >> e.score) || (ss >> extra)) {
            throw std::runtime_error("scores: " + path + ":" + std::to_string(line_no) +
                                     ": malformed line '" + line + "'");
        }
        if (!std::isfinite(e.score)) {
            throw std::runtime_error("scores: " + path + ":" + std::to_string(line_no) +
                                     ": non-finite score");
        }
        if (!seen.insert(e.utt_id).second) {
            throw std::runtime_error("scores: " + path + ":" + std::to_string(line_no) +
                                     ": duplicate utterance id '" + e.utt_id + "'");
        }
        out.entries.push_back(std::move(e));
    }
    return out;
}

void write_scores(const ScoreSet& scores, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("scores: cannot open " + path + " for writing");
    char buf[64];
    for (const auto& e : scores.entries) {
        std::snprintf(buf, sizeof buf, "%.6f", e.score);
        os << e.utt_id << ' ' << buf << '\n';
    }
    if (!os) throw std::runtime_error("scores: write to " + path + " failed");
}

void write_metrics_csv(const std::vector<std::pair<std::string, double>>& rows,
                       const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("metrics: cannot open " + path + " for writing");
    os << "metric,value\n";
    char buf[64];
    for (const auto& [name, value] : rows) {
        std::snprintf(buf, sizeof buf, "%.6f", value);
        os << name << ',' << buf << '\n';
    }
    if (!os) throw std::runtime_error("metrics: write to " + path + " failed");
}

}  // namespace gfl
