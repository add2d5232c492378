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

#include "gflfad/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace gfl {

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
    if (mask_ratio < 0.0 || mask_ratio >= 1.0) {
        throw std::invalid_argument("config: mask_ratio must lie in [0, 1)");
    }
    if (eval_mask_ratio >= 1.0) {
        throw std::invalid_argument("config: eval_mask_ratio must lie below 1");
    }
    if (alpha < 0.0) throw std::invalid_argument("config: alpha must be non-negative");
    if (disable_bn_branch && disable_crer_branch) {
        throw std::invalid_argument("config: at most one branch-disable flag may be set");
    }
    if (precision != "f32" && precision != "f64") {
        throw std::invalid_argument("config: precision must be f32 or f64, got '" + precision +
                                    "'");
    }
    if (seeds.empty()) throw std::invalid_argument("config: at least one seed required");
    mask_policy_enum();  // rejects unknown policies
    model_config().validate();
}

FrontendConfig TrainConfig::frontend_config() const {
    FrontendConfig f;
    f.sample_rate = sample_rate;
    f.mel_bands = static_cast<std::size_t>(mel_bands);
    f.window_s = window_s;
    f.hop_s = hop_s;
    f.fmax_hz = sample_rate / 2.0;
    return f;
}

ModelConfig TrainConfig::model_config() const {
    ModelConfig m;
    m.patch_h = static_cast<std::size_t>(patch_h);
    m.patch_w = static_cast<std::size_t>(patch_w);
    m.mae.enc_layers = static_cast<std::size_t>(enc_layers);
    m.mae.dec_layers = static_cast<std::size_t>(dec_layers);
    m.mae.embed_dim = static_cast<std::size_t>(embed_dim);
    m.mae.dec_dim = static_cast<std::size_t>(dec_dim);
    m.mae.heads = static_cast<std::size_t>(heads);
    m.mae.local_window = static_cast<std::size_t>(local_window);
    m.fusion.d_model = static_cast<std::size_t>(fusion_dim);
    m.fusion.heads = static_cast<std::size_t>(fusion_heads);
    m.fusion.blocks = static_cast<std::size_t>(fusion_blocks);
    m.disable_bn_branch = disable_bn_branch;
    m.disable_crer_branch = disable_crer_branch;
    return m;
}

MaskPolicy TrainConfig::mask_policy_enum() const {
    if (mask_policy == "unstructured") return MaskPolicy::unstructured;
    if (mask_policy == "time") return MaskPolicy::time;
    if (mask_policy == "freq") return MaskPolicy::freq;
    throw std::invalid_argument("config: unknown mask_policy '" + mask_policy + "'");
}

void apply_paper_profile(TrainConfig& cfg) {
    cfg.epochs = 100;
    cfg.batch_size = 16;
    cfg.lr_peak = 5e-6;
    cfg.alpha = 0.01;
    cfg.mask_ratio = 0.3;
    cfg.enc_layers = 12;
    cfg.dec_layers = 16;
    cfg.embed_dim = 768;
    cfg.dec_dim = 512;
    cfg.heads = 12;
    cfg.fusion_dim = 512;
    cfg.fusion_heads = 8;
    cfg.precision = "f32";
}

namespace {

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config: expected bool, got '" + v + "'");
}

std::vector<std::uint64_t> parse_seed_list(const std::string& v) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stoull(item));
    }
    if (out.empty()) throw std::invalid_argument("config: empty seed list");
    return out;
}

std::string seeds_to_string(const std::vector<std::uint64_t>& seeds) {
    std::string out;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(seeds[i]);
    }
    return out;
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void apply_config_kv(TrainConfig& c, const std::string& key, const std::string& value) {
    using Setter = std::function<void(TrainConfig&, const std::string&)>;
    static const std::map<std::string, Setter> setters = {
        {"epochs", [](TrainConfig& c, const std::string& v) { c.epochs = std::stoi(v); }},
        {"batch_size", [](TrainConfig& c, const std::string& v) { c.batch_size = std::stoi(v); }},
        {"lr_peak", [](TrainConfig& c, const std::string& v) { c.lr_peak = std::stod(v); }},
        {"lr_min", [](TrainConfig& c, const std::string& v) { c.lr_min = std::stod(v); }},
        {"weight_decay",
         [](TrainConfig& c, const std::string& v) { c.weight_decay = std::stod(v); }},
        {"adam_beta1", [](TrainConfig& c, const std::string& v) { c.adam_beta1 = std::stod(v); }},
        {"adam_beta2", [](TrainConfig& c, const std::string& v) { c.adam_beta2 = std::stod(v); }},
        {"adam_eps", [](TrainConfig& c, const std::string& v) { c.adam_eps = std::stod(v); }},
        {"alpha", [](TrainConfig& c, const std::string& v) { c.alpha = std::stod(v); }},
        {"disable_gar",
         [](TrainConfig& c, const std::string& v) { c.disable_gar = parse_bool(v); }},
        {"disable_bn_branch",
         [](TrainConfig& c, const std::string& v) { c.disable_bn_branch = parse_bool(v); }},
        {"disable_crer_branch",
         [](TrainConfig& c, const std::string& v) { c.disable_crer_branch = parse_bool(v); }},
        {"balanced_ce",
         [](TrainConfig& c, const std::string& v) { c.balanced_ce = parse_bool(v); }},
        {"mask_ratio", [](TrainConfig& c, const std::string& v) { c.mask_ratio = std::stod(v); }},
        {"mask_policy", [](TrainConfig& c, const std::string& v) { c.mask_policy = v; }},
        {"eval_mask_ratio",
         [](TrainConfig& c, const std::string& v) { c.eval_mask_ratio = std::stod(v); }},
        {"eval_mask_seed",
         [](TrainConfig& c, const std::string& v) { c.eval_mask_seed = std::stoull(v); }},
        {"enc_layers", [](TrainConfig& c, const std::string& v) { c.enc_layers = std::stoi(v); }},
        {"dec_layers", [](TrainConfig& c, const std::string& v) { c.dec_layers = std::stoi(v); }},
        {"embed_dim", [](TrainConfig& c, const std::string& v) { c.embed_dim = std::stoi(v); }},
        {"dec_dim", [](TrainConfig& c, const std::string& v) { c.dec_dim = std::stoi(v); }},
        {"heads", [](TrainConfig& c, const std::string& v) { c.heads = std::stoi(v); }},
        {"local_window",
         [](TrainConfig& c, const std::string& v) { c.local_window = std::stoi(v); }},
        {"fusion_dim", [](TrainConfig& c, const std::string& v) { c.fusion_dim = std::stoi(v); }},
        {"fusion_heads",
         [](TrainConfig& c, const std::string& v) { c.fusion_heads = std::stoi(v); }},
        {"fusion_blocks",
         [](TrainConfig& c, const std::string& v) { c.fusion_blocks = std::stoi(v); }},
        {"patch_h", [](TrainConfig& c, const std::string& v) { c.patch_h = std::stoi(v); }},
        {"patch_w", [](TrainConfig& c, const std::string& v) { c.patch_w = std::stoi(v); }},
        {"freeze_encoder",
         [](TrainConfig& c, const std::string& v) { c.freeze_encoder = parse_bool(v); }},
        {"freeze_decoder",
         [](TrainConfig& c, const std::string& v) { c.freeze_decoder = parse_bool(v); }},
        {"sample_rate",
         [](TrainConfig& c, const std::string& v) { c.sample_rate = std::stoi(v); }},
        {"mel_bands", [](TrainConfig& c, const std::string& v) { c.mel_bands = std::stoi(v); }},
        {"window_s", [](TrainConfig& c, const std::string& v) { c.window_s = std::stod(v); }},
        {"hop_s", [](TrainConfig& c, const std::string& v) { c.hop_s = std::stod(v); }},
        {"fixed_samples",
         [](TrainConfig& c, const std::string& v) { c.fixed_samples = std::stoi(v); }},
        {"seeds", [](TrainConfig& c, const std::string& v) { c.seeds = parse_seed_list(v); }},
        {"precision", [](TrainConfig& c, const std::string& v) { c.precision = v; }},
        {"dev_every", [](TrainConfig& c, const std::string& v) { c.dev_every = std::stoi(v); }},
        {"out_dir", [](TrainConfig& c, const std::string& v) { c.out_dir = v; }},
        {"save_checkpoints",
         [](TrainConfig& c, const std::string& v) { c.save_checkpoints = parse_bool(v); }},
        {"check_finite",
         [](TrainConfig& c, const std::string& v) { c.check_finite = parse_bool(v); }},
        {"tdcf_c1", [](TrainConfig& c, const std::string& v) { c.tdcf_c1 = std::stod(v); }},
        {"tdcf_c2", [](TrainConfig& c, const std::string& v) { c.tdcf_c2 = std::stod(v); }},
    };
    auto it = setters.find(key);
    if (it == setters.end()) throw std::invalid_argument("config: unknown key '" + key + "'");
    it->second(c, value);
}

namespace {

TrainConfig parse_config_stream(std::istream& in, const std::string& source, TrainConfig base) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config: " + source + ":" + std::to_string(line_no) +
                                     ": expected key=value, got '" + line + "'");
        }
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        try {
            apply_config_kv(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const std::exception& e) {
            throw std::runtime_error("config: " + source + ":" + std::to_string(line_no) + ": " +
                                     e.what());
        }
    }
    return base;
}

}  // namespace

TrainConfig parse_config_file(const std::string& path, TrainConfig base) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    return parse_config_stream(in, path, std::move(base));
}

TrainConfig parse_config_text(const std::string& text, TrainConfig base) {
    std::istringstream in(text);
    return parse_config_stream(in, "<text>", std::move(base));
}

std::string serialize_config(const TrainConfig& c) {
    std::string out;
    auto kv = [&out](const std::string& k, const std::string& v) { out += k + "=" + v + "\n"; };
    kv("epochs", std::to_string(c.epochs));
    kv("batch_size", std::to_string(c.batch_size));
    kv("lr_peak", fmt_double(c.lr_peak));
    kv("lr_min", fmt_double(c.lr_min));
    kv("weight_decay", fmt_double(c.weight_decay));
    kv("adam_beta1", fmt_double(c.adam_beta1));
    kv("adam_beta2", fmt_double(c.adam_beta2));
    kv("adam_eps", fmt_double(c.adam_eps));
    kv("alpha", fmt_double(c.alpha));
    kv("disable_gar", c.disable_gar ? "true" : "false");
    kv("disable_bn_branch", c.disable_bn_branch ? "true" : "false");
    kv("disable_crer_branch", c.disable_crer_branch ? "true" : "false");
    kv("balanced_ce", c.balanced_ce ? "true" : "false");
    kv("mask_ratio", fmt_double(c.mask_ratio));
    kv("mask_policy", c.mask_policy);
    kv("eval_mask_ratio", fmt_double(c.eval_mask_ratio));
    kv("eval_mask_seed", std::to_string(c.eval_mask_seed));
    kv("enc_layers", std::to_string(c.enc_layers));
    kv("dec_layers", std::to_string(c.dec_layers));
    kv("embed_dim", std::to_string(c.embed_dim));
    kv("dec_dim", std::to_string(c.dec_dim));
    kv("heads", std::to_string(c.heads));
    kv("local_window", std::to_string(c.local_window));
    kv("fusion_dim", std::to_string(c.fusion_dim));
    kv("fusion_heads", std::to_string(c.fusion_heads));
    kv("fusion_blocks", std::to_string(c.fusion_blocks));
    kv("patch_h", std::to_string(c.patch_h));
    kv("patch_w", std::to_string(c.patch_w));
    kv("freeze_encoder", c.freeze_encoder ? "true" : "false");
    kv("freeze_decoder", c.freeze_decoder ? "true" : "false");
    kv("sample_rate", std::to_string(c.sample_rate));
    kv("mel_bands", std::to_string(c.mel_bands));
    kv("window_s", fmt_double(c.window_s));
    kv("hop_s", fmt_double(c.hop_s));
    kv("fixed_samples", std::to_string(c.fixed_samples));
    kv("seeds", seeds_to_string(c.seeds));
    kv("precision", c.precision);
    kv("dev_every", std::to_string(c.dev_every));
    kv("out_dir", c.out_dir);
    kv("save_checkpoints", c.save_checkpoints ? "true" : "false");
    kv("check_finite", c.check_finite ? "true" : "false");
    kv("tdcf_c1", fmt_double(c.tdcf_c1));
    kv("tdcf_c2", fmt_double(c.tdcf_c2));
    return out;
}

}  // namespace gfl
