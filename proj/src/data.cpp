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

#include "gflfad/data.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "gflfad/rng.hpp"

namespace gfl {

std::vector<ProtocolRecord> parse_protocol(std::istream& in, const std::string& source_name) {
    std::vector<ProtocolRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ss(line);
        std::string speaker, utt, unused, attack, key, extra;
        if (!(ss >> speaker >> utt >> unused >> attack >> key) || (ss >> extra)) {
            throw std::runtime_error("protocol: " + source_name + ":" + std::to_string(line_no) +
                                     ": expected 5 fields, got '" + line + "'");
        }
        ProtocolRecord rec;
        rec.speaker_id = speaker;
        rec.utterance_id = utt;
        rec.attack_id = attack;
        if (key == "bonafide") {
            rec.bonafide = true;
        } else if (key == "spoof") {
            rec.bonafide = false;
        } else {
            throw std::runtime_error("protocol: " + source_name + ":" + std::to_string(line_no) +
                                     ": unknown key '" + key + "'");
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<ProtocolRecord> parse_protocol_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("protocol: cannot open " + path);
    return parse_protocol(in, path);
}

std::string serialize_protocol(const std::vector<ProtocolRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += r.speaker_id + " " + r.utterance_id + " - " + r.attack_id + " " +
               (r.bonafide ? "bonafide" : "spoof") + "\n";
    }
    return out;
}

SpoofArtifact artifact_from_string(const std::string& name) {
    if (name == "spectral_notch") return SpoofArtifact::spectral_notch;
    if (name == "phase_jump") return SpoofArtifact::phase_jump;
    if (name == "harmonic_clip") return SpoofArtifact::harmonic_clip;
    throw std::invalid_argument("synth: unknown spoof artifact '" + name + "'");
}

std::string artifact_to_string(SpoofArtifact artifact) {
    switch (artifact) {
        case SpoofArtifact::spectral_notch: return "spectral_notch";
        case SpoofArtifact::phase_jump: return "phase_jump";
        case SpoofArtifact::harmonic_clip: return "harmonic_clip";
    }
    return "?";
}

namespace {

void peak_normalize(std::vector<double>& s) {
    double peak = 0.0;
    for (double v : s) peak = std::max(peak, std::abs(v));
    if (peak > 0.0) {
        const double g = 0.95 / peak;
        for (double& v : s) v *= g;
    }
}

// Harmonic tone with slow vibrato plus white noise at 30 dB SNR.
std::vector<double> genuine_signal(std::size_t n, int sr, Rng& rng) {
    const double f0 = rng.uniform(100.0, 300.0);
    const std::size_t harmonics = 3 + rng.uniform_int(3);  // 3..5
    const double vib_rate = rng.uniform(4.0, 6.0);
    const double vib_depth = 0.01;
    std::vector<double> amp(harmonics), phase(harmonics);
    for (std::size_t h = 0; h < harmonics; ++h) {
        amp[h] = rng.uniform(0.7, 1.0) / static_cast<double>(h + 1);
        phase[h] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    std::vector<double> s(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sr;
        // Instantaneous frequency f0 * (1 + depth * cos(2 pi r t)).
        const double theta = 2.0 * std::numbers::pi * f0 * t +
                             (f0 * vib_depth / vib_rate) * std::sin(2.0 * std::numbers::pi *
                                                                    vib_rate * t);
        double v = 0.0;
        for (std::size_t h = 0; h < harmonics; ++h) {
            v += amp[h] * std::sin(static_cast<double>(h + 1) * theta + phase[h]);
        }
        s[i] = v;
    }
    double power = 0.0;
    for (double v : s) power += v * v;
    power /= static_cast<double>(n);
    const double noise_sigma = std::sqrt(power * 1e-3);  // SNR 30 dB
    for (double& v : s) v += noise_sigma * rng.normal();
    return s;
}

// Zeroes the FFT bins of [kNotchLowHz, kNotchHighHz] on a zero-padded
// power-of-two buffer, then truncates back.
void apply_spectral_notch(std::vector<double>& s, int sr) {
    std::size_t n = 1;
    while (n < s.size()) n <<= 1;
    std::vector<std::complex<double>> buf(n, 0.0);
    for (std::size_t i = 0; i < s.size(); ++i) buf[i] = s[i];
    detail::fft_radix2(buf, false);
    const double bin_hz = static_cast<double>(sr) / static_cast<double>(n);
    for (std::size_t k = 0; k <= n / 2; ++k) {
        const double f = static_cast<double>(k) * bin_hz;
        if (f >= kNotchLowHz && f <= kNotchHighHz) {
            buf[k] = 0.0;
            if (k > 0 && k < n / 2) buf[n - k] = 0.0;
        }
    }
    detail::fft_radix2(buf, true);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = buf[i].real();
}

// Sign discontinuities roughly every half second.
void apply_phase_jump(std::vector<double>& s, int sr, Rng& rng) {
    double sign = 1.0;
    std::size_t next = static_cast<std::size_t>(sr * rng.uniform(0.4, 0.6));
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i >= next) {
            sign = -sign;
            next += static_cast<std::size_t>(sr * rng.uniform(0.4, 0.6));
        }
        s[i] *= sign;
    }
}

void apply_harmonic_clip(std::vector<double>& s) {
    double peak = 0.0;
    for (double v : s) peak = std::max(peak, std::abs(v));
    const double c = 0.55 * peak;
    for (double& v : s) v = std::clamp(v, -c, c);
}

}  // namespace

Corpus synth_corpus(const SynthConfig& cfg) {
    const std::size_t n = static_cast<std::size_t>(std::lround(cfg.duration_s * cfg.sample_rate));
    if (n == 0) throw std::invalid_argument("synth: duration too short");
    Corpus out;
    out.reserve(cfg.n_genuine + cfg.n_spoof);
    for (std::size_t k = 0; k < cfg.n_genuine; ++k) {
        Rng rng(mix_seed(cfg.seed, 0x47u, k));
        LabeledUtterance u;
        u.utt_id = "SYN_G_" + std::to_string(k);
        u.label = 1;
        u.wave.sample_rate = cfg.sample_rate;
        u.wave.samples = genuine_signal(n, cfg.sample_rate, rng);
        peak_normalize(u.wave.samples);
        out.push_back(std::move(u));
    }
    for (std::size_t k = 0; k < cfg.n_spoof; ++k) {
        Rng rng(mix_seed(cfg.seed, 0x53u, k));
        LabeledUtterance u;
        u.utt_id = "SYN_S_" + std::to_string(k);
        u.label = 0;
        u.wave.sample_rate = cfg.sample_rate;
        u.wave.samples = genuine_signal(n, cfg.sample_rate, rng);
        switch (cfg.artifact) {
            case SpoofArtifact::spectral_notch:
                apply_spectral_notch(u.wave.samples, cfg.sample_rate);
                break;
            case SpoofArtifact::phase_jump:
                apply_phase_jump(u.wave.samples, cfg.sample_rate, rng);
                break;
            case SpoofArtifact::harmonic_clip:
                apply_harmonic_clip(u.wave.samples);
                break;
        }
        peak_normalize(u.wave.samples);
        out.push_back(std::move(u));
    }
    return out;
}

std::vector<Batch> make_batches(const Corpus& corpus, std::size_t batch_size, std::uint64_t seed,
                                std::size_t epoch, std::size_t fixed_len) {
    if (corpus.empty()) throw std::invalid_argument("make_batches: empty corpus");
    if (batch_size == 0) throw std::invalid_argument("make_batches: batch size must be positive");
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(seed, 0xBA7Cull, epoch));
    rng.shuffle(order.begin(), order.end());

    std::vector<Batch> out;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        Batch b;
        const std::size_t end = std::min(start + batch_size, order.size());
        for (std::size_t i = start; i < end; ++i) {
            const auto& u = corpus[order[i]];
            b.index.push_back(order[i]);
            b.ids.push_back(u.utt_id);
            b.labels.push_back(u.label);
            b.waves.push_back(fix_length(u.wave, fixed_len));
        }
        out.push_back(std::move(b));
    }
    return out;
}

void write_manifest_csv(const Corpus& corpus, const std::vector<std::string>& paths,
                        const std::string& out_path) {
    if (paths.size() != corpus.size()) {
        throw std::invalid_argument("manifest: " + std::to_string(paths.size()) + " paths for " +
                                    std::to_string(corpus.size()) + " utterances");
    }
    std::ofstream os(out_path);
    if (!os) throw std::runtime_error("manifest: cannot open " + out_path + " for writing");
    os << "utterance_id,label,path\n";
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        os << corpus[i].utt_id << ',' << corpus[i].label << ',' << paths[i] << '\n';
    }
    if (!os) throw std::runtime_error("manifest: write to " + out_path + " failed");
}

}  // namespace gfl
