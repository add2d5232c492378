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

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gflfad/frontend.hpp"

// Protocol-file ingestion and the deterministic synthetic corpus used for
// desk-scale training. Synthetic genuine utterances are harmonic tones with
// slow vibrato plus noise at 30 dB SNR; spoofs run the same construction
// through a deliberately crude artifact so a tiny model can separate the
// classes. The default class ratio mirrors the roughly 1:9 imbalance of the
// real protocol so spoof-only batches occur in training.

namespace gfl {

struct ProtocolRecord {
    std::string speaker_id;
    std::string utterance_id;
    std::string attack_id;  // "-" when none
    bool bonafide = false;

    int label() const { return bonafide ? 1 : 0; }  // 1 = genuine
};

// Five whitespace-separated fields per non-empty line:
//   SPEAKER UTT_ID - ATTACK KEY      with KEY in {bonafide, spoof}.
std::vector<ProtocolRecord> parse_protocol(std::istream& in, const std::string& source_name);
std::vector<ProtocolRecord> parse_protocol_file(const std::string& path);
std::string serialize_protocol(const std::vector<ProtocolRecord>& records);

struct LabeledUtterance {
    std::string utt_id;
    Waveform wave;
    int label = 0;
};

using Corpus = std::vector<LabeledUtterance>;

enum class SpoofArtifact { spectral_notch, phase_jump, harmonic_clip };

SpoofArtifact artifact_from_string(const std::string& name);
std::string artifact_to_string(SpoofArtifact artifact);

// The spectral_notch artifact zeroes this frequency band (a block of roughly
// 16 mel bands at the default frontend).
inline constexpr double kNotchLowHz = 2000.0;
inline constexpr double kNotchHighHz = 3000.0;

struct SynthConfig {
    std::size_t n_genuine = 20;
    std::size_t n_spoof = 180;
    double duration_s = 4.0375;  // 64,600 samples at 16 kHz
    std::uint64_t seed = 1;
    SpoofArtifact artifact = SpoofArtifact::spectral_notch;
    int sample_rate = 16000;
};

// Ids are SYN_G_<k> / SYN_S_<k>; fully determined by cfg.seed, per-utterance,
// so the corpus is identical regardless of generation order.
Corpus synth_corpus(const SynthConfig& cfg);

struct Batch {
    std::vector<std::size_t> index;  // positions in the source corpus
    std::vector<std::string> ids;
    std::vector<int> labels;
    std::vector<Waveform> waves;  // fixed-length
};

// Seeded shuffle per (seed, epoch); the last short batch is kept. Waveforms
// are fixed to `fixed_len` samples via fix_length.
std::vector<Batch> make_batches(const Corpus& corpus, std::size_t batch_size, std::uint64_t seed,
                                std::size_t epoch, std::size_t fixed_len = 64600);

// CSV with the header "utterance_id,label,path"; paths runs parallel to the
// corpus (empty string for in-memory corpora).
void write_manifest_csv(const Corpus& corpus, const std::vector<std::string>& paths,
                        const std::string& out_path);

}  // namespace gfl
