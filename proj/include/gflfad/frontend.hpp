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

#include <complex>
#include <cstddef>
#include <vector>

// Log-mel frontend. Conventions pinned here because upstream descriptions of
// the feature pipeline leave them open: Hann window, FFT size = next power of
// two >= window length, power spectrum, HTK mel scale with triangles linear in
// mel, natural log with an additive floor of 1e-10. No per-utterance
// normalization happens at this stage.

namespace gfl {

struct Waveform {
    std::vector<double> samples;
    int sample_rate = 16000;
};

struct FrontendConfig {
    int sample_rate = 16000;
    double window_s = 0.025;
    double hop_s = 0.010;
    std::size_t mel_bands = 128;
    double fmin_hz = 0.0;
    double fmax_hz = 8000.0;
    double log_floor = 1e-10;

    std::size_t window_samples() const;
    std::size_t hop_samples() const;
    std::size_t fft_size() const;  // next power of two >= window_samples()
};

struct MelSpectrogram {
    std::vector<double> values;  // row-major [mel_bands x frames]
    std::size_t mel_bands = 0;
    std::size_t frames = 0;
    double frame_hop = 0.010;
    double frame_window = 0.025;

    double at(std::size_t band, std::size_t frame) const { return values[band * frames + frame]; }
};

// log(mel(|STFT|^2) + floor). Throws if the waveform is shorter than one
// window, contains non-finite samples, or has a mismatched sample rate
// (resampling is out of scope).
MelSpectrogram log_mel(const Waveform& w, const FrontendConfig& cfg);

// Truncates to the first `target` samples, or tiles the waveform cyclically
// until the target length is reached.
Waveform fix_length(const Waveform& w, std::size_t target);

double hz_to_mel(double hz);   // HTK: 2595 * log10(1 + f/700)
double mel_to_hz(double mel);

// Triangular filterbank, row-major [n_mels x (n_fft/2 + 1)]. Triangles are
// linear in mel with unit peak.
std::vector<double> mel_filterbank(std::size_t n_mels, std::size_t n_fft, int sample_rate,
                                   double fmin_hz, double fmax_hz);

namespace detail {
// In-place iterative radix-2 FFT; size must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& a, bool inverse);
}  // namespace detail

}  // namespace gfl
