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

#include "gflfad/frontend.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace gfl {

std::size_t FrontendConfig::window_samples() const {
    return static_cast<std::size_t>(std::lround(window_s * sample_rate));
}

std::size_t FrontendConfig::hop_samples() const {
    return static_cast<std::size_t>(std::lround(hop_s * sample_rate));
}

std::size_t FrontendConfig::fft_size() const {
    std::size_t n = 1;
    while (n < window_samples()) n <<= 1;
    return n;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace detail {

void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) {
        throw std::invalid_argument("fft_radix2: size " + std::to_string(n) +
                                    " is not a power of two");
    }
    // Bit-reversal permutation.
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const auto u = a[i + j];
                const auto v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(n);
        for (auto& x : a) x *= inv;
    }
}

}  // namespace detail

std::vector<double> mel_filterbank(std::size_t n_mels, std::size_t n_fft, int sample_rate,
                                   double fmin_hz, double fmax_hz) {
    const std::size_t bins = n_fft / 2 + 1;
    const double mel_lo = hz_to_mel(fmin_hz);
    const double mel_hi = hz_to_mel(fmax_hz);
    std::vector<double> points(n_mels + 2);
    for (std::size_t j = 0; j < points.size(); ++j) {
        points[j] = mel_lo + (mel_hi - mel_lo) * static_cast<double>(j) /
                                 static_cast<double>(n_mels + 1);
    }
    std::vector<double> weights(n_mels * bins, 0.0);
    for (std::size_t k = 0; k < bins; ++k) {
        const double mel =
            hz_to_mel(static_cast<double>(k) * sample_rate / static_cast<double>(n_fft));
        for (std::size_t b = 0; b < n_mels; ++b) {
            const double left = points[b], center = points[b + 1], right = points[b + 2];
            if (mel <= left || mel >= right) continue;
            weights[b * bins + k] =
                (mel <= center) ? (mel - left) / (center - left) : (right - mel) / (right - center);
        }
    }
    return weights;
}

MelSpectrogram log_mel(const Waveform& w, const FrontendConfig& cfg) {
    if (w.samples.empty()) throw std::invalid_argument("log_mel: empty waveform");
    if (w.sample_rate != cfg.sample_rate) {
        throw std::invalid_argument("log_mel: waveform sample rate " +
                                    std::to_string(w.sample_rate) + " != configured " +
                                    std::to_string(cfg.sample_rate) + " (resampling unsupported)");
    }
    for (double s : w.samples) {
        if (!std::isfinite(s)) throw std::invalid_argument("log_mel: non-finite sample");
    }
    const std::size_t win = cfg.window_samples();
    const std::size_t hop = cfg.hop_samples();
    const std::size_t nfft = cfg.fft_size();
    if (w.samples.size() < win) {
        throw std::invalid_argument("log_mel: waveform of " + std::to_string(w.samples.size()) +
                                    " samples is shorter than one window of " + std::to_string(win));
    }
    const std::size_t frames = 1 + (w.samples.size() - win) / hop;
    const std::size_t bins = nfft / 2 + 1;

    std::vector<double> hann(win);
    for (std::size_t i = 0; i < win; ++i) {
        hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                       static_cast<double>(win));
    }
    const std::vector<double> fbank =
        mel_filterbank(cfg.mel_bands, nfft, cfg.sample_rate, cfg.fmin_hz, cfg.fmax_hz);

    MelSpectrogram out;
    out.mel_bands = cfg.mel_bands;
    out.frames = frames;
    out.frame_hop = cfg.hop_s;
    out.frame_window = cfg.window_s;
    out.values.assign(cfg.mel_bands * frames, 0.0);

    std::vector<std::complex<double>> buf(nfft);
    std::vector<double> power(bins);
    for (std::size_t f = 0; f < frames; ++f) {
        const double* src = w.samples.data() + f * hop;
        for (std::size_t i = 0; i < win; ++i) buf[i] = src[i] * hann[i];
        for (std::size_t i = win; i < nfft; ++i) buf[i] = 0.0;
        detail::fft_radix2(buf, false);
        for (std::size_t k = 0; k < bins; ++k) power[k] = std::norm(buf[k]);
        for (std::size_t b = 0; b < cfg.mel_bands; ++b) {
            double acc = 0.0;
            const double* row = fbank.data() + b * bins;
            for (std::size_t k = 0; k < bins; ++k) acc += row[k] * power[k];
            out.values[b * frames + f] = std::log(acc + cfg.log_floor);
        }
    }
    return out;
}

Waveform fix_length(const Waveform& w, std::size_t target) {
    if (w.samples.empty()) throw std::invalid_argument("fix_length: empty waveform");
    if (target == 0) throw std::invalid_argument("fix_length: target must be positive");
    Waveform out;
    out.sample_rate = w.sample_rate;
    if (w.samples.size() >= target) {
        out.samples.assign(w.samples.begin(), w.samples.begin() + static_cast<long>(target));
        return out;
    }
    out.samples.resize(target);
    for (std::size_t i = 0; i < target; ++i) out.samples[i] = w.samples[i % w.samples.size()];
    return out;
}

}  // namespace gfl
