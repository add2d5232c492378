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
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "gflfad/frontend.hpp"
#include "gflfad/rng.hpp"
#include "gflfad/wav.hpp"

using gfl::FrontendConfig;
using gfl::fix_length;
using gfl::log_mel;
using gfl::MelSpectrogram;
using gfl::Rng;
using gfl::Waveform;

namespace {

Waveform sine(double freq_hz, std::size_t n, int sr = 16000, double amp = 0.5) {
    Waveform w;
    w.sample_rate = sr;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        w.samples[i] =
            amp * std::sin(2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / sr);
    }
    return w;
}

}  // namespace

TEST_CASE("64600 samples at 16 kHz give a 128 x 402 spectrogram") {
    FrontendConfig cfg;
    auto spec = log_mel(sine(440.0, 64600), cfg);
    CHECK(spec.mel_bands == 128);
    CHECK(spec.frames == 402);  // 1 + floor((64600 - 400) / 160)
    CHECK(spec.values.size() == 128 * 402);
}

TEST_CASE("all-zero waveform maps every cell to log(floor)") {
    FrontendConfig cfg;
    Waveform w;
    w.samples.assign(1600, 0.0);
    auto spec = log_mel(w, cfg);
    const double expect = std::log(cfg.log_floor);
    for (double v : spec.values) CHECK(v == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("1 kHz tone peaks in the mel band nearest 1 kHz") {
    FrontendConfig cfg;
    auto spec = log_mel(sine(1000.0, 16000), cfg);

    // Independent oracle: recompute the filterbank center frequencies straight
    // from the HTK formula and find the band whose center is nearest 1 kHz.
    const double mel_hi = 2595.0 * std::log10(1.0 + cfg.fmax_hz / 700.0);
    std::size_t nearest = 0;
    double best = 1e18;
    for (std::size_t b = 0; b < cfg.mel_bands; ++b) {
        const double center_mel = mel_hi * static_cast<double>(b + 1) / 129.0;
        const double center_hz = 700.0 * (std::pow(10.0, center_mel / 2595.0) - 1.0);
        if (std::abs(center_hz - 1000.0) < best) {
            best = std::abs(center_hz - 1000.0);
            nearest = b;
        }
    }

    for (std::size_t f = 0; f < spec.frames; ++f) {
        std::size_t argmax = 0;
        for (std::size_t b = 1; b < spec.mel_bands; ++b) {
            if (spec.at(b, f) > spec.at(argmax, f)) argmax = b;
        }
        CHECK(argmax == nearest);
    }
}

TEST_CASE("fix_length truncates, passes through, and tiles") {
    Rng rng(31);
    Waveform w;
    w.samples.resize(100000);
    for (auto& s : w.samples) s = rng.uniform(-1, 1);

    auto t = fix_length(w, 64600);
    CHECK(t.samples.size() == 64600);
    for (std::size_t i : {0u, 100u, 64599u}) CHECK(t.samples[i] == w.samples[i]);

    w.samples.resize(64600);
    auto same = fix_length(w, 64600);
    CHECK(same.samples == w.samples);

    w.samples.resize(30000);
    auto tiled = fix_length(w, 64600);
    CHECK(tiled.samples.size() == 64600);
    CHECK(tiled.samples[30000] == w.samples[0]);
    CHECK(tiled.samples[59999] == w.samples[29999]);
    CHECK(tiled.samples[60000] == w.samples[0]);
    CHECK(tiled.samples[64599] == w.samples[4599]);
}

TEST_CASE("scaling the waveform shifts log-mel cells by 2 log c") {
    FrontendConfig cfg;
    auto w = sine(700.0, 8000);
    const double c = 3.7;
    Waveform scaled = w;
    for (auto& s : scaled.samples) s *= c;
    auto a = log_mel(w, cfg);
    auto b = log_mel(scaled, cfg);
    const double shift = 2.0 * std::log(c);
    std::size_t checked = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        // The floor perturbs the shift by roughly floor/mel, so "above floor
        // dominance" here means mel/floor > e^22 ~ 3.6e9.
        if (a.values[i] > std::log(cfg.log_floor) + 22.0) {
            CHECK(std::abs((b.values[i] - a.values[i]) - shift) < 1e-9);
            ++checked;
        }
    }
    CHECK(checked > 40);
}

TEST_CASE("frame-count formula holds across geometries") {
    Rng rng(32);
    for (int trial = 0; trial < 20; ++trial) {
        FrontendConfig cfg;
        cfg.mel_bands = 8;
        cfg.window_s = (5.0 + static_cast<double>(rng.uniform_int(30))) / 1000.0;
        cfg.hop_s = (2.0 + static_cast<double>(rng.uniform_int(15))) / 1000.0;
        const std::size_t len = cfg.window_samples() + rng.uniform_int(20000);
        auto spec = log_mel(sine(300.0, len), cfg);
        CHECK(spec.frames == 1 + (len - cfg.window_samples()) / cfg.hop_samples());
    }
}

TEST_CASE("log_mel is bit-deterministic") {
    FrontendConfig cfg;
    auto w = sine(523.0, 12000);
    auto a = log_mel(w, cfg);
    auto b = log_mel(w, cfg);
    CHECK(a.values == b.values);
}

TEST_CASE("frontend input validation") {
    FrontendConfig cfg;
    Waveform short_w = sine(100.0, 100);
    CHECK_THROWS_AS(log_mel(short_w, cfg), std::invalid_argument);

    Waveform nan_w = sine(100.0, 1000);
    nan_w.samples[5] = std::nan("");
    CHECK_THROWS_AS(log_mel(nan_w, cfg), std::invalid_argument);

    Waveform wrong_rate = sine(100.0, 1000, 8000);
    CHECK_THROWS_AS(log_mel(wrong_rate, cfg), std::invalid_argument);

    Waveform empty;
    CHECK_THROWS_AS(fix_length(empty, 100), std::invalid_argument);
}

TEST_CASE("float WAV round-trips through disk") {
    Rng rng(33);
    Waveform w;
    w.sample_rate = 16000;
    w.samples.resize(5000);
    for (auto& s : w.samples) s = static_cast<float>(rng.uniform(-1, 1));  // float-exact values

    const std::string path = "test_frontend_roundtrip.wav";
    gfl::write_wav(w, path);
    auto r = gfl::read_wav(path);
    std::remove(path.c_str());

    REQUIRE(r.samples.size() == w.samples.size());
    CHECK(r.sample_rate == 16000);
    for (std::size_t i = 0; i < r.samples.size(); ++i) CHECK(r.samples[i] == w.samples[i]);
}

TEST_CASE("16-bit PCM WAV is read and scaled") {
    // Hand-built header: mono 16-bit PCM, 4 samples at 16 kHz.
    const std::int16_t samples[4] = {0, 16384, -16384, 32767};
    std::vector<unsigned char> bytes = {'R', 'I', 'F', 'F', 44, 0, 0, 0, 'W', 'A', 'V', 'E',
                                        'f', 'm', 't', ' ', 16, 0, 0, 0};
    auto u16 = [&](std::uint16_t v) {
        bytes.push_back(v & 0xff);
        bytes.push_back((v >> 8) & 0xff);
    };
    auto u32 = [&](std::uint32_t v) {
        u16(v & 0xffff);
        u16((v >> 16) & 0xffff);
    };
    u16(1);      // PCM
    u16(1);      // mono
    u32(16000);  // rate
    u32(32000);  // byte rate
    u16(2);      // block align
    u16(16);     // bits
    bytes.insert(bytes.end(), {'d', 'a', 't', 'a'});
    u32(8);
    for (std::int16_t s : samples) u16(static_cast<std::uint16_t>(s));

    const std::string path = "test_frontend_pcm16.wav";
    {
        FILE* f = std::fopen(path.c_str(), "wb");
        REQUIRE(f != nullptr);
        std::fwrite(bytes.data(), 1, bytes.size(), f);
        std::fclose(f);
    }
    auto w = gfl::read_wav(path);
    std::remove(path.c_str());
    REQUIRE(w.samples.size() == 4);
    CHECK(w.samples[0] == 0.0);
    CHECK(w.samples[1] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(w.samples[2] == doctest::Approx(-0.5).epsilon(1e-9));
    CHECK(w.samples[3] == doctest::Approx(32767.0 / 32768.0).epsilon(1e-9));
}
