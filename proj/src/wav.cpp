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

#include "gflfad/wav.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace gfl {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
}

[[noreturn]] void fail(const std::string& path, const std::string& why) {
    throw std::runtime_error("wav: " + path + ": " + why);
}

}  // namespace

Waveform read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        fail(path, "not a RIFF/WAVE file");
    }

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t sample_rate = 0;
    const unsigned char* data = nullptr;
    std::uint32_t data_len = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
        const std::uint32_t len = read_u32(bytes.data() + pos + 4);
        if (pos + 8 + len > bytes.size()) fail(path, "truncated chunk");
        const unsigned char* body = bytes.data() + pos + 8;
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (len < 16) fail(path, "fmt chunk too short");
            format = read_u16(body);
            channels = read_u16(body + 2);
            sample_rate = read_u32(body + 4);
            bits = read_u16(body + 14);
        } else if (std::memcmp(id, "data", 4) == 0) {
            data = body;
            data_len = len;
        }
        pos += 8 + len + (len & 1);  // chunks are word-aligned
    }
    if (format == 0) fail(path, "missing fmt chunk");
    if (data == nullptr) fail(path, "missing data chunk");
    if (channels != 1) fail(path, "expected mono, got " + std::to_string(channels) + " channels");

    Waveform w;
    w.sample_rate = static_cast<int>(sample_rate);
    if (format == kFormatPcm && bits == 16) {
        const std::size_t n = data_len / 2;
        w.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::int16_t s =
                static_cast<std::int16_t>(data[2 * i] | (data[2 * i + 1] << 8));
            w.samples[i] = static_cast<double>(s) / 32768.0;
        }
    } else if (format == kFormatFloat && bits == 32) {
        const std::size_t n = data_len / 4;
        w.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint32_t u = read_u32(data + 4 * i);
            float f;
            std::memcpy(&f, &u, 4);
            w.samples[i] = static_cast<double>(f);
        }
    } else {
        fail(path, "unsupported format " + std::to_string(format) + "/" + std::to_string(bits) +
                       "-bit (need 16-bit PCM or 32-bit float)");
    }
    return w;
}

void write_wav(const Waveform& w, const std::string& path) {
    const std::uint32_t n = static_cast<std::uint32_t>(w.samples.size());
    const std::uint32_t data_len = n * 4;
    std::vector<unsigned char> out;
    out.reserve(44 + data_len);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    put_u32(out, 36 + data_len);
    out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    put_u32(out, 16);
    put_u16(out, kFormatFloat);
    put_u16(out, 1);
    put_u32(out, static_cast<std::uint32_t>(w.sample_rate));
    put_u32(out, static_cast<std::uint32_t>(w.sample_rate) * 4);
    put_u16(out, 4);
    put_u16(out, 32);
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    put_u32(out, data_len);
    for (double s : w.samples) {
        const float f = static_cast<float>(s);
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        put_u32(out, u);
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(path, "cannot open for writing");
    os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!os) fail(path, "write failed");
}

}  // namespace gfl
