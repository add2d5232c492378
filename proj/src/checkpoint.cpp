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

#include "gflfad/checkpoint.hpp"

#include <bit>
#include <cstring>

namespace gfl::ckpt {

namespace {

constexpr bool kNativeLe = std::endian::native == std::endian::little;

template <typename U>
void put_le(std::ostream& os, U v) {
    unsigned char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename U>
U get_le(std::istream& is) {
    unsigned char buf[sizeof(U)];
    is.read(reinterpret_cast<char*>(buf), sizeof(U));
    if (!is) fail("truncated checkpoint stream");
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
    return v;
}

}  // namespace

void fail(const std::string& msg) { throw std::runtime_error("checkpoint: " + msg); }

void put_u8(std::ostream& os, std::uint8_t v) { put_le(os, v); }
void put_u16(std::ostream& os, std::uint16_t v) { put_le(os, v); }
void put_u32(std::ostream& os, std::uint32_t v) { put_le(os, v); }
void put_u64(std::ostream& os, std::uint64_t v) { put_le(os, v); }
std::uint8_t get_u8(std::istream& is) { return get_le<std::uint8_t>(is); }
std::uint16_t get_u16(std::istream& is) { return get_le<std::uint16_t>(is); }
std::uint32_t get_u32(std::istream& is) { return get_le<std::uint32_t>(is); }
std::uint64_t get_u64(std::istream& is) { return get_le<std::uint64_t>(is); }

void put_array(std::ostream& os, const float* data, std::size_t n) {
    if constexpr (kNativeLe) {
        os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 4));
    } else {
        for (std::size_t i = 0; i < n; ++i) put_le(os, std::bit_cast<std::uint32_t>(data[i]));
    }
}

void put_array(std::ostream& os, const double* data, std::size_t n) {
    if constexpr (kNativeLe) {
        os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 8));
    } else {
        for (std::size_t i = 0; i < n; ++i) put_le(os, std::bit_cast<std::uint64_t>(data[i]));
    }
}

void get_array(std::istream& is, float* data, std::size_t n) {
    if constexpr (kNativeLe) {
        is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * 4));
        if (!is) fail("truncated checkpoint stream");
    } else {
        for (std::size_t i = 0; i < n; ++i) data[i] = std::bit_cast<float>(get_le<std::uint32_t>(is));
    }
}

void get_array(std::istream& is, double* data, std::size_t n) {
    if constexpr (kNativeLe) {
        is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * 8));
        if (!is) fail("truncated checkpoint stream");
    } else {
        for (std::size_t i = 0; i < n; ++i)
            data[i] = std::bit_cast<double>(get_le<std::uint64_t>(is));
    }
}

}  // namespace gfl::ckpt

namespace gfl {

CheckpointMeta read_checkpoint_meta(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) ckpt::fail("cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::string(magic, 8) != std::string(ckpt::kMagic, 8)) {
        ckpt::fail(path + " is not a checkpoint file");
    }
    CheckpointMeta meta;
    meta.version = ckpt::get_u32(is);
    const std::uint8_t dtype = ckpt::get_u8(is);
    meta.precision = dtype == 0 ? "f32" : "f64";
    meta.epoch = ckpt::get_u64(is);
    meta.seed = ckpt::get_u64(is);
    meta.global_step = ckpt::get_u64(is);
    meta.adam_step = ckpt::get_u64(is);
    const std::uint32_t cfg_len = ckpt::get_u32(is);
    meta.config_text.resize(cfg_len);
    is.read(meta.config_text.data(), cfg_len);
    if (!is) ckpt::fail("truncated checkpoint " + path);
    return meta;
}

}  // namespace gfl
