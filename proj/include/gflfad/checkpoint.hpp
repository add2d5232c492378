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
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gflfad/nn.hpp"
#include "gflfad/optimizer.hpp"

// Versioned binary checkpoint: a named-parameter table (name, shape, raw
// little-endian values) plus optimizer moments and run counters. Values are
// stored in the run's working precision; the header records which (f32 is the
// interchange default, f64 preserves bit-exact resume in 64-bit runs).
//
// All run randomness is derived statelessly from (seed, epoch, in-epoch
// counter), so the counters in the header are the complete RNG state.

namespace gfl {

struct CheckpointMeta {
    std::uint32_t version = 1;
    std::string precision;  // "f32" or "f64"
    std::uint64_t epoch = 0;
    std::uint64_t seed = 0;
    std::uint64_t global_step = 0;
    std::uint64_t adam_step = 0;
    std::string config_text;
};

namespace ckpt {

inline constexpr char kMagic[8] = {'G', 'F', 'L', 'F', 'A', 'D', '0', '1'};

void put_u8(std::ostream& os, std::uint8_t v);
void put_u16(std::ostream& os, std::uint16_t v);
void put_u32(std::ostream& os, std::uint32_t v);
void put_u64(std::ostream& os, std::uint64_t v);
std::uint8_t get_u8(std::istream& is);
std::uint16_t get_u16(std::istream& is);
std::uint32_t get_u32(std::istream& is);
std::uint64_t get_u64(std::istream& is);
void put_array(std::ostream& os, const float* data, std::size_t n);
void put_array(std::ostream& os, const double* data, std::size_t n);
void get_array(std::istream& is, float* data, std::size_t n);
void get_array(std::istream& is, double* data, std::size_t n);
[[noreturn]] void fail(const std::string& msg);

template <typename T>
constexpr std::uint8_t dtype_code();
template <>
constexpr std::uint8_t dtype_code<float>() {
    return 0;
}
template <>
constexpr std::uint8_t dtype_code<double>() {
    return 1;
}

}  // namespace ckpt

// Reads the header only (to pick the precision before building a model).
CheckpointMeta read_checkpoint_meta(const std::string& path);

template <typename T>
void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const std::vector<nn::ParamRef<T>>& params, const AdamW<T>* opt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) ckpt::fail("cannot open " + path + " for writing");
    os.write(ckpt::kMagic, sizeof ckpt::kMagic);
    ckpt::put_u32(os, meta.version);
    ckpt::put_u8(os, ckpt::dtype_code<T>());
    ckpt::put_u64(os, meta.epoch);
    ckpt::put_u64(os, meta.seed);
    ckpt::put_u64(os, meta.global_step);
    ckpt::put_u64(os, meta.adam_step);
    ckpt::put_u32(os, static_cast<std::uint32_t>(meta.config_text.size()));
    os.write(meta.config_text.data(), static_cast<std::streamsize>(meta.config_text.size()));

    ckpt::put_u32(os, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        ckpt::put_u16(os, static_cast<std::uint16_t>(p.name.size()));
        os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        const auto& shape = p.tensor.shape();
        ckpt::put_u8(os, static_cast<std::uint8_t>(shape.size()));
        for (std::size_t d : shape) ckpt::put_u64(os, d);
        ckpt::put_array(os, p.tensor.data().data(), p.tensor.numel());
    }
    ckpt::put_u8(os, opt != nullptr ? 1 : 0);
    if (opt != nullptr) {
        if (opt->size() != params.size()) ckpt::fail("optimizer does not cover the parameters");
        for (std::size_t i = 0; i < params.size(); ++i) {
            ckpt::put_array(os, opt->moment1(i).data(), opt->moment1(i).size());
            ckpt::put_array(os, opt->moment2(i).data(), opt->moment2(i).size());
        }
    }
    if (!os) ckpt::fail("write to " + path + " failed");
}

// Fills existing parameters (matched by name, order, and shape) and, when
// given, the optimizer moments. Throws on any mismatch.
template <typename T>
CheckpointMeta load_checkpoint(const std::string& path, const std::vector<nn::ParamRef<T>>& params,
                               AdamW<T>* opt) {
    std::ifstream is(path, std::ios::binary);
    if (!is) ckpt::fail("cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::string(magic, 8) != std::string(ckpt::kMagic, 8)) {
        ckpt::fail(path + " is not a checkpoint file");
    }
    CheckpointMeta meta;
    meta.version = ckpt::get_u32(is);
    if (meta.version != 1) ckpt::fail("unsupported checkpoint version");
    const std::uint8_t dtype = ckpt::get_u8(is);
    if (dtype != ckpt::dtype_code<T>()) {
        ckpt::fail("precision mismatch: checkpoint stores " +
                   std::string(dtype == 0 ? "f32" : "f64") + " values");
    }
    meta.precision = dtype == 0 ? "f32" : "f64";
    meta.epoch = ckpt::get_u64(is);
    meta.seed = ckpt::get_u64(is);
    meta.global_step = ckpt::get_u64(is);
    meta.adam_step = ckpt::get_u64(is);
    const std::uint32_t cfg_len = ckpt::get_u32(is);
    meta.config_text.resize(cfg_len);
    is.read(meta.config_text.data(), cfg_len);

    const std::uint32_t n_params = ckpt::get_u32(is);
    if (n_params != params.size()) {
        ckpt::fail("checkpoint has " + std::to_string(n_params) + " parameters, model has " +
                   std::to_string(params.size()));
    }
    for (const auto& p : params) {
        const std::uint16_t name_len = ckpt::get_u16(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (name != p.name) ckpt::fail("parameter order mismatch: '" + name + "' vs '" + p.name + "'");
        const std::uint8_t rank = ckpt::get_u8(is);
        ad::Shape shape(rank);
        for (auto& d : shape) d = ckpt::get_u64(is);
        if (shape != p.tensor.shape()) {
            ckpt::fail("shape mismatch for '" + name + "': checkpoint " + ad::shape_str(shape) +
                       " vs model " + ad::shape_str(p.tensor.shape()));
        }
        auto tensor = p.tensor;
        ckpt::get_array(is, tensor.data().data(), tensor.numel());
    }
    const std::uint8_t has_opt = ckpt::get_u8(is);
    if (opt != nullptr) {
        if (!has_opt) ckpt::fail("checkpoint has no optimizer state");
        for (std::size_t i = 0; i < params.size(); ++i) {
            ckpt::get_array(is, opt->moment1(i).data(), opt->moment1(i).size());
            ckpt::get_array(is, opt->moment2(i).data(), opt->moment2(i).size());
        }
        opt->set_step_count(static_cast<std::int64_t>(meta.adam_step));
    }
    if (!is) ckpt::fail("truncated checkpoint " + path);
    return meta;
}

}  // namespace gfl
