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

#include <string>

#include "gflfad/frontend.hpp"

namespace gfl {

// Single-channel little-endian WAV only: 16-bit PCM or 32-bit IEEE float.
// Anything else (stereo, other bit depths, compressed formats) is an error.
Waveform read_wav(const std::string& path);

// Writes 32-bit IEEE float WAV.
void write_wav(const Waveform& w, const std::string& path);

}  // namespace gfl
