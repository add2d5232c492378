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

#include <cstddef>

namespace gfl::detail {

// C (m x n, row-major) = op(A) * op(B), optionally accumulating into C.
// A is stored row-major as (trans_a ? k x m : m x k), B as
// (trans_b ? n x k : k x n). Single-threaded and run-to-run deterministic.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const T* a, const T* b, T* c, bool accumulate);

extern template void gemm<float>(bool, bool, std::size_t, std::size_t, std::size_t,
                                 const float*, const float*, float*, bool);
extern template void gemm<double>(bool, bool, std::size_t, std::size_t, std::size_t,
                                  const double*, const double*, double*, bool);

}  // namespace gfl::detail
