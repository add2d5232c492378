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

#include "gflfad/gemm.hpp"

#include <Eigen/Dense>

namespace gfl::detail {

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const T* a, const T* b, T* c, bool accumulate) {
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using Index = Eigen::Index;
    const Index im = static_cast<Index>(m), in = static_cast<Index>(n), ik = static_cast<Index>(k);
    Eigen::Map<const Mat> A(a, trans_a ? ik : im, trans_a ? im : ik);
    Eigen::Map<const Mat> B(b, trans_b ? in : ik, trans_b ? ik : in);
    Eigen::Map<Mat> C(c, im, in);
    if (!trans_a && !trans_b) {
        if (accumulate) C.noalias() += A * B;
        else C.noalias() = A * B;
    } else if (trans_a && !trans_b) {
        if (accumulate) C.noalias() += A.transpose() * B;
        else C.noalias() = A.transpose() * B;
    } else if (!trans_a && trans_b) {
        if (accumulate) C.noalias() += A * B.transpose();
        else C.noalias() = A * B.transpose();
    } else {
        if (accumulate) C.noalias() += A.transpose() * B.transpose();
        else C.noalias() = A.transpose() * B.transpose();
    }
}

template void gemm<float>(bool, bool, std::size_t, std::size_t, std::size_t,
                          const float*, const float*, float*, bool);
template void gemm<double>(bool, bool, std::size_t, std::size_t, std::size_t,
                           const double*, const double*, double*, bool);

}  // namespace gfl::detail
