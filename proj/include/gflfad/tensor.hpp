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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gflfad/gemm.hpp"

// Minimal reverse-mode autodiff over dense row-major tensors.
//
// A Tensor is a value-semantics handle to shared node storage. Leaves are
// created with the static constructors; every other tensor is produced by a
// Tape primitive, which records the op so one backward() pass can replay the
// chain rule in reverse creation order (a valid topological order, each node
// visited exactly once). Broadcasting is deliberately unsupported; row
// expansion is expressed with gather_rows.

namespace gfl::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    if (s.empty()) return "scalar";
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += 'x';
        out += std::to_string(s[i]);
    }
    return out;
}

namespace detail {

template <typename T>
struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;  // allocated for trainable leaves and nodes reached by backward
    bool requires_grad = false;
    bool needs_grad = false;  // true if a trainable leaf is reachable below this node
    const void* tape = nullptr;
    std::ptrdiff_t record = -1;
};

template <typename T>
void ensure_grad(Node<T>& n) {
    if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), T(0));
}

}  // namespace detail

template <typename T>
class Tape;

template <typename T>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        std::vector<T> data(shape_numel(shape), T(0));
        return from_data(std::move(shape), std::move(data), requires_grad);
    }

    static Tensor full(Shape shape, T fill, bool requires_grad = false) {
        std::vector<T> data(shape_numel(shape), fill);
        return from_data(std::move(shape), std::move(data), requires_grad);
    }

    static Tensor from_data(Shape shape, std::vector<T> data, bool requires_grad = false) {
        if (shape_numel(shape) != data.size()) {
            throw std::invalid_argument("tensor: shape " + shape_str(shape) + " does not match " +
                                        std::to_string(data.size()) + " data values");
        }
        for (const T v : data) {
            if (!std::isfinite(static_cast<double>(v))) {
                throw std::runtime_error("tensor: non-finite value in leaf data");
            }
        }
        auto n = std::make_shared<detail::Node<T>>();
        n->shape = std::move(shape);
        n->value = std::move(data);
        n->requires_grad = requires_grad;
        n->needs_grad = requires_grad;
        if (requires_grad) detail::ensure_grad(*n);
        return Tensor(std::move(n));
    }

    static Tensor scalar(T v) { return from_data({}, {v}); }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node().shape; }
    std::size_t rank() const { return node().shape.size(); }
    std::size_t numel() const { return node().value.size(); }

    std::size_t rows() const {
        require_rank2("rows");
        return node().shape[0];
    }
    std::size_t cols() const {
        require_rank2("cols");
        return node().shape[1];
    }

    const std::vector<T>& data() const { return node().value; }
    std::vector<T>& data() { return node().value; }

    T at(std::size_t r, std::size_t c) const {
        require_rank2("at");
        return node().value[r * node().shape[1] + c];
    }

    T item() const {
        if (numel() != 1) {
            throw std::invalid_argument("tensor: item() on non-scalar of shape " + shape_str(shape()));
        }
        return node().value[0];
    }

    bool requires_grad() const { return node().requires_grad; }

    void set_requires_grad(bool v) {
        auto& n = node();
        if (n.tape != nullptr) {
            throw std::runtime_error("tensor: requires_grad can only be toggled on leaves");
        }
        n.requires_grad = v;
        n.needs_grad = v;
        if (v) detail::ensure_grad(n);
    }

    // Gradient of the last backward pass; zeros when the tensor was unreachable
    // from the loss. Only meaningful on requires_grad leaves.
    const std::vector<T>& grad() const {
        const auto& n = node();
        if (!n.requires_grad) {
            throw std::runtime_error("tensor: grad() on a tensor without requires_grad");
        }
        detail::ensure_grad(const_cast<detail::Node<T>&>(n));
        return n.grad;
    }

    void zero_grad() {
        auto& n = node();
        if (!n.requires_grad) return;
        n.grad.assign(n.value.size(), T(0));
    }

private:
    template <typename>
    friend class Tape;

    explicit Tensor(std::shared_ptr<detail::Node<T>> n) : node_(std::move(n)) {}

    detail::Node<T>& node() const {
        if (!node_) throw std::runtime_error("tensor: use of undefined tensor");
        return *node_;
    }

    void require_rank2(const char* what) const {
        if (rank() != 2) {
            throw std::invalid_argument(std::string("tensor: ") + what + " needs rank 2, got " +
                                        shape_str(shape()));
        }
    }

    std::shared_ptr<detail::Node<T>> node_;
};

// Recording context for one forward/backward cycle. Primitives validate
// shapes, compute values eagerly, and append a backward rule; backward() may
// run once per recording and reset() starts a fresh one.
template <typename T>
class Tape {
public:
    explicit Tape(bool check_finite = true) : check_finite_(check_finite) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    std::size_t num_records() const { return records_.size(); }
    bool finite_checks_enabled() const { return check_finite_; }

    // ---- primitives ----

    Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
        auto an = node_of(a, "matmul"), bn = node_of(b, "matmul");
        if (an->shape.size() != 2 || bn->shape.size() != 2) {
            fail("matmul", "needs rank-2 operands, got " + shape_str(an->shape) + " and " +
                               shape_str(bn->shape));
        }
        const std::size_t m = an->shape[0], k = an->shape[1], n = bn->shape[1];
        if (bn->shape[0] != k) {
            fail("matmul", "inner extents differ (" + shape_str(an->shape) + " vs " +
                               shape_str(bn->shape) + ")");
        }
        std::vector<T> v(m * n);
        gfl::detail::gemm<T>(false, false, m, n, k, an->value.data(), bn->value.data(), v.data(), false);
        auto out = make_node("matmul", {m, n}, std::move(v), an->needs_grad || bn->needs_grad);
        set_backprop([an, bn, out, m, n, k] {
            if (an->needs_grad) {
                detail::ensure_grad(*an);
                gfl::detail::gemm<T>(false, true, m, k, n, out->grad.data(), bn->value.data(),
                                     an->grad.data(), true);
            }
            if (bn->needs_grad) {
                detail::ensure_grad(*bn);
                gfl::detail::gemm<T>(true, false, k, n, m, an->value.data(), out->grad.data(),
                                     bn->grad.data(), true);
            }
        });
        return Tensor<T>(out);
    }

    Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) { return binary_elementwise("add", a, b); }
    Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) { return binary_elementwise("sub", a, b); }
    Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) { return binary_elementwise("mul", a, b); }

    Tensor<T> scale(const Tensor<T>& a, T c) {
        auto an = node_of(a, "scale");
        std::vector<T> v(an->value.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = an->value[i] * c;
        auto out = make_node("scale", an->shape, std::move(v), an->needs_grad);
        set_backprop([an, out, c] {
            if (!an->needs_grad) return;
            detail::ensure_grad(*an);
            for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += out->grad[i] * c;
        });
        return Tensor<T>(out);
    }

    Tensor<T> transpose(const Tensor<T>& a) {
        auto an = node_of(a, "transpose");
        if (an->shape.size() != 2) fail("transpose", "needs rank 2, got " + shape_str(an->shape));
        const std::size_t m = an->shape[0], n = an->shape[1];
        std::vector<T> v(m * n);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) v[j * m + i] = an->value[i * n + j];
        auto out = make_node("transpose", {n, m}, std::move(v), an->needs_grad);
        set_backprop([an, out, m, n] {
            if (!an->needs_grad) return;
            detail::ensure_grad(*an);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) an->grad[i * n + j] += out->grad[j * m + i];
        });
        return Tensor<T>(out);
    }

    Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
        auto an = node_of(a, "reshape");
        if (shape_numel(shape) != an->value.size()) {
            fail("reshape", "cannot view " + shape_str(an->shape) + " as " + shape_str(shape));
        }
        std::vector<T> v = an->value;
        auto out = make_node("reshape", std::move(shape), std::move(v), an->needs_grad);
        set_backprop([an, out] {
            if (!an->needs_grad) return;
            detail::ensure_grad(*an);
            for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += out->grad[i];
        });
        return Tensor<T>(out);
    }

    Tensor<T> concat(const std::vector<Tensor<T>>& xs, std::size_t axis) {
        if (xs.empty()) fail("concat", "needs at least one input");
        if (axis > 1) fail("concat", "axis " + std::to_string(axis) + " out of range for rank 2");
        std::vector<std::shared_ptr<detail::Node<T>>> nodes;
        nodes.reserve(xs.size());
        bool needs = false;
        for (const auto& x : xs) {
            nodes.push_back(node_of(x, "concat"));
            if (nodes.back()->shape.size() != 2) {
                fail("concat", "needs rank-2 inputs, got " + shape_str(nodes.back()->shape));
            }
            needs = needs || nodes.back()->needs_grad;
        }
        const std::size_t fixed = nodes[0]->shape[1 - axis];
        std::size_t total = 0;
        for (const auto& n : nodes) {
            if (n->shape[1 - axis] != fixed) {
                fail("concat", "extent mismatch on axis " + std::to_string(1 - axis) + " (" +
                                   shape_str(nodes[0]->shape) + " vs " + shape_str(n->shape) + ")");
            }
            total += n->shape[axis];
        }
        Shape out_shape = (axis == 0) ? Shape{total, fixed} : Shape{fixed, total};
        std::vector<T> v(total * fixed);
        if (axis == 0) {
            std::size_t off = 0;
            for (const auto& n : nodes) {
                std::copy(n->value.begin(), n->value.end(), v.begin() + off);
                off += n->value.size();
            }
        } else {
            const std::size_t rows = fixed;
            std::size_t col_off = 0;
            for (const auto& n : nodes) {
                const std::size_t w = n->shape[1];
                for (std::size_t r = 0; r < rows; ++r)
                    std::copy(n->value.begin() + r * w, n->value.begin() + (r + 1) * w,
                              v.begin() + r * total + col_off);
                col_off += w;
            }
        }
        auto out = make_node("concat", std::move(out_shape), std::move(v), needs);
        set_backprop([nodes, out, axis] {
            const std::size_t total_cols = (axis == 1) ? out->shape[1] : 0;
            std::size_t off = 0;
            for (const auto& n : nodes) {
                if (axis == 0) {
                    if (n->needs_grad) {
                        detail::ensure_grad(*n);
                        for (std::size_t i = 0; i < n->grad.size(); ++i)
                            n->grad[i] += out->grad[off + i];
                    }
                    off += n->value.size();
                } else {
                    const std::size_t w = n->shape[1], rows = n->shape[0];
                    if (n->needs_grad) {
                        detail::ensure_grad(*n);
                        for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t c = 0; c < w; ++c)
                                n->grad[r * w + c] += out->grad[r * total_cols + off + c];
                    }
                    off += w;
                }
            }
        });
        return Tensor<T>(out);
    }

    Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t start, std::size_t len) {
        auto an = node_of(a, "slice");
        if (an->shape.size() != 2) fail("slice", "needs rank 2, got " + shape_str(an->shape));
        if (axis > 1) fail("slice", "axis " + std::to_string(axis) + " out of range for rank 2");
        if (len == 0 || start + len > an->shape[axis]) {
            fail("slice", "range [" + std::to_string(start) + ", " + std::to_string(start + len) +
                              ") invalid for extent " + std::to_string(an->shape[axis]));
        }
        const std::size_t rows = an->shape[0], cols = an->shape[1];
        Shape out_shape = (axis == 0) ? Shape{len, cols} : Shape{rows, len};
        std::vector<T> v(shape_numel(out_shape));
        if (axis == 0) {
            std::copy(an->value.begin() + start * cols, an->value.begin() + (start + len) * cols,
                      v.begin());
        } else {
            for (std::size_t r = 0; r < rows; ++r)
                std::copy(an->value.begin() + r * cols + start,
                          an->value.begin() + r * cols + start + len, v.begin() + r * len);
        }
        auto out = make_node("slice", std::move(out_shape), std::move(v), an->needs_grad);
        set_backprop([an, out, axis, start, len, rows, cols] {
            if (!an->needs_grad) return;
            detail::ensure_grad(*an);
            if (axis == 0) {
                for (std::size_t i = 0; i < len * cols; ++i) an->grad[start * cols + i] += out->grad[i];
            } else {
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < len; ++c)
                        an->grad[r * cols + start + c] += out->grad[r * len + c];
            }
        });
        return Tensor<T>(out);
    }

    Tensor<T> softmax(const Tensor<T>& a, std::size_t axis) {
        auto an = node_of(a, "softmax");
        const std::size_t rank = an->shape.size();
        if (rank == 0 || rank > 2) fail("softmax", "needs rank 1 or 2, got " + shape_str(an->shape));
        if (axis >= rank) {
            fail("softmax", "axis " + std::to_string(axis) + " out of range for rank " +
                                std::to_string(rank));
        }
        // Express the reduction as (outer, len, inner) strides.
        std::size_t len = an->shape[axis];
        std::size_t inner = 1;
        for (std::size_t d = axis + 1; d < rank; ++d) inner *= an->shape[d];
        std::size_t outer = an->value.size() / (len * inner);
        std::vector<T> v(an->value.size());
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t in = 0; in < inner; ++in) {
                const std::size_t base = o * len * inner + in;
                T mx = an->value[base];
                for (std::size_t j = 1; j < len; ++j)
                    mx = std::max(mx, an->value[base + j * inner]);
                T sum = T(0);
                for (std::size_t j = 0; j < len; ++j) {
                    const T e = std::exp(an->value[base + j * inner] - mx);
                    v[base + j * inner] = e;
                    sum += e;
                }
                const T inv = T(1) / sum;
                for (std::size_t j = 0; j < len; ++j) v[base + j * inner] *= inv;
            }
        }
        auto out = make_node("softmax", an->shape, std::move(v), an->needs_grad);
        set_backprop([an, out, outer, len, inner] {
            if (!an->needs_grad) return;
            detail::ensure_grad(*an);
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t in = 0; in < inner; ++in) {
                    const std::size_t base = o * len * inner + in;
                    T dot = T(0);
                    for (std::size_t j = 0; j < len; ++j)
                        dot += out->grad[base + j * inner] * out->value[base + j * inner];
                    for (std::size_t j = 0; j < len; ++j) {
                        const std::size_t idx = base + j * inner;
                        an->grad[idx] += out->value[idx] * (out->grad[idx] - dot);
                    }
                }
            }
        });
        return Tensor<T>(out);
    }

    // Normalizes the last axis to zero mean / unit variance (epsilon inside the
    // square root). Affine gain/shift live in the nn layer, not here.
    Tensor<T> layer_norm(const Tensor<T>& a, T eps = T(1e-5)) {
        auto an = node_of(a, "layer_norm");
        if (an->shape.empty()) fail("layer_norm", "needs rank >= 1");
        const std::size_t len = an->shape.back();
        const std::size_t rows = an->value.size() / len;
        std::vector<T> v(an->value.size());
        auto inv_std = std::make_shared<std::vector<T>>(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            const T* x = an->value.data() + r * len;
            T mean = T(0);
            for (std::size_t j = 0; j < len; ++j) mean += x[j];
            mean /= static_cast<T>(len);
            T var = T(0);
            for (std::size_t j = 0; j < len; ++j) var += (x[j] - mean) * (x[j] - mean);
            var /= static_cast<T>(len);
            const T is = T(1) / std::sqrt(var + eps);
            (*inv_std)[r] = is;
            for (std::size_t j = 0; j < len; ++j) v[r * len + j] = (x[j] - mean) * is;
        }
        auto out = make_node("layer_norm", an->shape, std::move(v), an->needs_grad);
        set_backprop([an, out, inv_std, rows, len] {
            if (!an->needs_grad) return;
            detail::ensure_grad(*an);
            for (std::size_t r = 0; r < rows; ++r) {
                const T* g = out->grad.data() + r * len;
                const T* y = out->value.data() + r * len;
                T g_mean = T(0), gy_mean = T(0);
                for (std::size_t j = 0; j < len; ++j) {
                    g_mean += g[j];
                    gy_mean += g[j] * y[j];
                }
                g_mean /= static_cast<T>(len);
                gy_mean /= static_cast<T>(len);
                const T is = (*inv_std)[r];
                for (std::size_t j = 0; j < len; ++j)
                    an->grad[r * len + j] += is * (g[j] - g_mean - y[j] * gy_mean);
            }
        });
        return Tensor<T>(out);
    }

    // tanh-approximation GELU, pinned so tests have one definition.
    Tensor<T> gelu(const Tensor<T>& a) {
        auto an = node_of(a, "gelu");
        const T c = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
        const T k = T(0.044715);
        std::vector<T> v(an->value.size());
        auto th = std::make_shared<std::vector<T>>(an->value.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            const T x = an->value[i];
            const T t = std::tanh(c * (x + k * x * x * x));
            (*th)[i] = t;
            v[i] = T(0.5) * x * (T(1) + t);
        }
        auto out = make_node("gelu", an->shape, std::move(v), an->needs_grad);
        set_backprop([an, out, th, c, k] {
            if (!an->needs_grad) return;
            detail::ensure_grad(*an);
            for (std::size_t i = 0; i < an->grad.size(); ++i) {
                const T x = an->value[i];
                const T t = (*th)[i];
                const T du = c * (T(1) + T(3) * k * x * x);
                const T d = T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t * t) * du;
                an->grad[i] += out->grad[i] * d;
            }
        });
        return Tensor<T>(out);
    }

    Tensor<T> sum(const Tensor<T>& a) { return reduce("sum", a, T(1)); }

    Tensor<T> mean(const Tensor<T>& a) {
        auto an = node_of(a, "mean");
        return reduce("mean", a, T(1) / static_cast<T>(an->value.size()));
    }

    Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b) {
        auto an = node_of(a, "mse"), bn = node_of(b, "mse");
        if (an->shape != bn->shape) {
            fail("mse", "shape mismatch (" + shape_str(an->shape) + " vs " + shape_str(bn->shape) + ")");
        }
        const std::size_t n = an->value.size();
        T acc = T(0);
        for (std::size_t i = 0; i < n; ++i) {
            const T d = an->value[i] - bn->value[i];
            acc += d * d;
        }
        auto out = make_node("mse", {}, {acc / static_cast<T>(n)}, an->needs_grad || bn->needs_grad);
        set_backprop([an, bn, out, n] {
            const T g = out->grad[0] * T(2) / static_cast<T>(n);
            if (an->needs_grad) {
                detail::ensure_grad(*an);
                for (std::size_t i = 0; i < n; ++i)
                    an->grad[i] += g * (an->value[i] - bn->value[i]);
            }
            if (bn->needs_grad) {
                detail::ensure_grad(*bn);
                for (std::size_t i = 0; i < n; ++i)
                    bn->grad[i] -= g * (an->value[i] - bn->value[i]);
            }
        });
        return Tensor<T>(out);
    }

    // Mean over the batch of -log softmax(logits)[label], stabilized by
    // max-subtraction. labels[i] indexes a class column.
    Tensor<T> cross_entropy_with_logits(const Tensor<T>& logits, const std::vector<int>& labels) {
        auto ln = node_of(logits, "cross_entropy_with_logits");
        if (ln->shape.size() != 2) {
            fail("cross_entropy_with_logits", "needs rank-2 logits, got " + shape_str(ln->shape));
        }
        const std::size_t b = ln->shape[0], k = ln->shape[1];
        if (labels.size() != b) {
            fail("cross_entropy_with_logits",
                 "batch size " + std::to_string(b) + " vs " + std::to_string(labels.size()) + " labels");
        }
        for (int lab : labels) {
            if (lab < 0 || static_cast<std::size_t>(lab) >= k) {
                fail("cross_entropy_with_logits",
                     "label " + std::to_string(lab) + " outside [0, " + std::to_string(k) + ")");
            }
        }
        auto probs = std::make_shared<std::vector<T>>(b * k);
        T acc = T(0);
        for (std::size_t i = 0; i < b; ++i) {
            const T* row = ln->value.data() + i * k;
            T mx = row[0];
            for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
            T sum = T(0);
            for (std::size_t j = 0; j < k; ++j) {
                const T e = std::exp(row[j] - mx);
                (*probs)[i * k + j] = e;
                sum += e;
            }
            const T inv = T(1) / sum;
            for (std::size_t j = 0; j < k; ++j) (*probs)[i * k + j] *= inv;
            acc += mx + std::log(sum) - row[static_cast<std::size_t>(labels[i])];
        }
        auto out = make_node("cross_entropy_with_logits", {}, {acc / static_cast<T>(b)}, ln->needs_grad);
        auto labs = labels;
        set_backprop([ln, out, probs, labs, b, k] {
            if (!ln->needs_grad) return;
            detail::ensure_grad(*ln);
            const T g = out->grad[0] / static_cast<T>(b);
            for (std::size_t i = 0; i < b; ++i) {
                for (std::size_t j = 0; j < k; ++j) {
                    T d = (*probs)[i * k + j];
                    if (j == static_cast<std::size_t>(labs[i])) d -= T(1);
                    ln->grad[i * k + j] += g * d;
                }
            }
        });
        return Tensor<T>(out);
    }

    // Row gather on a rank-2 tensor; duplicate indices are allowed, which also
    // covers row broadcasting (gathering row 0 of a [1 x C] bias R times).
    Tensor<T> gather_rows(const Tensor<T>& a, const std::vector<std::size_t>& idx) {
        auto an = node_of(a, "gather_rows");
        if (an->shape.size() != 2) fail("gather_rows", "needs rank 2, got " + shape_str(an->shape));
        const std::size_t rows = an->shape[0], cols = an->shape[1];
        for (std::size_t i : idx) {
            if (i >= rows) {
                fail("gather_rows", "index " + std::to_string(i) + " out of range for " +
                                        std::to_string(rows) + " rows");
            }
        }
        std::vector<T> v(idx.size() * cols);
        for (std::size_t r = 0; r < idx.size(); ++r)
            std::copy(an->value.begin() + idx[r] * cols, an->value.begin() + (idx[r] + 1) * cols,
                      v.begin() + r * cols);
        auto out = make_node("gather_rows", {idx.size(), cols}, std::move(v), an->needs_grad);
        auto indices = idx;
        set_backprop([an, out, indices, cols] {
            if (!an->needs_grad) return;
            detail::ensure_grad(*an);
            for (std::size_t r = 0; r < indices.size(); ++r)
                for (std::size_t c = 0; c < cols; ++c)
                    an->grad[indices[r] * cols + c] += out->grad[r * cols + c];
        });
        return Tensor<T>(out);
    }

    // ---- backward ----

    void backward(const Tensor<T>& loss) {
        auto ln = loss.node_;
        if (!ln) throw std::runtime_error("backward: undefined loss tensor");
        if (ln->tape != this) throw std::runtime_error("backward: loss was not produced on this tape");
        if (ln->value.size() != 1) {
            throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                        shape_str(ln->shape));
        }
        if (backward_done_) {
            throw std::runtime_error("backward: called twice without a new forward (reset the tape)");
        }
        backward_done_ = true;
        detail::ensure_grad(*ln);
        ln->grad[0] = T(1);
        for (std::ptrdiff_t i = ln->record; i >= 0; --i) {
            auto& rec = records_[static_cast<std::size_t>(i)];
            if (!rec.backprop) continue;
            if (rec.output->grad.empty()) continue;  // no gradient flowed to this node
            rec.backprop();
        }
    }

    void reset() {
        records_.clear();
        backward_done_ = false;
    }

private:
    struct Record {
        const char* kind;
        std::shared_ptr<detail::Node<T>> output;
        std::function<void()> backprop;
    };

    using NodePtr = std::shared_ptr<detail::Node<T>>;

    static NodePtr node_of(const Tensor<T>& t, const char* kind) {
        if (!t.node_) throw std::runtime_error(std::string(kind) + ": undefined input tensor");
        return t.node_;
    }

    [[noreturn]] static void fail(const char* kind, const std::string& msg) {
        throw std::invalid_argument(std::string(kind) + ": " + msg);
    }

    NodePtr make_node(const char* kind, Shape shape, std::vector<T> value, bool needs) {
        if (check_finite_) {
            for (const T v : value) {
                if (!std::isfinite(static_cast<double>(v))) {
                    throw std::runtime_error(std::string(kind) + ": non-finite value produced");
                }
            }
        }
        auto n = std::make_shared<detail::Node<T>>();
        n->shape = std::move(shape);
        n->value = std::move(value);
        n->needs_grad = needs;
        n->tape = this;
        n->record = static_cast<std::ptrdiff_t>(records_.size());
        records_.push_back(Record{kind, n, {}});
        return n;
    }

    template <typename F>
    void set_backprop(F&& f) {
        if (records_.back().output->needs_grad) records_.back().backprop = std::forward<F>(f);
    }

    Tensor<T> binary_elementwise(const char* kind, const Tensor<T>& a, const Tensor<T>& b) {
        auto an = node_of(a, kind), bn = node_of(b, kind);
        if (an->shape != bn->shape) {
            fail(kind, "shape mismatch (" + shape_str(an->shape) + " vs " + shape_str(bn->shape) + ")");
        }
        const std::size_t n = an->value.size();
        std::vector<T> v(n);
        const char op = kind[0];  // 'a'dd, 's'ub, 'm'ul
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = op == 'a'   ? an->value[i] + bn->value[i]
                   : op == 's' ? an->value[i] - bn->value[i]
                               : an->value[i] * bn->value[i];
        }
        auto out = make_node(kind, an->shape, std::move(v), an->needs_grad || bn->needs_grad);
        set_backprop([an, bn, out, op, n] {
            if (an->needs_grad) {
                detail::ensure_grad(*an);
                for (std::size_t i = 0; i < n; ++i)
                    an->grad[i] += op == 'm' ? out->grad[i] * bn->value[i] : out->grad[i];
            }
            if (bn->needs_grad) {
                detail::ensure_grad(*bn);
                for (std::size_t i = 0; i < n; ++i) {
                    if (op == 'a') bn->grad[i] += out->grad[i];
                    else if (op == 's') bn->grad[i] -= out->grad[i];
                    else bn->grad[i] += out->grad[i] * an->value[i];
                }
            }
        });
        return Tensor<T>(out);
    }

    Tensor<T> reduce(const char* kind, const Tensor<T>& a, T weight) {
        auto an = node_of(a, kind);
        T acc = T(0);
        for (const T v : an->value) acc += v;
        auto out = make_node(kind, {}, {acc * weight}, an->needs_grad);
        set_backprop([an, out, weight] {
            if (!an->needs_grad) return;
            detail::ensure_grad(*an);
            const T g = out->grad[0] * weight;
            for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += g;
        });
        return Tensor<T>(out);
    }

    std::vector<Record> records_;
    bool check_finite_;
    bool backward_done_ = false;
};

// Central-difference gradient check: returns the max over coordinates of
// |analytic - numeric| / max(1, |numeric|). f must be scalar-valued and is
// re-evaluated at point +- step per coordinate.
template <typename T>
double grad_check(const std::function<Tensor<T>(Tape<T>&, const Tensor<T>&)>& f, Tensor<T>& point,
                  double step) {
    point.set_requires_grad(true);
    point.zero_grad();
    {
        Tape<T> tape;
        Tensor<T> y = f(tape, point);
        if (y.numel() != 1) {
            throw std::invalid_argument("grad_check: f must be scalar-valued, got shape " +
                                        shape_str(y.shape()));
        }
        tape.backward(y);
    }
    const std::vector<T> analytic = point.grad();
    double max_err = 0.0;
    auto& x = point.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T orig = x[i];
        x[i] = orig + static_cast<T>(step);
        double fp;
        {
            Tape<T> tape;
            fp = static_cast<double>(f(tape, point).item());
        }
        x[i] = orig - static_cast<T>(step);
        double fm;
        {
            Tape<T> tape;
            fm = static_cast<double>(f(tape, point).item());
        }
        x[i] = orig;
        const double numeric = (fp - fm) / (2.0 * step);
        const double err =
            std::abs(static_cast<double>(analytic[i]) - numeric) / std::max(1.0, std::abs(numeric));
        max_err = std::max(max_err, err);
    }
    return max_err;
}

}  // namespace gfl::ad
