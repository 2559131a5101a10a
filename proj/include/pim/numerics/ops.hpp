// Copyright 2026 The PIM Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PIM_NUMERICS_OPS_HPP_
#define PIM_NUMERICS_OPS_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <type_traits>
#include <vector>

#include "pim/numerics/tape.hpp"

namespace pim {

// Differentiable primitives. Binary elementwise ops broadcast NumPy-style:
// shapes are aligned from the trailing axis and extents must match or be 1.
// Reductions accumulate in double before rounding to T.

template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> scale(Var<T> x, double factor);
template <typename T> Var<T> add_scalar(Var<T> x, double offset);
// x * factor + offset, with broadcasting.
template <typename T> Var<T> affine(Var<T> x, Var<T> factor, Var<T> offset);

template <typename T> Var<T> relu(Var<T> x);
template <typename T> Var<T> exp(Var<T> x);
template <typename T> Var<T> log(Var<T> x);
template <typename T> Var<T> square(Var<T> x);

template <typename T> Var<T> sum_all(Var<T> x);
template <typename T> Var<T> mean_all(Var<T> x);
// Reduces over `axis`, removing it.
template <typename T> Var<T> sum(Var<T> x, int axis);
template <typename T> Var<T> logsumexp(Var<T> x, int axis);
template <typename T> Var<T> softmax(Var<T> x, int axis);
template <typename T> Var<T> log_softmax(Var<T> x, int axis);

template <typename T> Var<T> reshape(Var<T> x, Shape shape);
template <typename T> Var<T> slice(Var<T> x, int axis, int64_t start, int64_t length);
template <typename T> Var<T> concat(std::span<const Var<T>> parts, int axis);
// Main diagonal of a square [K, K] matrix.
template <typename T> Var<T> diagonal(Var<T> x);
// means [K, C, D, L], choice[k * L + l] in [0, C)  ->  [K, D, L].
template <typename T>
Var<T> select_components(Var<T> means, std::span<const int32_t> choice);

enum class Padding { same, valid };

// Cross-correlation. input [N,C,H,W], kernel [O,C,kh,kw], bias [O] or none.
// "same" pads with zeros so that the output extent is ceil(H / stride).
template <typename T>
Var<T> conv2d(Var<T> input, Var<T> kernel,
              std::type_identity_t<std::optional<Var<T>>> bias,
              int64_t stride, Padding padding);

template <typename T> Var<T> operator+(Var<T> a, Var<T> b) { return add(a, b); }
template <typename T> Var<T> operator-(Var<T> a, Var<T> b) { return sub(a, b); }
template <typename T> Var<T> operator*(Var<T> a, Var<T> b) { return mul(a, b); }

// Shape produced by broadcasting a against b; throws ShapeError if incompatible.
Shape broadcast_shape(const Shape& a, const Shape& b);

}  // namespace pim

#endif  // PIM_NUMERICS_OPS_HPP_
