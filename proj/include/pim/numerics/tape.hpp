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

#ifndef PIM_NUMERICS_TAPE_HPP_
#define PIM_NUMERICS_TAPE_HPP_

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "pim/numerics/tensor.hpp"

namespace pim {

template <typename T>
class BasicTape;

// Handle to a value recorded on a tape.
template <typename T>
struct Var {
  BasicTape<T>* tape = nullptr;
  int32_t id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const BasicTensor<T>& value() const { return tape->value(*this); }
  const Shape& shape() const { return value().shape(); }
  int64_t dim(size_t axis) const { return value().dim(axis); }
};

// Reverse-mode autodiff tape. Ops append nodes in execution order, so the
// node list is topologically sorted by construction. A tape supports exactly
// one backward pass; call reset() before recording a new computation.
template <typename T>
class BasicTape {
 public:
  using TensorT = BasicTensor<T>;
  // Receives the node's output value and gradient; accumulates into inputs.
  using BackwardFn =
      std::function<void(BasicTape&, const TensorT& out, const TensorT& grad)>;

  BasicTape() = default;
  BasicTape(const BasicTape&) = delete;
  BasicTape& operator=(const BasicTape&) = delete;

  Var<T> constant(TensorT value) { return leaf(std::move(value), false); }
  Var<T> parameter(TensorT value) { return leaf(std::move(value), true); }

  // Records an op output. `backward` is dropped when no input needs a gradient.
  Var<T> record(TensorT value, std::initializer_list<Var<T>> inputs,
                BackwardFn backward, const char* op_name);

  const TensorT& value(Var<T> v) const { return node(v).value; }
  bool requires_grad(Var<T> v) const { return node(v).requires_grad; }

  // Gradient accumulated by backward(); zeros when no path reached `v`.
  TensorT grad(Var<T> v) const;

  // Mutable gradient buffer, allocated on first use. For backward functions.
  TensorT& grad_buffer(Var<T> v);

  void backward(Var<T> loss);
  void reset();

  bool consumed() const { return consumed_; }
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    TensorT value;
    TensorT grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };

  Var<T> leaf(TensorT value, bool requires_grad);
  const Node& node(Var<T> v) const;
  Node& node(Var<T> v);
  void check_open(const char* what) const;

  std::deque<Node> nodes_;
  bool consumed_ = false;
};

using Tape = BasicTape<float>;
using TapeD = BasicTape<double>;

extern template class BasicTape<float>;
extern template class BasicTape<double>;

}  // namespace pim

#endif  // PIM_NUMERICS_TAPE_HPP_
