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

#include "pim/numerics/tape.hpp"

namespace pim {

template <typename T>
Var<T> BasicTape<T>::leaf(TensorT value, bool requires_grad) {
  check_open("record a leaf");
  if (!value.all_finite()) {
    throw NumericError("non-finite value in tape input of shape " +
                       shape_to_string(value.shape()));
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var<T>{this, static_cast<int32_t>(nodes_.size() - 1)};
}

template <typename T>
Var<T> BasicTape<T>::record(TensorT value, std::initializer_list<Var<T>> inputs,
                            BackwardFn backward, const char* op_name) {
  check_open(op_name);
  bool needs_grad = false;
  for (const Var<T>& in : inputs) {
    if (in.tape != this) {
      throw Error(std::string(op_name) + ": input belongs to a different tape");
    }
    needs_grad = needs_grad || node(in).requires_grad;
  }
  if (!value.all_finite()) {
    throw NumericError(std::string(op_name) +
                       " produced non-finite values (output shape " +
                       shape_to_string(value.shape()) + ")");
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = needs_grad;
  if (needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var<T>{this, static_cast<int32_t>(nodes_.size() - 1)};
}

template <typename T>
typename BasicTape<T>::TensorT BasicTape<T>::grad(Var<T> v) const {
  const Node& n = node(v);
  if (n.has_grad) return n.grad;
  return TensorT(n.value.shape());
}

template <typename T>
typename BasicTape<T>::TensorT& BasicTape<T>::grad_buffer(Var<T> v) {
  Node& n = node(v);
  if (!n.has_grad) {
    n.grad = TensorT(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

template <typename T>
void BasicTape<T>::backward(Var<T> loss) {
  check_open("backward");
  const Node& root = node(loss);
  if (root.value.size() != 1) {
    throw ShapeError("backward requires a scalar loss, got shape " +
                     shape_to_string(root.value.shape()));
  }
  consumed_ = true;
  if (!root.requires_grad) return;
  grad_buffer(loss)[0] = T{1};
  for (int32_t id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.value, n.grad);
  }
}

template <typename T>
void BasicTape<T>::reset() {
  nodes_.clear();
  consumed_ = false;
}

template <typename T>
const typename BasicTape<T>::Node& BasicTape<T>::node(Var<T> v) const {
  if (v.tape != this || v.id < 0 || static_cast<size_t>(v.id) >= nodes_.size()) {
    throw Error("variable does not belong to this tape");
  }
  return nodes_[static_cast<size_t>(v.id)];
}

template <typename T>
typename BasicTape<T>::Node& BasicTape<T>::node(Var<T> v) {
  if (v.tape != this || v.id < 0 || static_cast<size_t>(v.id) >= nodes_.size()) {
    throw Error("variable does not belong to this tape");
  }
  return nodes_[static_cast<size_t>(v.id)];
}

template <typename T>
void BasicTape<T>::check_open(const char* what) const {
  if (consumed_) {
    throw Error(std::string("tape already consumed by backward(); cannot ") +
                what + " without reset()");
  }
}

template class BasicTape<float>;
template class BasicTape<double>;

}  // namespace pim
