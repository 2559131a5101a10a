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

#include "pim/numerics/adam.hpp"

#include <cmath>
#include <string>

namespace pim {

AdamState::AdamState(std::span<const Tensor> params, AdamConfig config)
    : config_(config) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.emplace_back(p.shape());
    v_.emplace_back(p.shape());
  }
}

void AdamState::step(std::span<Tensor> params, std::span<const Tensor> grads,
                     double lr) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ShapeError("adam: expected " + std::to_string(m_.size()) +
                     " parameter tensors, got " + std::to_string(params.size()) +
                     " parameters and " + std::to_string(grads.size()) + " gradients");
  }
  for (size_t k = 0; k < params.size(); ++k) {
    if (params[k].shape() != m_[k].shape() || grads[k].shape() != m_[k].shape()) {
      throw ShapeError("adam: shape mismatch for tensor " + std::to_string(k) + ": " +
                       shape_to_string(params[k].shape()) + " / " +
                       shape_to_string(grads[k].shape()) + " vs state " +
                       shape_to_string(m_[k].shape()));
    }
  }
  if (!(lr >= 0.0)) throw Error("adam: learning rate must be nonnegative");
  ++step_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    const auto& g = grads[k];
    auto& m = m_[k];
    auto& v = v_[k];
    for (size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] = static_cast<float>(static_cast<double>(p[i]) -
                                lr * mhat / (std::sqrt(vhat) + config_.epsilon));
    }
  }
}

double LrSchedule::at(int64_t step) const {
  double lr = initial;
  for (const auto& [at_step, rate] : drops) {
    if (step >= at_step) lr = rate;
  }
  return lr;
}

}  // namespace pim
