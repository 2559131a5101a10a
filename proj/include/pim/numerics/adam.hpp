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

#ifndef PIM_NUMERICS_ADAM_HPP_
#define PIM_NUMERICS_ADAM_HPP_

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "pim/numerics/tensor.hpp"

namespace pim {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. Moment buffers are kept per parameter tensor.
class AdamState {
 public:
  AdamState() = default;
  AdamState(std::span<const Tensor> params, AdamConfig config = {});

  // Applies one update in place. Throws ShapeError on any shape mismatch.
  void step(std::span<Tensor> params, std::span<const Tensor> grads, double lr);

  int64_t steps() const { return step_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<TensorD>& first_moments() const { return m_; }
  const std::vector<TensorD>& second_moments() const { return v_; }

 private:
  AdamConfig config_;
  std::vector<TensorD> m_;
  std::vector<TensorD> v_;
  int64_t step_ = 0;
};

// Piecewise-constant learning rate: `initial` until the first drop step, then
// each drop's rate from its step onwards.
struct LrSchedule {
  double initial = 1e-3;
  std::vector<std::pair<int64_t, double>> drops = {{50000, 1e-4}, {80000, 1e-5}};

  double at(int64_t step) const;
};

}  // namespace pim

#endif  // PIM_NUMERICS_ADAM_HPP_
