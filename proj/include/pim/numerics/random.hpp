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

#ifndef PIM_NUMERICS_RANDOM_HPP_
#define PIM_NUMERICS_RANDOM_HPP_

#include <cstdint>
#include <random>

#include "pim/numerics/tensor.hpp"

namespace pim {

using Rng = std::mt19937_64;

// Mixes a run seed with a stream index (splitmix64 finalizer), so per-record
// and per-sample streams are independent of scheduling order.
uint64_t derive_seed(uint64_t seed, uint64_t index);

template <typename T>
BasicTensor<T> normal_tensor(const Shape& shape, Rng& rng, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  BasicTensor<T> t(shape);
  for (size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
BasicTensor<T> uniform_tensor(const Shape& shape, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  BasicTensor<T> t(shape);
  for (size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(dist(rng));
  return t;
}

}  // namespace pim

#endif  // PIM_NUMERICS_RANDOM_HPP_
