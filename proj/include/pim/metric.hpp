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

#ifndef PIM_METRIC_HPP_
#define PIM_METRIC_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pim/encoders.hpp"

namespace pim {

inline constexpr int kDefaultMcSamples = 64;

// A trained marginal encoder plus the Monte-Carlo budget used to compare
// its outputs. Immutable once built; safe to share across threads.
class PimModel {
 public:
  explicit PimModel(ModelParameters params, int mc_samples = kDefaultMcSamples);
  static PimModel load(const std::filesystem::path& checkpoint,
                       int mc_samples = kDefaultMcSamples);

  const ModelParameters& params() const { return params_; }
  const Architecture& architecture() const { return params_.architecture(); }
  PyramidKind pyramid() const { return architecture().pyramid; }
  int components() const { return static_cast<int>(architecture().components); }
  int mc_samples() const { return mc_samples_; }

 private:
  ModelParameters params_;
  int mc_samples_;
};

// Unit-variance Gaussian mixture at L independent locations of one scale.
struct MixtureDensity {
  TensorD log_weights;  // [C, L], normalized over C
  TensorD means;        // [C, D, L]
};

// One image's marginal distribution, one entry per scale.
using MixtureImage = std::vector<MixtureDensity>;

// Splits a batched encoding into per-image densities.
std::vector<MixtureImage> split_mixtures(const MixtureValues& values);

struct KlEstimate {
  double value = 0.0;      // reported, clamped at 0
  double raw = 0.0;        // unclamped Monte-Carlo mean
  double std_error = 0.0;  // of `raw`
  bool clamped = false;
};

// KL(p||q) + KL(q||p) from `samples` draws of each side at every location,
// summed over locations and scales. Location l of the flattened field uses
// its own stream derive_seed(seed, l), so results do not depend on threading.
KlEstimate symmetrized_kl_mc(const MixtureImage& p, const MixtureImage& q, int samples,
                             uint64_t seed);

// Throws Error unless x and y are [3, H, W] or [1, 3, H, W] with equal
// extents and every value in [0, 1].
void check_metric_inputs(const Tensor& x, const Tensor& y);

KlEstimate pim_estimate(const Tensor& x, const Tensor& y, const PimModel& model, uint64_t seed);
double pim(const Tensor& x, const Tensor& y, const PimModel& model, uint64_t seed);

// Squared distance between means; the exact symmetrized KL of one-component
// models. Throws Error for models with more than one component.
double pim1(const Tensor& x, const Tensor& y, const PimModel& model);

// pim1 for single-component models, pim otherwise.
double distance(const Tensor& x, const Tensor& y, const PimModel& model, uint64_t seed);

// Seed for a pair, derived from the run seed and the pixel contents so that a
// pair's estimate does not depend on where it sits in a batch.
uint64_t pair_seed(uint64_t seed, const Tensor& x, const Tensor& y);

struct DistanceResult {
  std::optional<double> value;
  std::string error;  // set when value is empty
};

// distance() per pair with pair_seed(seed, x, y); a failing pair is reported
// in place and does not stop the rest.
std::vector<DistanceResult> batch_distance(const std::vector<std::pair<Tensor, Tensor>>& pairs,
                                           const PimModel& model, uint64_t seed);

}  // namespace pim

#endif  // PIM_METRIC_HPP_
