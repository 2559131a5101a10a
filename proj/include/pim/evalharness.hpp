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

#ifndef PIM_EVALHARNESS_HPP_
#define PIM_EVALHARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "pim/data.hpp"
#include "pim/metric.hpp"

namespace pim {

// A named image distance. `fn(a, b, seed)` must be deterministic in its
// arguments and return a nonnegative value.
struct MetricFn {
  std::string name;
  std::function<double(const Tensor&, const Tensor&, uint64_t)> fn;
};

double baseline_rmse(const Tensor& x, const Tensor& y);
MetricFn rmse_metric();
// PIM, or PIM-1 for single-component models; the model must outlive the result.
MetricFn pim_metric(const PimModel& model);

// Per-record metric seeds: derive_seed(seed, index). Both distances of a
// triplet share their record's seed.
uint64_t record_seed(uint64_t seed, size_t index);

// ---- 2AFC -------------------------------------------------------------------

// Credit h when d1 < d0, 1 - h when d0 < d1, 0.5 on a tie; returns 100 x mean.
double score_2afc(const std::vector<double>& h, const std::vector<double>& d0,
                  const std::vector<double>& d1);
double score_2afc(const std::vector<EvalRecord>& triplets, const MetricFn& metric,
                  uint64_t seed);

// ---- JND --------------------------------------------------------------------

// Non-interpolated average precision of `same` pairs ranked by ascending
// distance, ties broken by index.
double average_precision(const std::vector<double>& distances, const std::vector<bool>& same);
double score_jnd_map(const std::vector<EvalRecord>& pairs, const MetricFn& metric, uint64_t seed);
// Mean of the per-manifest average precisions.
double score_jnd_map(const std::vector<std::vector<EvalRecord>>& manifests, const MetricFn& metric,
                     uint64_t seed);

// ---- Pixel shift ------------------------------------------------------------

enum class ShiftDirection { left, right, up, down };
std::string to_string(ShiftDirection d);

// Content moves `pixels` toward `direction`; vacated pixels repeat the edge.
Tensor shift_image(const Tensor& image, int64_t pixels, ShiftDirection direction);
ShiftDirection shift_direction(uint64_t seed, size_t record_index);

struct ShiftResult {
  int64_t shift = 0;
  double score = 0.0;
  double delta = 0.0;  // score - unshifted score
};

struct ShiftReport {
  double baseline = 0.0;
  std::vector<ShiftResult> results;
};

// Shifts every reference (triplets) or first image (pairs) and re-scores
// with 2AFC or JND mAP respectively.
ShiftReport pixel_shift_experiment(const std::vector<EvalRecord>& records, const MetricFn& metric,
                                   const std::vector<int64_t>& shifts, uint64_t seed);

// ---- Equivalent noise -------------------------------------------------------

// 40 evenly spaced values from 0.01 to 0.60.
std::vector<double> default_sigma_grid();
Tensor add_gaussian_noise(const Tensor& image, double sigma, Rng& rng);
// Central crop to round((1 - 0.05 k) E) then box-resampled back, k in 1..5.
Tensor zoom_corruption(const Tensor& image, int k);

// Index of the grid value nearest to `target` (the first on a tie).
size_t nearest_index(const std::vector<double>& values, double target);

struct EquivalentNoise {
  double sigma = 0.0;
  double corruption_mean = 0.0;
  std::vector<double> grid;
  std::vector<double> grid_means;
};

// Noise for grid point j and image i is drawn from
// derive_seed(derive_seed(seed, j), i); metric seeds are record_seed(seed, i).
EquivalentNoise equivalent_noise(const std::vector<Tensor>& refs,
                                 const std::vector<Tensor>& corrupted, const MetricFn& metric,
                                 const std::vector<double>& grid, uint64_t seed);

// ---- Rank correlation -------------------------------------------------------

// 1-based ranks, ties sharing their average rank.
std::vector<double> average_ranks(const std::vector<double>& v);
double spearman_rho(const std::vector<double>& a, const std::vector<double>& b);

// ---- Synthetic manifests ----------------------------------------------------

enum class DistortionKind { noise, blur, contrast };

// Severity in [0, 1] mapped onto each distortion's strength.
Tensor distort(const Tensor& image, DistortionKind kind, double severity, Rng& rng);

struct SynthEvalConfig {
  SynthConfig scene;            // scene renderer; patch = image extent
  double label_sharpness = 12;  // h = logistic(sharpness * (severity0 - severity1))
  double same_threshold = 0.15; // JND pairs below this severity are "same"
};

// Triplets: clean scene reference, two independently distorted versions.
std::vector<EvalRecord> synth_triplets(uint64_t seed, size_t count, const SynthEvalConfig& cfg = {});
// Pairs: clean scene and one distorted version; same = severity below threshold.
std::vector<EvalRecord> synth_jnd_pairs(uint64_t seed, size_t count, const SynthEvalConfig& cfg = {});

// ---- Reports ----------------------------------------------------------------

struct ExperimentReport {
  std::string experiment;
  std::string metric;
  uint64_t seed = 0;
  double score = 0.0;
  std::vector<std::pair<std::string, double>> conditions;
  std::vector<std::pair<std::string, std::string>> config;
};

// Writes <dir>/<experiment>.txt (key=value lines) and <dir>/<experiment>.csv
// (condition,value). Values are printed with %.17g.
void write_report(const std::filesystem::path& dir, const ExperimentReport& report);
ExperimentReport read_report(const std::filesystem::path& file);

}  // namespace pim

#endif  // PIM_EVALHARNESS_HPP_
