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

#ifndef PIM_OBJECTIVE_HPP_
#define PIM_OBJECTIVE_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "pim/data.hpp"
#include "pim/encoders.hpp"
#include "pim/numerics/adam.hpp"
#include "pim/numerics/random.hpp"

namespace pim {

enum class ObjectiveKind { ixyz, infonce, single_infonce };

std::string to_string(ObjectiveKind kind);
ObjectiveKind parse_objective_kind(const std::string& name);

// Linear ramp from 0 at step 0 to 1 at `horizon`, constant afterwards.
double beta_schedule(int64_t step, int64_t horizon = 10000);

// size x size window at every scale, centered on the same image point.
template <typename T>
Features<T> center_crop_aligned(const Features<T>& features, int64_t size = 8);

// Latent quantities of a batch of K pairs, one entry per scale. Spatial
// extents are flattened into L locations.
template <typename T>
struct LatentBatch {
  std::vector<Var<T>> full_means;  // [K, D, L]     mean of p(z | x_k, y_k)
  std::vector<Var<T>> qx_log_w;    // [K, C, L]     log mixture weights of q(z | x_k)
  std::vector<Var<T>> qx_means;    // [K, C, D, L]
  std::vector<Var<T>> qy_log_w;
  std::vector<Var<T>> qy_means;

  int64_t batch() const;
  size_t scales() const;
};

// Randomness of one objective evaluation, drawn independently of the model so
// that a fixed draw makes the loss a deterministic function of the parameters.
struct LatentNoise {
  std::vector<TensorD> eps;                  // [K, D, L] standard normal, per scale
  std::vector<std::vector<double>> uniform;  // K * L uniforms in [0, 1), per scale
};

// Shapes are taken per scale as (K, D, L).
LatentNoise draw_latent_noise(Rng& rng, int64_t batch, int64_t latent_dim,
                              const std::vector<int64_t>& locations);

// Component index per (k, l) by inverting the cumulative mixture weights.
std::vector<int32_t> choose_components(const TensorD& log_weights,
                                       const std::vector<double>& uniform);

// Log density of z_k under the batch average of the unit-variance full-encoder
// Gaussians, normalizing constants included. Returns [K].
template <typename T>
Var<T> minibatch_marginal_log_density(const std::vector<Var<T>>& full_means,
                                      const std::vector<Var<T>>& z);

// log of the unit-variance mixture density q(z_k | .) with constants. Returns [K].
template <typename T>
Var<T> mixture_log_density(const std::vector<Var<T>>& log_w,
                           const std::vector<Var<T>>& means, const std::vector<Var<T>>& z);

struct LossReport {
  double loss = 0.0;
  double term_i = 0.0;   // E log p(z|x,y) / p̂(z): informativeness, bounds I(Z; X,Y)
  double term_cx = 0.0;  // E log p(z|x,y) / q(z|y): compression, bounds I(X; Z | Y)
  double term_cy = 0.0;  // E log p(z|x,y) / q(z|x): compression, bounds I(Y; Z | X)
  double beta = 0.0;
};

template <typename T>
struct ObjectiveResult {
  Var<T> loss;  // scalar to minimize
  LossReport report;
};

// Negated IXYZ Lagrangian: informativeness minus beta times both compression
// terms, with z = mean + eps drawn from the full encoder.
template <typename T>
ObjectiveResult<T> ixyz_objective(const LatentBatch<T>& batch, const LatentNoise& noise,
                                  double beta);

// Negated minibatch InfoNCE estimate with z ~ q(z|x_k) scored against q(z|y_i)
// (or q(z|x_i) when `single_variable`). The estimate never exceeds log K.
template <typename T>
ObjectiveResult<T> infonce_objective(const LatentBatch<T>& batch, const LatentNoise& noise,
                                     bool single_variable);

// Runs pyramid, cropped frontend and the heads the objective needs.
template <typename T>
LatentBatch<T> encode_batch(const BoundParameters<T>& params, const Tensor& x,
                            const Tensor& y, int64_t crop, ObjectiveKind kind);

template <typename T>
ObjectiveResult<T> evaluate_objective(const LatentBatch<T>& batch, const LatentNoise& noise,
                                      ObjectiveKind kind, double beta);

struct TrainingConfig {
  ObjectiveKind objective = ObjectiveKind::ixyz;
  int64_t batch_size = 50;
  int64_t steps = 100000;
  LrSchedule lr;
  int64_t beta_horizon = 10000;
  int64_t crop = 8;
  uint64_t seed = 0;
  int64_t checkpoint_every = 500;

  // Throws Error on non-positive counts or a horizon outside [0, steps].
  void validate() const;
};

// Ablation budget: same recipe, 60 000 steps.
TrainingConfig ablation_training_config();

struct StepRecord {
  int64_t step = 0;
  double lr = 0.0;
  LossReport report;
};

// One loss-log line: "step <n> loss <v> beta <b> lr <r> term_i <..> term_cx <..> term_cy <..>".
std::string format_log_line(const StepRecord& record);

struct TrainingResult {
  ModelParameters params;
  std::vector<StepRecord> log;
  std::vector<std::filesystem::path> checkpoints;
};

// Observer called after every step; return false to stop early.
using StepCallback = std::function<bool(const StepRecord&)>;

// Trains `init` on batches drawn from `pairs` (epoch-wise seeded shuffles).
// When `out_dir` is non-empty, (re)writes out_dir/loss.log and writes
// out_dir/ckpt_<step>.pimk every checkpoint_every steps and at the end. A
// non-finite loss saves the last good parameters as ckpt_<step>_lastgood.pimk
// and rethrows.
TrainingResult train(const TrainingConfig& config, const PairSet& pairs,
                     ModelParameters init, const std::filesystem::path& out_dir = {},
                     const StepCallback& on_step = {});

}  // namespace pim

#endif  // PIM_OBJECTIVE_HPP_
