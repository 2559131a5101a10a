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

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>
#include <utility>

#include "pim/objective.hpp"

namespace pim {
namespace {

namespace fs = std::filesystem;

// Stream indices under the run seed; step noise uses the step number itself.
constexpr uint64_t kEpochStream = 0x65706f6368000000ULL;

bool all_finite(const Tensor& t) {
  for (float v : t.data())
    if (!std::isfinite(v)) return false;
  return true;
}

// Epoch-wise seeded permutation of pair indices, consumed batch by batch.
class BatchSampler {
 public:
  BatchSampler(size_t n, uint64_t seed) : order_(n), seed_(seed) { reshuffle(); }

  std::vector<size_t> next(int64_t batch) {
    std::vector<size_t> picked;
    picked.reserve(static_cast<size_t>(batch));
    while (static_cast<int64_t>(picked.size()) < batch) {
      if (cursor_ == order_.size()) {
        ++epoch_;
        reshuffle();
      }
      picked.push_back(order_[cursor_++]);
    }
    return picked;
  }

 private:
  void reshuffle() {
    std::iota(order_.begin(), order_.end(), size_t{0});
    Rng rng(derive_seed(seed_ ^ kEpochStream, epoch_));
    std::shuffle(order_.begin(), order_.end(), rng);
    cursor_ = 0;
  }

  std::vector<size_t> order_;
  uint64_t seed_;
  uint64_t epoch_ = 0;
  size_t cursor_ = 0;
};

std::pair<Tensor, Tensor> gather(const PairSet& pairs, const std::vector<size_t>& idx, int64_t P) {
  const auto K = static_cast<int64_t>(idx.size());
  Tensor x(Shape{K, 3, P, P}), y(Shape{K, 3, P, P});
  const size_t plane = static_cast<size_t>(3 * P * P);
  for (size_t k = 0; k < idx.size(); ++k) {
    const FramePair p = pairs.get(idx[k]);
    if (p.x.shape() != Shape{3, P, P} || p.y.shape() != Shape{3, P, P}) {
      throw ShapeError("pair " + std::to_string(idx[k]) + " is not [3, " + std::to_string(P) +
                       ", " + std::to_string(P) + "]");
    }
    std::copy(p.x.data().begin(), p.x.data().end(), x.data().begin() + k * plane);
    std::copy(p.y.data().begin(), p.y.data().end(), y.data().begin() + k * plane);
  }
  return {std::move(x), std::move(y)};
}

std::vector<int64_t> latent_locations(const LatentBatch<float>& batch) {
  std::vector<int64_t> L;
  const auto& ref = batch.full_means.empty() ? batch.qx_means : batch.full_means;
  for (const auto& v : ref) L.push_back(v.shape().back());
  return L;
}

}  // namespace

void TrainingConfig::validate() const {
  if (batch_size < 2) throw Error("batch size must be at least 2");
  if (steps <= 0) throw Error("step count must be positive");
  if (beta_horizon < 0 || beta_horizon > steps) {
    throw Error("beta horizon " + std::to_string(beta_horizon) + " must lie in [0, steps = " +
                std::to_string(steps) + "]");
  }
  if (crop <= 0) throw Error("crop size must be positive");
  if (checkpoint_every <= 0) throw Error("checkpoint interval must be positive");
}

TrainingConfig ablation_training_config() {
  TrainingConfig c;
  c.steps = 60000;
  return c;
}

std::string format_log_line(const StepRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "step %lld loss %.9g beta %.9g lr %.9g term_i %.9g term_cx %.9g term_cy %.9g",
                static_cast<long long>(r.step), r.report.loss, r.report.beta, r.lr,
                r.report.term_i, r.report.term_cx, r.report.term_cy);
  return buf;
}

TrainingResult train(const TrainingConfig& config, const PairSet& pairs, ModelParameters init,
                     const fs::path& out_dir, const StepCallback& on_step) {
  config.validate();
  if (pairs.size() == 0) throw Error("training set is empty");
  const int64_t P = pairs.patch_size();

  TrainingResult result{std::move(init), {}, {}};
  ModelParameters& params = result.params;
  AdamState adam(params.tensors());
  BatchSampler sampler(pairs.size(), config.seed);

  std::ofstream log;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    log.open(out_dir / "loss.log", std::ios::trunc);
    if (!log) throw Error("cannot open '" + (out_dir / "loss.log").string() + "'");
    log << "# objective " << to_string(config.objective) << "\n";
  }
  auto checkpoint = [&](const std::string& name, int64_t step) {
    if (out_dir.empty()) return;
    const fs::path path = out_dir / name;
    save_checkpoint(path, params, static_cast<uint64_t>(step));
    result.checkpoints.push_back(path);
  };

  for (int64_t step = 0; step < config.steps; ++step) {
    const auto [x, y] = gather(pairs, sampler.next(config.batch_size), P);
    const double beta = config.objective == ObjectiveKind::ixyz
                            ? beta_schedule(step, config.beta_horizon)
                            : 0.0;
    const double lr = config.lr.at(step);

    Tape tape;
    BoundParameters<float> bound(tape, params, true);
    StepRecord record{step, lr, {}};
    std::vector<Tensor> grads;
    try {
      const LatentBatch<float> batch = encode_batch(bound, x, y, config.crop, config.objective);
      Rng rng(derive_seed(config.seed, static_cast<uint64_t>(step)));
      const LatentNoise noise =
          draw_latent_noise(rng, config.batch_size, params.architecture().latent_dim,
                            latent_locations(batch));
      const ObjectiveResult<float> obj = evaluate_objective(batch, noise, config.objective, beta);
      record.report = obj.report;
      if (!std::isfinite(obj.report.loss)) {
        throw NumericError("loss is " + std::to_string(obj.report.loss));
      }
      tape.backward(obj.loss);
      for (const Var<float>& v : bound.vars()) {
        grads.push_back(tape.grad(v));
        if (!all_finite(grads.back())) {
          throw NumericError("non-finite gradient for " + params.name(grads.size() - 1));
        }
      }
    } catch (const NumericError& e) {
      checkpoint("ckpt_" + std::to_string(step) + "_lastgood.pimk", step);
      throw NumericError("step " + std::to_string(step) + ": " + e.what());
    }
    adam.step(params.tensors(), grads, lr);

    result.log.push_back(record);
    if (log) log << format_log_line(record) << "\n" << std::flush;
    const int64_t done = step + 1;
    if (done % config.checkpoint_every == 0 || done == config.steps) {
      checkpoint("ckpt_" + std::to_string(done) + ".pimk", done);
    }
    if (on_step && !on_step(record)) {
      if (done % config.checkpoint_every != 0 && done != config.steps) {
        checkpoint("ckpt_" + std::to_string(done) + ".pimk", done);
      }
      break;
    }
  }
  return result;
}

}  // namespace pim
