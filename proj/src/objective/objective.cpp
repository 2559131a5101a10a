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

#include "pim/objective.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace pim {
namespace {

template <typename T>
Var<T> flatten_spatial(Var<T> x) {
  // [..., H, W] -> [..., H * W]
  Shape s = x.shape();
  const int64_t w = s.back();
  s.pop_back();
  s.back() *= w;
  return reshape(x, s);
}

template <typename T>
Var<T> constant_like(BasicTape<T>& tape, const TensorD& t) {
  return tape.constant(t.cast<T>());
}

template <typename T>
BasicTape<T>& tape_of(const std::vector<Var<T>>& v) {
  if (v.empty() || !v.front().valid()) throw Error("objective: empty latent batch");
  return *v.front().tape;
}

// Samples z = mean + eps from the unit-variance full encoder, per scale.
template <typename T>
std::vector<Var<T>> sample_full(const LatentBatch<T>& batch, const LatentNoise& noise) {
  BasicTape<T>& tape = tape_of(batch.full_means);
  std::vector<Var<T>> z;
  for (size_t s = 0; s < batch.scales(); ++s) {
    if (noise.eps.at(s).shape() != batch.full_means[s].shape()) {
      throw ShapeError("latent noise " + shape_to_string(noise.eps[s].shape()) +
                       " does not match means " + shape_to_string(batch.full_means[s].shape()));
    }
    z.push_back(add(batch.full_means[s], constant_like(tape, noise.eps[s])));
  }
  return z;
}

// L[k, i] = -0.5 * ||z_k - mu_i||^2 summed over dims, locations and scales.
template <typename T>
Var<T> pairwise_gaussian_scores(const std::vector<Var<T>>& means, const std::vector<Var<T>>& z) {
  Var<T> total;
  for (size_t s = 0; s < means.size(); ++s) {
    const int64_t K = z[s].dim(0), D = z[s].dim(1), L = z[s].dim(2);
    const Var<T> d = sub(reshape(z[s], Shape{K, 1, D, L}),
                         reshape(means[s], Shape{1, means[s].dim(0), D, L}));
    const Var<T> score = scale(sum(sum(square(d), 3), 2), -0.5);
    total = s == 0 ? score : add(total, score);
  }
  return total;
}

// Per-location mixture log density without the Gaussian constant, summed over
// locations and scales. With `pairwise`, returns S[k, i] = log q(z_k | source_i)
// ([K, K]); otherwise S[k] = log q(z_k | source_k) ([K]).
template <typename T>
Var<T> mixture_scores(const std::vector<Var<T>>& log_w, const std::vector<Var<T>>& means,
                      const std::vector<Var<T>>& z, bool pairwise) {
  Var<T> total;
  for (size_t s = 0; s < means.size(); ++s) {
    const int64_t K = z[s].dim(0), D = z[s].dim(1), L = z[s].dim(2);
    const int64_t C = means[s].dim(1);
    Var<T> score;
    if (pairwise) {
      const int64_t M = means[s].dim(0);
      const Var<T> d =
          sub(reshape(z[s], Shape{K, 1, 1, D, L}), reshape(means[s], Shape{1, M, C, D, L}));
      const Var<T> per_component = add(scale(sum(square(d), 3), -0.5),
                                       reshape(log_w[s], Shape{1, M, C, L}));  // [K, M, C, L]
      score = sum(logsumexp(per_component, 2), 2);                              // [K, M]
    } else {
      const Var<T> d = sub(reshape(z[s], Shape{K, 1, D, L}), means[s]);
      const Var<T> per_component = add(scale(sum(square(d), 2), -0.5), log_w[s]);  // [K, C, L]
      score = sum(logsumexp(per_component, 1), 1);                                  // [K]
    }
    total = s == 0 ? score : add(total, score);
  }
  return total;
}

// sum over scales of D * L * 0.5 * log(2 pi)
template <typename T>
double gaussian_log_normalizer(const std::vector<Var<T>>& z) {
  double n = 0.0;
  for (const auto& v : z) n += static_cast<double>(v.dim(1) * v.dim(2));
  return 0.5 * n * std::log(2.0 * std::numbers::pi);
}

// est_k = S[k,k] - logsumexp_i S[k,i] + log K, computed relative to the
// diagonal so that identical rows give exactly 0.
template <typename T>
Var<T> contrastive_estimate(Var<T> scores) {
  const int64_t K = scores.dim(0);
  const Var<T> diag = reshape(diagonal(scores), Shape{K, 1});
  return add_scalar(scale(logsumexp(sub(scores, diag), 1), -1.0), std::log(static_cast<double>(K)));
}

template <typename T>
double mean_value(Var<T> v) {
  double s = 0.0;
  for (T x : v.value().data()) s += static_cast<double>(x);
  return s / static_cast<double>(v.value().size());
}

void check_beta(double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw Error("beta = " + std::to_string(beta) + " outside [0, 1]");
  }
}

}  // namespace

std::string to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::ixyz: return "ixyz";
    case ObjectiveKind::infonce: return "infonce";
    case ObjectiveKind::single_infonce: return "single_infonce";
  }
  return "unknown";
}

ObjectiveKind parse_objective_kind(const std::string& name) {
  if (name == "ixyz") return ObjectiveKind::ixyz;
  if (name == "infonce") return ObjectiveKind::infonce;
  if (name == "single_infonce" || name == "single-infonce") return ObjectiveKind::single_infonce;
  throw Error("unknown objective '" + name + "' (expected ixyz, infonce or single_infonce)");
}

double beta_schedule(int64_t step, int64_t horizon) {
  if (step < 0) throw Error("beta_schedule: negative step");
  if (horizon <= 0 || step >= horizon) return 1.0;
  return static_cast<double>(step) / static_cast<double>(horizon);
}

template <typename T>
Features<T> center_crop_aligned(const Features<T>& features, int64_t size) {
  Features<T> out;
  for (size_t s = 0; s < features.size(); ++s) {
    const Var<T>& f = features[s];
    if (f.shape().size() != 4) throw ShapeError("center_crop_aligned expects [N, C, H, W]");
    const int64_t top = center_offset(f.dim(2), size), left = center_offset(f.dim(3), size);
    out[s] = slice(slice(f, 2, top, size), 3, left, size);
  }
  return out;
}

template <typename T>
int64_t LatentBatch<T>::batch() const {
  if (!full_means.empty()) return full_means.front().dim(0);
  if (!qx_means.empty()) return qx_means.front().dim(0);
  return 0;
}

template <typename T>
size_t LatentBatch<T>::scales() const {
  return std::max(full_means.size(), qx_means.size());
}

LatentNoise draw_latent_noise(Rng& rng, int64_t batch, int64_t latent_dim,
                              const std::vector<int64_t>& locations) {
  LatentNoise noise;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int64_t L : locations) {
    noise.eps.push_back(normal_tensor<double>(Shape{batch, latent_dim, L}, rng));
    std::vector<double> u(static_cast<size_t>(batch * L));
    for (double& v : u) v = unit(rng);
    noise.uniform.push_back(std::move(u));
  }
  return noise;
}

std::vector<int32_t> choose_components(const TensorD& log_weights,
                                       const std::vector<double>& uniform) {
  const int64_t K = log_weights.dim(0), C = log_weights.dim(1), L = log_weights.dim(2);
  if (static_cast<int64_t>(uniform.size()) != K * L) {
    throw ShapeError("choose_components: need one uniform per (batch, location)");
  }
  std::vector<int32_t> choice(static_cast<size_t>(K * L));
  for (int64_t k = 0; k < K; ++k)
    for (int64_t l = 0; l < L; ++l) {
      double total = 0.0;
      for (int64_t c = 0; c < C; ++c) total += std::exp(log_weights.at({k, c, l}));
      const double target = uniform[static_cast<size_t>(k * L + l)] * total;
      double acc = 0.0;
      int32_t pick = static_cast<int32_t>(C - 1);
      for (int64_t c = 0; c < C; ++c) {
        acc += std::exp(log_weights.at({k, c, l}));
        if (target < acc) {
          pick = static_cast<int32_t>(c);
          break;
        }
      }
      choice[static_cast<size_t>(k * L + l)] = pick;
    }
  return choice;
}

template <typename T>
Var<T> minibatch_marginal_log_density(const std::vector<Var<T>>& full_means,
                                      const std::vector<Var<T>>& z) {
  if (full_means.empty() || full_means.front().dim(0) == 0) {
    throw Error("minibatch marginal of an empty batch");
  }
  const double K = static_cast<double>(full_means.front().dim(0));
  const Var<T> scores = pairwise_gaussian_scores(full_means, z);
  return add_scalar(logsumexp(scores, 1), -std::log(K) - gaussian_log_normalizer(z));
}

template <typename T>
Var<T> mixture_log_density(const std::vector<Var<T>>& log_w, const std::vector<Var<T>>& means,
                           const std::vector<Var<T>>& z) {
  return add_scalar(mixture_scores(log_w, means, z, false), -gaussian_log_normalizer(z));
}

template <typename T>
ObjectiveResult<T> ixyz_objective(const LatentBatch<T>& batch, const LatentNoise& noise,
                                  double beta) {
  check_beta(beta);
  if (batch.full_means.empty() || batch.qx_means.empty() || batch.qy_means.empty()) {
    throw Error("ixyz objective needs full-encoder means and both marginals");
  }
  const std::vector<Var<T>> z = sample_full(batch, noise);
  const Var<T> scores = pairwise_gaussian_scores(batch.full_means, z);  // [K, K]
  const Var<T> log_p = diagonal(scores);
  const Var<T> term_i = contrastive_estimate(scores);
  const Var<T> term_cx = sub(log_p, mixture_scores(batch.qy_log_w, batch.qy_means, z, false));
  const Var<T> term_cy = sub(log_p, mixture_scores(batch.qx_log_w, batch.qx_means, z, false));
  const Var<T> objective = sub(term_i, scale(add(term_cx, term_cy), beta));

  ObjectiveResult<T> out;
  out.loss = scale(mean_all(objective), -1.0);
  out.report.loss = static_cast<double>(out.loss.value().item());
  out.report.term_i = mean_value(term_i);
  out.report.term_cx = mean_value(term_cx);
  out.report.term_cy = mean_value(term_cy);
  out.report.beta = beta;
  return out;
}

template <typename T>
ObjectiveResult<T> infonce_objective(const LatentBatch<T>& batch, const LatentNoise& noise,
                                     bool single_variable) {
  if (batch.qx_means.empty() || (!single_variable && batch.qy_means.empty())) {
    throw Error("InfoNCE objective needs the marginal encodings");
  }
  if (batch.batch() < 2) throw Error("InfoNCE needs a batch of at least 2 pairs");
  BasicTape<T>& tape = tape_of(batch.qx_means);
  std::vector<Var<T>> z;
  for (size_t s = 0; s < batch.qx_means.size(); ++s) {
    const auto choice =
        choose_components(batch.qx_log_w[s].value().template cast<double>(), noise.uniform.at(s));
    const Var<T> picked = select_components(batch.qx_means[s], choice);
    if (noise.eps.at(s).shape() != picked.shape()) {
      throw ShapeError("latent noise " + shape_to_string(noise.eps[s].shape()) +
                       " does not match latents " + shape_to_string(picked.shape()));
    }
    z.push_back(add(picked, constant_like(tape, noise.eps[s])));
  }
  const auto& log_w = single_variable ? batch.qx_log_w : batch.qy_log_w;
  const auto& means = single_variable ? batch.qx_means : batch.qy_means;
  const Var<T> estimate = contrastive_estimate(mixture_scores(log_w, means, z, true));

  ObjectiveResult<T> out;
  out.loss = scale(mean_all(estimate), -1.0);
  out.report.loss = static_cast<double>(out.loss.value().item());
  out.report.term_i = mean_value(estimate);
  return out;
}

template <typename T>
LatentBatch<T> encode_batch(const BoundParameters<T>& params, const Tensor& x, const Tensor& y,
                            int64_t crop, ObjectiveKind kind) {
  if (x.shape() != y.shape()) {
    throw ShapeError("pair batch extents differ: " + shape_to_string(x.shape()) + " vs " +
                     shape_to_string(y.shape()));
  }
  const PyramidKind pk = params.architecture().pyramid;
  const Features<T> fx = frontend_center(params, decompose(x, pk), crop);
  const bool need_y = kind != ObjectiveKind::single_infonce;
  const Features<T> fy = need_y ? frontend_center(params, decompose(y, pk), crop) : Features<T>{};

  LatentBatch<T> out;
  const MixtureField<T> qx = marginal_encode(params, fx);
  for (const auto& m : qx) {
    out.qx_log_w.push_back(flatten_spatial(m.log_weights));
    out.qx_means.push_back(flatten_spatial(m.means));
  }
  if (need_y) {
    const MixtureField<T> qy = marginal_encode(params, fy);
    for (const auto& m : qy) {
      out.qy_log_w.push_back(flatten_spatial(m.log_weights));
      out.qy_means.push_back(flatten_spatial(m.means));
    }
  }
  if (kind == ObjectiveKind::ixyz) {
    for (const auto& mu : full_encode(params, fx, fy)) out.full_means.push_back(flatten_spatial(mu));
  }
  return out;
}

template <typename T>
ObjectiveResult<T> evaluate_objective(const LatentBatch<T>& batch, const LatentNoise& noise,
                                      ObjectiveKind kind, double beta) {
  switch (kind) {
    case ObjectiveKind::ixyz: return ixyz_objective(batch, noise, beta);
    case ObjectiveKind::infonce: return infonce_objective(batch, noise, false);
    case ObjectiveKind::single_infonce: return infonce_objective(batch, noise, true);
  }
  throw Error("unknown objective");
}

#define PIM_INSTANTIATE_OBJECTIVE(T)                                                         \
  template struct LatentBatch<T>;                                                            \
  template Features<T> center_crop_aligned(const Features<T>&, int64_t);                     \
  template Var<T> minibatch_marginal_log_density(const std::vector<Var<T>>&,                 \
                                                 const std::vector<Var<T>>&);                \
  template Var<T> mixture_log_density(const std::vector<Var<T>>&, const std::vector<Var<T>>&, \
                                      const std::vector<Var<T>>&);                           \
  template ObjectiveResult<T> ixyz_objective(const LatentBatch<T>&, const LatentNoise&,      \
                                             double);                                        \
  template ObjectiveResult<T> infonce_objective(const LatentBatch<T>&, const LatentNoise&,   \
                                                bool);                                       \
  template LatentBatch<T> encode_batch(const BoundParameters<T>&, const Tensor&,             \
                                       const Tensor&, int64_t, ObjectiveKind);               \
  template ObjectiveResult<T> evaluate_objective(const LatentBatch<T>&, const LatentNoise&,  \
                                                 ObjectiveKind, double);

PIM_INSTANTIATE_OBJECTIVE(float)
PIM_INSTANTIATE_OBJECTIVE(double)

}  // namespace pim
