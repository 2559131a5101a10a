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

#include "pim/metric.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "pim/numerics/random.hpp"

namespace pim {
namespace {

// Components of one location, gathered contiguously: weights[C], means[C][D].
struct LocalMixture {
  int64_t C = 0, D = 0;
  std::vector<double> log_w, mu;

  void gather(const MixtureDensity& m, int64_t l) {
    C = m.means.dim(0);
    D = m.means.dim(1);
    const int64_t L = m.means.dim(2);
    log_w.resize(static_cast<size_t>(C));
    mu.resize(static_cast<size_t>(C * D));
    for (int64_t c = 0; c < C; ++c) {
      log_w[static_cast<size_t>(c)] = m.log_weights[static_cast<size_t>(c * L + l)];
      for (int64_t d = 0; d < D; ++d) {
        mu[static_cast<size_t>(c * D + d)] = m.means[static_cast<size_t>((c * D + d) * L + l)];
      }
    }
  }

  // Log density up to the shared Gaussian normalizer.
  double log_density(const double* z) const {
    double best = -std::numeric_limits<double>::infinity();
    double terms[64];
    std::vector<double> spill;
    double* t = terms;
    if (C > 64) {
      spill.resize(static_cast<size_t>(C));
      t = spill.data();
    }
    for (int64_t c = 0; c < C; ++c) {
      double sq = 0.0;
      for (int64_t d = 0; d < D; ++d) {
        const double diff = z[d] - mu[static_cast<size_t>(c * D + d)];
        sq += diff * diff;
      }
      t[c] = log_w[static_cast<size_t>(c)] - 0.5 * sq;
      best = std::max(best, t[c]);
    }
    double acc = 0.0;
    for (int64_t c = 0; c < C; ++c) acc += std::exp(t[c] - best);
    return best + std::log(acc);
  }

  void sample(Rng& rng, std::normal_distribution<double>& normal,
              std::uniform_real_distribution<double>& unit, double* z) const {
    const double u = unit(rng);
    double acc = 0.0;
    int64_t pick = C - 1;
    for (int64_t c = 0; c < C; ++c) {
      acc += std::exp(log_w[static_cast<size_t>(c)]);
      if (u < acc) {
        pick = c;
        break;
      }
    }
    for (int64_t d = 0; d < D; ++d) z[d] = mu[static_cast<size_t>(pick * D + d)] + normal(rng);
  }
};

void check_same_layout(const MixtureImage& p, const MixtureImage& q) {
  if (p.size() != q.size()) throw ShapeError("mixture fields have different scale counts");
  for (size_t s = 0; s < p.size(); ++s) {
    if (p[s].means.shape() != q[s].means.shape() ||
        p[s].log_weights.shape() != q[s].log_weights.shape()) {
      throw ShapeError("mixture fields differ at scale " + std::to_string(s) + ": " +
                       shape_to_string(p[s].means.shape()) + " vs " +
                       shape_to_string(q[s].means.shape()));
    }
    const auto& m = p[s].means;
    if (m.rank() != 3 || p[s].log_weights.shape() != Shape{m.dim(0), m.dim(2)}) {
      throw ShapeError("mixture density expects log_weights [C, L] and means [C, D, L]");
    }
  }
}

Tensor as_batch(const Tensor& image) {
  if (image.rank() == 4) return image;
  Shape s = image.shape();
  s.insert(s.begin(), 1);
  return image.reshaped(s);
}

Tensor stack_pair(const Tensor& x, const Tensor& y) {
  const Tensor bx = as_batch(x), by = as_batch(y);
  Shape s = bx.shape();
  s[0] = 2;
  Tensor out(s);
  std::copy(bx.data().begin(), bx.data().end(), out.data().begin());
  std::copy(by.data().begin(), by.data().end(), out.data().begin() + static_cast<int64_t>(bx.size()));
  return out;
}

}  // namespace

PimModel::PimModel(ModelParameters params, int mc_samples)
    : params_(std::move(params)), mc_samples_(mc_samples) {
  if (mc_samples_ < 1) throw Error("Monte-Carlo sample count must be at least 1");
  if (params_.size() == 0) throw Error("PIM model has no parameters");
}

PimModel PimModel::load(const std::filesystem::path& checkpoint, int mc_samples) {
  return PimModel(load_checkpoint(checkpoint).params, mc_samples);
}

std::vector<MixtureImage> split_mixtures(const MixtureValues& values) {
  const int64_t N = values.means[0].dim(0);
  std::vector<MixtureImage> out(static_cast<size_t>(N));
  for (size_t s = 0; s < kNumScales; ++s) {
    const Tensor& lw = values.log_weights[s];  // [N, C, H, W]
    const Tensor& mu = values.means[s];        // [N, C, D, H, W]
    const int64_t C = mu.dim(1), D = mu.dim(2), L = mu.dim(3) * mu.dim(4);
    for (int64_t n = 0; n < N; ++n) {
      MixtureDensity m{TensorD(Shape{C, L}), TensorD(Shape{C, D, L})};
      const size_t wo = static_cast<size_t>(n * C * L), mo = static_cast<size_t>(n * C * D * L);
      for (size_t i = 0; i < m.log_weights.size(); ++i) m.log_weights[i] = lw[wo + i];
      for (size_t i = 0; i < m.means.size(); ++i) m.means[i] = mu[mo + i];
      out[static_cast<size_t>(n)].push_back(std::move(m));
    }
  }
  return out;
}

KlEstimate symmetrized_kl_mc(const MixtureImage& p, const MixtureImage& q, int samples,
                             uint64_t seed) {
  if (samples < 1) throw Error("Monte-Carlo sample count must be at least 1");
  check_same_layout(p, q);
  // Flattened location index across scales.
  std::vector<std::pair<size_t, int64_t>> sites;
  for (size_t s = 0; s < p.size(); ++s)
    for (int64_t l = 0; l < p[s].means.dim(2); ++l) sites.emplace_back(s, l);

  const auto S = static_cast<int64_t>(sites.size());
  const auto N = static_cast<size_t>(samples);
  // ratio[site][n]: log p - log q at z ~ p plus log q - log p at z ~ q.
  std::vector<double> ratio(static_cast<size_t>(S) * N);
#pragma omp parallel
  {
    LocalMixture lp, lq;
    std::vector<double> z;
#pragma omp for schedule(static)
    for (int64_t i = 0; i < S; ++i) {
      const auto [s, l] = sites[static_cast<size_t>(i)];
      lp.gather(p[s], l);
      lq.gather(q[s], l);
      z.resize(static_cast<size_t>(lp.D));
      Rng rng(derive_seed(seed, static_cast<uint64_t>(i)));
      std::normal_distribution<double> normal;
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      double* out = ratio.data() + static_cast<size_t>(i) * N;
      for (size_t n = 0; n < N; ++n) {
        lp.sample(rng, normal, unit, z.data());
        double r = lp.log_density(z.data()) - lq.log_density(z.data());
        lq.sample(rng, normal, unit, z.data());
        r += lq.log_density(z.data()) - lp.log_density(z.data());
        out[n] = r;
      }
    }
  }

  std::vector<double> total(N, 0.0);
  for (int64_t i = 0; i < S; ++i) {
    const double* row = ratio.data() + static_cast<size_t>(i) * N;
    for (size_t n = 0; n < N; ++n) total[n] += row[n];
  }
  double mean = 0.0;
  for (double v : total) mean += v;
  mean /= static_cast<double>(N);
  double var = 0.0;
  for (double v : total) var += (v - mean) * (v - mean);

  KlEstimate est;
  est.raw = mean;
  est.std_error = N > 1 ? std::sqrt(var / static_cast<double>(N - 1) / static_cast<double>(N)) : 0.0;
  est.clamped = mean < 0.0;
  est.value = std::max(mean, 0.0);
  return est;
}

void check_metric_inputs(const Tensor& x, const Tensor& y) {
  for (const Tensor* t : {&x, &y}) {
    const bool ok = (t->rank() == 3 && t->dim(0) == 3) ||
                    (t->rank() == 4 && t->dim(0) == 1 && t->dim(1) == 3);
    if (!ok) {
      throw ShapeError("expected an RGB image [3, H, W], got " + shape_to_string(t->shape()));
    }
  }
  if (x.size() != y.size() || x.dim(x.rank() - 1) != y.dim(y.rank() - 1) ||
      x.dim(x.rank() - 2) != y.dim(y.rank() - 2)) {
    throw ShapeError("image extents differ: " + shape_to_string(x.shape()) + " vs " +
                     shape_to_string(y.shape()));
  }
  for (const Tensor* t : {&x, &y}) {
    for (float v : t->data()) {
      if (!(v >= 0.0f && v <= 1.0f)) {
        throw Error("pixel value " + std::to_string(v) + " outside [0, 1]");
      }
    }
  }
}

KlEstimate pim_estimate(const Tensor& x, const Tensor& y, const PimModel& model, uint64_t seed) {
  check_metric_inputs(x, y);
  const auto images = split_mixtures(encode_images(model.params(), stack_pair(x, y)));
  return symmetrized_kl_mc(images[0], images[1], model.mc_samples(), seed);
}

double pim(const Tensor& x, const Tensor& y, const PimModel& model, uint64_t seed) {
  return pim_estimate(x, y, model, seed).value;
}

double pim1(const Tensor& x, const Tensor& y, const PimModel& model) {
  if (model.components() != 1) {
    throw Error("pim1 needs a single-component model; this one has " +
                std::to_string(model.components()) + " components");
  }
  check_metric_inputs(x, y);
  const MixtureValues v = encode_images(model.params(), stack_pair(x, y));
  double total = 0.0;
  for (size_t s = 0; s < kNumScales; ++s) {
    const Tensor& mu = v.means[s];
    const size_t half = mu.size() / 2;
    for (size_t i = 0; i < half; ++i) {
      const double d = static_cast<double>(mu[i]) - static_cast<double>(mu[half + i]);
      total += d * d;
    }
  }
  return total;
}

double distance(const Tensor& x, const Tensor& y, const PimModel& model, uint64_t seed) {
  return model.components() == 1 ? pim1(x, y, model) : pim(x, y, model, seed);
}

uint64_t pair_seed(uint64_t seed, const Tensor& x, const Tensor& y) {
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (const Tensor* t : {&x, &y}) {
    for (float v : t->data()) {
      uint32_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      for (int b = 0; b < 4; ++b) {
        h ^= (bits >> (8 * b)) & 0xffu;
        h *= 0x100000001b3ULL;
      }
    }
  }
  return derive_seed(seed, h);
}

std::vector<DistanceResult> batch_distance(const std::vector<std::pair<Tensor, Tensor>>& pairs,
                                           const PimModel& model, uint64_t seed) {
  std::vector<DistanceResult> out(pairs.size());
  for (size_t i = 0; i < pairs.size(); ++i) {
    const auto& [x, y] = pairs[i];
    try {
      out[i].value = distance(x, y, model, pair_seed(seed, x, y));
    } catch (const Error& e) {
      out[i].error = e.what();
    }
  }
  return out;
}

}  // namespace pim
