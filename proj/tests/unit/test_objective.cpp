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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "pim/objective.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace pim;
using pim::testing::log_sum_exp_oracle;

namespace {

namespace fs = std::filesystem;

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

// Plain-array latent batch, one scale; indices are row-major in the shapes
// documented on LatentBatch.
struct RawBatch {
  int64_t K, C, D, L;
  std::vector<double> mu, qx_lw, qx_mu, qy_lw, qy_mu;

  double m(int64_t k, int64_t d, int64_t l) const { return mu[(k * D + d) * L + l]; }
  double lw(const std::vector<double>& w, int64_t k, int64_t c, int64_t l) const {
    return w[(k * C + c) * L + l];
  }
  double cm(const std::vector<double>& v, int64_t k, int64_t c, int64_t d, int64_t l) const {
    return v[((k * C + c) * D + d) * L + l];
  }
};

// Log-weights normalized over components.
std::vector<double> random_log_weights(Rng& rng, int64_t K, int64_t C, int64_t L) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> w(static_cast<size_t>(K * C * L));
  for (auto& v : w) v = n(rng);
  for (int64_t k = 0; k < K; ++k)
    for (int64_t l = 0; l < L; ++l) {
      std::vector<double> col;
      for (int64_t c = 0; c < C; ++c) col.push_back(w[(k * C + c) * L + l]);
      const double z = log_sum_exp_oracle(col);
      for (int64_t c = 0; c < C; ++c) w[(k * C + c) * L + l] -= z;
    }
  return w;
}

std::vector<double> normals(Rng& rng, size_t n, double sd = 1.0) {
  std::normal_distribution<double> d(0.0, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

RawBatch random_raw(uint64_t seed, int64_t K, int64_t C = 3, int64_t D = 2, int64_t L = 2) {
  Rng rng(seed);
  RawBatch b{K, C, D, L, {}, {}, {}, {}, {}};
  b.mu = normals(rng, static_cast<size_t>(K * D * L));
  b.qx_lw = random_log_weights(rng, K, C, L);
  b.qx_mu = normals(rng, static_cast<size_t>(K * C * D * L));
  b.qy_lw = random_log_weights(rng, K, C, L);
  b.qy_mu = normals(rng, static_cast<size_t>(K * C * D * L));
  return b;
}

TensorD to_tensor(const std::vector<double>& v, Shape shape) {
  TensorD t(std::move(shape));
  std::copy(v.begin(), v.end(), t.data().begin());
  return t;
}

LatentBatch<double> bind(TapeD& tape, const RawBatch& b) {
  LatentBatch<double> out;
  out.full_means.push_back(tape.parameter(to_tensor(b.mu, {b.K, b.D, b.L})));
  out.qx_log_w.push_back(tape.parameter(to_tensor(b.qx_lw, {b.K, b.C, b.L})));
  out.qx_means.push_back(tape.parameter(to_tensor(b.qx_mu, {b.K, b.C, b.D, b.L})));
  out.qy_log_w.push_back(tape.parameter(to_tensor(b.qy_lw, {b.K, b.C, b.L})));
  out.qy_means.push_back(tape.parameter(to_tensor(b.qy_mu, {b.K, b.C, b.D, b.L})));
  return out;
}

LatentNoise noise_for(uint64_t seed, int64_t K, int64_t D, int64_t L) {
  Rng rng(seed);
  return draw_latent_noise(rng, K, D, {L});
}

// log N(z; m, I) over D dims.
double log_normal(const std::vector<double>& z, const std::vector<double>& m) {
  double s = 0.0;
  for (size_t d = 0; d < z.size(); ++d) s += (z[d] - m[d]) * (z[d] - m[d]);
  return -0.5 * s - 0.5 * static_cast<double>(z.size()) * kLog2Pi;
}

std::vector<double> z_at(const std::vector<double>& z, const RawBatch& b, int64_t k, int64_t l) {
  std::vector<double> v;
  for (int64_t d = 0; d < b.D; ++d) v.push_back(z[(k * b.D + d) * b.L + l]);
  return v;
}

std::vector<double> full_mean_at(const RawBatch& b, int64_t i, int64_t l) {
  std::vector<double> v;
  for (int64_t d = 0; d < b.D; ++d) v.push_back(b.m(i, d, l));
  return v;
}

double mixture_oracle(const RawBatch& b, const std::vector<double>& lw,
                      const std::vector<double>& mus, int64_t src, const std::vector<double>& z,
                      int64_t k) {
  double total = 0.0;
  for (int64_t l = 0; l < b.L; ++l) {
    std::vector<double> terms;
    for (int64_t c = 0; c < b.C; ++c) {
      std::vector<double> m;
      for (int64_t d = 0; d < b.D; ++d) m.push_back(b.cm(mus, src, c, d, l));
      terms.push_back(b.lw(lw, src, c, l) + log_normal(z_at(z, b, k, l), m));
    }
    total += log_sum_exp_oracle(terms);
  }
  return total;
}

double marginal_oracle(const RawBatch& b, const std::vector<double>& z, int64_t k) {
  std::vector<double> terms;
  for (int64_t i = 0; i < b.K; ++i) {
    double s = 0.0;
    for (int64_t l = 0; l < b.L; ++l) s += log_normal(z_at(z, b, k, l), full_mean_at(b, i, l));
    terms.push_back(s);
  }
  return log_sum_exp_oracle(terms) - std::log(static_cast<double>(b.K));
}

std::vector<double> sample_z(const RawBatch& b, const LatentNoise& n) {
  std::vector<double> z(b.mu);
  for (size_t i = 0; i < z.size(); ++i) z[i] += n.eps[0][i];
  return z;
}

struct IxyzOracle {
  double loss, ti, cx, cy;
};

IxyzOracle ixyz_oracle(const RawBatch& b, const LatentNoise& n, double beta) {
  const auto z = sample_z(b, n);
  IxyzOracle o{0, 0, 0, 0};
  for (int64_t k = 0; k < b.K; ++k) {
    double log_p = 0.0;
    for (int64_t l = 0; l < b.L; ++l) log_p += log_normal(z_at(z, b, k, l), full_mean_at(b, k, l));
    const double ti = log_p - marginal_oracle(b, z, k);
    const double cx = log_p - mixture_oracle(b, b.qy_lw, b.qy_mu, k, z, k);
    const double cy = log_p - mixture_oracle(b, b.qx_lw, b.qx_mu, k, z, k);
    o.ti += ti / b.K;
    o.cx += cx / b.K;
    o.cy += cy / b.K;
    o.loss -= (ti - beta * (cx + cy)) / b.K;
  }
  return o;
}

double infonce_oracle(const RawBatch& b, const LatentNoise& n, bool single) {
  // z_k ~ q(z | x_k): component by inverse CDF, then unit noise.
  std::vector<double> z(static_cast<size_t>(b.K * b.D * b.L));
  for (int64_t k = 0; k < b.K; ++k)
    for (int64_t l = 0; l < b.L; ++l) {
      const double u = n.uniform[0][k * b.L + l];
      double acc = 0.0;
      int64_t pick = b.C - 1;
      for (int64_t c = 0; c < b.C; ++c) {
        acc += std::exp(b.lw(b.qx_lw, k, c, l));
        if (u < acc) {
          pick = c;
          break;
        }
      }
      for (int64_t d = 0; d < b.D; ++d) {
        const size_t i = static_cast<size_t>((k * b.D + d) * b.L + l);
        z[i] = b.cm(b.qx_mu, k, pick, d, l) + n.eps[0][i];
      }
    }
  const auto& lw = single ? b.qx_lw : b.qy_lw;
  const auto& mus = single ? b.qx_mu : b.qy_mu;
  double mean = 0.0;
  for (int64_t k = 0; k < b.K; ++k) {
    std::vector<double> s;
    for (int64_t i = 0; i < b.K; ++i) s.push_back(mixture_oracle(b, lw, mus, i, z, k));
    mean += (s[k] - log_sum_exp_oracle(s) + std::log(static_cast<double>(b.K))) / b.K;
  }
  return mean;
}

Architecture small_arch() {
  Architecture a;
  a.cnn_depth = 2;
  a.cnn_width = 4;
  return a;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pim_objective_" + name);
  fs::remove_all(dir);
  return dir;
}

TrainingConfig tiny_config(uint64_t seed) {
  TrainingConfig c;
  c.batch_size = 4;
  c.steps = 12;
  c.beta_horizon = 8;
  c.checkpoint_every = 5;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("beta ramps linearly to one and stays there") {
  CHECK(beta_schedule(0) == 0.0);
  CHECK(beta_schedule(5000) == 0.5);
  CHECK(beta_schedule(10000) == 1.0);
  CHECK(beta_schedule(250000) == 1.0);
  CHECK(beta_schedule(3, 12) == 0.25);
  CHECK(beta_schedule(7, 0) == 1.0);
  CHECK_THROWS_AS(beta_schedule(-1), Error);
}

TEST_CASE("objective names round-trip") {
  for (auto k : {ObjectiveKind::ixyz, ObjectiveKind::infonce, ObjectiveKind::single_infonce}) {
    CHECK(parse_objective_kind(to_string(k)) == k);
  }
  CHECK_THROWS_AS(parse_objective_kind("mse"), Error);
}

TEST_CASE("aligned crop takes the centered window at each scale") {
  Tape tape;
  Features<float> f;
  const int64_t extents[] = {64, 64, 32, 16, 8};
  for (size_t s = 0; s < f.size(); ++s) {
    const int64_t E = extents[s];
    Tensor t(Shape{1, 1, E, E});
    for (int64_t y = 0; y < E; ++y)
      for (int64_t x = 0; x < E; ++x) t[static_cast<size_t>(y * E + x)] = static_cast<float>(y * 1000 + x);
    f[s] = tape.constant(t);
  }
  const Features<float> c = center_crop_aligned(f, 8);
  for (size_t s = 0; s < f.size(); ++s) {
    const int64_t off = (extents[s] - 8) / 2;
    REQUIRE(c[s].shape() == Shape{1, 1, 8, 8});
    CHECK(c[s].value().at({0, 0, 0, 0}) == static_cast<float>(off * 1000 + off));
    CHECK(c[s].value().at({0, 0, 7, 7}) == static_cast<float>((off + 7) * 1000 + off + 7));
  }
  const Features<float> again = center_crop_aligned(c, 8);
  for (size_t s = 0; s < f.size(); ++s) CHECK(again[s].value() == c[s].value());
  CHECK_THROWS(center_crop_aligned(f, 16));  // coarsest level is only 8 wide
}

TEST_CASE("inverse-CDF component choice") {
  TensorD lw(Shape{1, 3, 2});
  // location 0: weights .2 .3 .5, location 1: all mass on component 1
  const double w0[] = {0.2, 0.3, 0.5};
  for (int c = 0; c < 3; ++c) {
    lw.at({0, c, 0}) = std::log(w0[c]);
    lw.at({0, c, 1}) = c == 1 ? 0.0 : -1e30;
  }
  CHECK(choose_components(lw, {0.1, 0.0}) == std::vector<int32_t>{0, 1});
  CHECK(choose_components(lw, {0.45, 0.99}) == std::vector<int32_t>{1, 1});
  CHECK(choose_components(lw, {0.51, 0.5}) == std::vector<int32_t>{2, 1});
  CHECK(choose_components(lw, {0.999999, 0.5}) == std::vector<int32_t>{2, 1});
  CHECK_THROWS_AS(choose_components(lw, {0.5}), ShapeError);
}

TEST_CASE("density helpers match direct evaluation") {
  const RawBatch b = random_raw(11, 4);
  const LatentNoise n = noise_for(12, b.K, b.D, b.L);
  const auto z = sample_z(b, n);
  TapeD tape;
  const LatentBatch<double> lb = bind(tape, b);
  const std::vector<Var<double>> zv{tape.constant(to_tensor(z, {b.K, b.D, b.L}))};
  const auto marginal = minibatch_marginal_log_density(lb.full_means, zv);
  const auto mixture = mixture_log_density(lb.qx_log_w, lb.qx_means, zv);
  REQUIRE(marginal.shape() == Shape{4});
  for (int64_t k = 0; k < b.K; ++k) {
    CHECK(marginal.value()[k] == doctest::Approx(marginal_oracle(b, z, k)).epsilon(1e-12));
    CHECK(mixture.value()[k] ==
          doctest::Approx(mixture_oracle(b, b.qx_lw, b.qx_mu, k, z, k)).epsilon(1e-12));
  }
}

TEST_CASE("informativeness vanishes for one pair or identical pairs") {
  SUBCASE("K = 1") {
    const RawBatch b = random_raw(3, 1);
    TapeD tape;
    const auto r = ixyz_objective(bind(tape, b), noise_for(4, 1, b.D, b.L), 0.0);
    CHECK(r.report.term_i == 0.0);
  }
  SUBCASE("K identical pairs") {
    RawBatch b = random_raw(5, 6);
    for (int64_t k = 1; k < b.K; ++k) {
      for (int64_t i = 0; i < b.D * b.L; ++i) b.mu[k * b.D * b.L + i] = b.mu[i];
    }
    TapeD tape;
    const auto r = ixyz_objective(bind(tape, b), noise_for(6, b.K, b.D, b.L), 0.0);
    CHECK(std::abs(r.report.term_i) < 1e-12);
    CHECK(std::abs(r.report.loss) < 1e-12);
  }
}

TEST_CASE("IXYZ objective matches a direct evaluation") {
  for (double beta : {0.0, 0.3, 1.0}) {
    for (uint64_t seed : {21u, 22u, 23u}) {
      const RawBatch b = random_raw(seed, 3);
      const LatentNoise n = noise_for(seed + 100, b.K, b.D, b.L);
      TapeD tape;
      const auto r = ixyz_objective(bind(tape, b), n, beta);
      const IxyzOracle o = ixyz_oracle(b, n, beta);
      CHECK(r.report.loss == doctest::Approx(o.loss).epsilon(1e-12));
      CHECK(r.report.term_i == doctest::Approx(o.ti).epsilon(1e-12));
      CHECK(r.report.term_cx == doctest::Approx(o.cx).epsilon(1e-12));
      CHECK(r.report.term_cy == doctest::Approx(o.cy).epsilon(1e-12));
      CHECK(r.report.beta == beta);
    }
  }
}

TEST_CASE("IXYZ reductions and recombination") {
  const RawBatch b = random_raw(31, 5);
  const LatentNoise n = noise_for(32, b.K, b.D, b.L);
  TapeD t0, t1, th;
  const auto r0 = ixyz_objective(bind(t0, b), n, 0.0);
  const auto r1 = ixyz_objective(bind(t1, b), n, 1.0);
  const auto rh = ixyz_objective(bind(th, b), n, 0.5);
  CHECK(r0.report.loss == doctest::Approx(-r0.report.term_i).epsilon(1e-12));
  CHECK(r1.report.loss ==
        doctest::Approx(-(r1.report.term_i - r1.report.term_cx - r1.report.term_cy)).epsilon(1e-12));
  for (const auto* r : {&r0, &r1, &rh}) {
    const auto& p = r->report;
    CHECK(p.loss == doctest::Approx(-(p.term_i - p.beta * (p.term_cx + p.term_cy))).epsilon(1e-12));
  }
  TapeD tb;
  CHECK_THROWS_AS(ixyz_objective(bind(tb, b), n, 1.5), Error);
}

TEST_CASE("IXYZ loss is invariant to the order of pairs in the batch") {
  const RawBatch b = random_raw(41, 4);
  const LatentNoise n = noise_for(42, b.K, b.D, b.L);
  const std::vector<int64_t> perm{2, 0, 3, 1};
  RawBatch p = b;
  LatentNoise pn = n;
  const int64_t DL = b.D * b.L, CL = b.C * b.L, CDL = b.C * b.D * b.L;
  for (int64_t k = 0; k < b.K; ++k) {
    const int64_t s = perm[static_cast<size_t>(k)];
    for (int64_t i = 0; i < DL; ++i) {
      p.mu[k * DL + i] = b.mu[s * DL + i];
      pn.eps[0][static_cast<size_t>(k * DL + i)] = n.eps[0][static_cast<size_t>(s * DL + i)];
    }
    for (int64_t i = 0; i < CL; ++i) {
      p.qx_lw[k * CL + i] = b.qx_lw[s * CL + i];
      p.qy_lw[k * CL + i] = b.qy_lw[s * CL + i];
    }
    for (int64_t i = 0; i < CDL; ++i) {
      p.qx_mu[k * CDL + i] = b.qx_mu[s * CDL + i];
      p.qy_mu[k * CDL + i] = b.qy_mu[s * CDL + i];
    }
  }
  TapeD ta, tb;
  const double a = ixyz_objective(bind(ta, b), n, 0.7).report.loss;
  const double c = ixyz_objective(bind(tb, p), pn, 0.7).report.loss;
  CHECK(a == doctest::Approx(c).epsilon(1e-12));
}

TEST_CASE("InfoNCE matches a direct evaluation and respects its bound") {
  for (bool single : {false, true}) {
    const RawBatch b = random_raw(51, 3);
    const LatentNoise n = noise_for(52, b.K, b.D, b.L);
    TapeD tape;
    const auto r = infonce_objective(bind(tape, b), n, single);
    CHECK(r.report.term_i == doctest::Approx(infonce_oracle(b, n, single)).epsilon(1e-12));
    CHECK(r.report.loss == doctest::Approx(-r.report.term_i).epsilon(1e-12));
  }
  const int64_t K = 8;
  for (uint64_t trial = 0; trial < 100; ++trial) {
    const RawBatch b = random_raw(1000 + trial, K, 2, 3, 4);
    TapeD tape;
    const auto r = infonce_objective(bind(tape, b), noise_for(5000 + trial, K, 3, 4), false);
    CHECK(r.report.term_i <= std::log(static_cast<double>(K)) + 1e-12);
  }
}

TEST_CASE("InfoNCE is zero when every y encodes identically") {
  RawBatch b = random_raw(61, 5);
  const int64_t CL = b.C * b.L, CDL = b.C * b.D * b.L;
  for (int64_t k = 1; k < b.K; ++k) {
    for (int64_t i = 0; i < CL; ++i) b.qy_lw[k * CL + i] = b.qy_lw[i];
    for (int64_t i = 0; i < CDL; ++i) b.qy_mu[k * CDL + i] = b.qy_mu[i];
  }
  TapeD tape;
  const auto r = infonce_objective(bind(tape, b), noise_for(62, b.K, b.D, b.L), false);
  CHECK(std::abs(r.report.term_i) < 1e-12);
}

TEST_CASE("objective gradients agree with finite differences") {
  const RawBatch b = random_raw(71, 3);
  const LatentNoise n = noise_for(72, b.K, b.D, b.L);
  const std::vector<TensorD> inputs{
      to_tensor(b.mu, {b.K, b.D, b.L}), to_tensor(b.qx_lw, {b.K, b.C, b.L}),
      to_tensor(b.qx_mu, {b.K, b.C, b.D, b.L}), to_tensor(b.qy_lw, {b.K, b.C, b.L}),
      to_tensor(b.qy_mu, {b.K, b.C, b.D, b.L})};
  auto as_batch = [](const std::vector<Var<double>>& v) {
    LatentBatch<double> lb;
    lb.full_means = {v[0]};
    lb.qx_log_w = {log_softmax(v[1], 1)};
    lb.qx_means = {v[2]};
    lb.qy_log_w = {log_softmax(v[3], 1)};
    lb.qy_means = {v[4]};
    return lb;
  };
  const auto ixyz = pim::testing::gradcheck(
      [&](TapeD&, const std::vector<Var<double>>& v) {
        return ixyz_objective(as_batch(v), n, 0.6).loss;
      },
      inputs, 1e-5);
  CHECK(ixyz.max_rel_error < 1e-6);
  // Component choice is piecewise constant in the logits; keep the step small.
  const auto nce = pim::testing::gradcheck(
      [&](TapeD&, const std::vector<Var<double>>& v) {
        return infonce_objective(as_batch(v), n, false).loss;
      },
      inputs, 1e-6);
  CHECK(nce.max_rel_error < 1e-5);
}

TEST_CASE("full-pipeline gradient through the encoders") {
  const ModelParameters params = init_parameters(5, small_arch());
  const SyntheticPairSet pairs(9, 3);
  Tensor x(Shape{3, 3, 64, 64}), y(Shape{3, 3, 64, 64});
  for (size_t k = 0; k < 3; ++k) {
    const FramePair p = pairs.get(k);
    std::copy(p.x.data().begin(), p.x.data().end(), x.data().begin() + k * p.x.size());
    std::copy(p.y.data().begin(), p.y.data().end(), y.data().begin() + k * p.y.size());
  }
  Rng rng(3);
  const std::vector<int64_t> locations(kNumScales, 64);
  const LatentNoise noise = draw_latent_noise(rng, 3, params.architecture().latent_dim, locations);

  auto loss_at = [&](const ModelParameters& p, TensorD* grad, size_t which) {
    TapeD tape;
    BoundParameters<double> bound(tape, p, grad != nullptr);
    const auto batch = encode_batch(bound, x, y, 8, ObjectiveKind::ixyz);
    const auto r = ixyz_objective(batch, noise, 0.4);
    if (grad) {
      tape.backward(r.loss);
      *grad = tape.grad(bound.at(which));
    }
    return r.report.loss;
  };

  double worst = 0.0;
  for (const std::string name :
       {"frontend.s0.conv0.weight", "frontend.s3.conv1.bias", "marginal.s2.fc1.weight",
        "full.s1.fc0.weight", "full.s4.affine.bias", "full.s0.fc2.weight"}) {
    const size_t which = params.index(name);
    TensorD grad;
    loss_at(params, &grad, which);
    for (size_t i : {size_t{0}, params.at(name).size() / 2, params.at(name).size() - 1}) {
      ModelParameters up = params, down = params;
      up.at(name)[i] += 1e-7f;
      down.at(name)[i] -= 1e-7f;
      // A tiny step keeps the many ReLU kinks a shared bias moves out of the
      // difference; parameters are float, so use the step actually represented.
      const double h = static_cast<double>(up.at(name)[i]) - static_cast<double>(down.at(name)[i]);
      const double numeric = (loss_at(up, nullptr, 0) - loss_at(down, nullptr, 0)) / h;
      const double err = std::abs(numeric - grad[i]) / std::max({std::abs(numeric), std::abs(grad[i]), 1e-4});
      worst = std::max(worst, err);
    }
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("encode_batch produces the heads each objective needs") {
  Tape tape;
  const ModelParameters params = init_parameters(2, small_arch());
  BoundParameters<float> bound(tape, params, false);
  const SyntheticPairSet pairs(4, 2);
  Tensor x(Shape{2, 3, 64, 64}), y(Shape{2, 3, 64, 64});
  for (size_t k = 0; k < 2; ++k) {
    const FramePair p = pairs.get(k);
    std::copy(p.x.data().begin(), p.x.data().end(), x.data().begin() + k * p.x.size());
    std::copy(p.y.data().begin(), p.y.data().end(), y.data().begin() + k * p.y.size());
  }
  const auto ixyz = encode_batch(bound, x, y, 8, ObjectiveKind::ixyz);
  REQUIRE(ixyz.scales() == 5);
  CHECK(ixyz.batch() == 2);
  CHECK(ixyz.full_means[3].shape() == Shape{2, 10, 64});
  CHECK(ixyz.qx_log_w[0].shape() == Shape{2, 5, 64});
  CHECK(ixyz.qy_means[4].shape() == Shape{2, 5, 10, 64});
  const auto nce = encode_batch(bound, x, y, 8, ObjectiveKind::infonce);
  CHECK(nce.full_means.empty());
  CHECK(nce.qy_means.size() == 5);
  const auto single = encode_batch(bound, x, y, 8, ObjectiveKind::single_infonce);
  CHECK(single.qy_means.empty());
  CHECK(single.qx_means.size() == 5);
  const Tensor small(Shape{2, 3, 32, 32});
  CHECK_THROWS_AS(encode_batch(bound, x, small, 8, ObjectiveKind::ixyz), ShapeError);
}

TEST_CASE("training logs every step and checkpoints on schedule") {
  const fs::path dir = fresh_dir("train");
  const SyntheticPairSet pairs(1, 10);
  const TrainingConfig cfg = tiny_config(77);
  const auto result = train(cfg, pairs, init_parameters(1, small_arch()), dir);

  REQUIRE(result.log.size() == 12);
  for (size_t i = 0; i < result.log.size(); ++i) {
    CHECK(result.log[i].step == static_cast<int64_t>(i));
    CHECK(result.log[i].report.beta == beta_schedule(static_cast<int64_t>(i), 8));
    CHECK(std::isfinite(result.log[i].report.loss));
  }
  std::ifstream log(dir / "loss.log");
  std::string line;
  std::getline(log, line);
  CHECK(line == "# objective ixyz");
  int lines = 0;
  while (std::getline(log, line)) {
    CHECK(line == format_log_line(result.log[static_cast<size_t>(lines)]));
    ++lines;
  }
  CHECK(lines == 12);

  REQUIRE(result.checkpoints.size() == 3);
  CHECK(result.checkpoints[0].filename() == "ckpt_5.pimk");
  CHECK(result.checkpoints[2].filename() == "ckpt_12.pimk");
  const Checkpoint last = load_checkpoint(dir / "ckpt_12.pimk");
  CHECK(last.step == 12);
  CHECK(last.params == result.params);
  fs::remove_all(dir);
}

TEST_CASE("training is deterministic and lr = 0 leaves parameters untouched") {
  const SyntheticPairSet pairs(2, 10);
  const ModelParameters init = init_parameters(3, small_arch());
  TrainingConfig cfg = tiny_config(5);
  cfg.steps = 4;
  cfg.beta_horizon = 4;
  const auto a = train(cfg, pairs, init);
  const auto b = train(cfg, pairs, init);
  CHECK(a.params == b.params);
  CHECK_FALSE(a.params == init);
  for (size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].report.loss == b.log[i].report.loss);

  cfg.lr = LrSchedule{0.0, {}};
  const auto frozen = train(cfg, pairs, init);
  CHECK(frozen.params == init);
}

TEST_CASE("InfoNCE training runs and the callback can stop early") {
  const SyntheticPairSet pairs(3, 10);
  TrainingConfig cfg = tiny_config(8);
  cfg.objective = ObjectiveKind::single_infonce;
  int seen = 0;
  const auto r = train(cfg, pairs, init_parameters(4, small_arch()), {},
                       [&](const StepRecord& rec) {
                         ++seen;
                         CHECK(rec.report.beta == 0.0);
                         return rec.step < 2;
                       });
  CHECK(seen == 3);
  CHECK(r.log.size() == 3);
}

TEST_CASE("training rejects bad configurations") {
  const SyntheticPairSet pairs(1, 4);
  TrainingConfig cfg = tiny_config(1);
  cfg.batch_size = 1;
  CHECK_THROWS_AS(train(cfg, pairs, init_parameters(1, small_arch())), Error);
  cfg = tiny_config(1);
  cfg.steps = 0;
  CHECK_THROWS_AS(train(cfg, pairs, init_parameters(1, small_arch())), Error);
  cfg = tiny_config(1);
  cfg.beta_horizon = cfg.steps + 1;
  CHECK_THROWS_AS(train(cfg, pairs, init_parameters(1, small_arch())), Error);
  CHECK(ablation_training_config().steps == 60000);
}
