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

// Serial reference vs OpenMP convolution kernels, plus one encoder pass.

#include <CLI11.hpp>
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <vector>

#include "pim/encoders.hpp"
#include "pim/numerics/kernels.hpp"
#include "pim/numerics/random.hpp"

namespace {

using pim::kernels::Conv2dGeometry;

// Median wall time of `reps` calls, in milliseconds.
double time_ms(int reps, const std::function<void()>& fn) {
  std::vector<double> t;
  fn();  // warm-up
  for (int r = 0; r < reps; ++r) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    t.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
  }
  std::nth_element(t.begin(), t.begin() + reps / 2, t.end());
  return t[static_cast<size_t>(reps / 2)];
}

std::vector<float> random_vec(size_t n, uint64_t seed) {
  pim::Rng rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (float& x : v) x = u(rng);
  return v;
}

float max_diff(const std::vector<float>& a, const std::vector<float>& b) {
  float m = 0.0f;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PIM kernel benchmark"};
  int reps = 5, batch = 16, channels = 16, extent = 64;
  app.add_option("--reps", reps, "Timed repetitions (median reported)")->check(CLI::PositiveNumber);
  app.add_option("--batch", batch, "Batch size")->check(CLI::PositiveNumber);
  app.add_option("--channels", channels, "Input and output channels")->check(CLI::PositiveNumber);
  app.add_option("--extent", extent, "Image height and width")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  Conv2dGeometry g;
  g.batch = batch;
  g.in_channels = g.out_channels = channels;
  g.in_h = g.in_w = g.out_h = g.out_w = extent;
  g.kernel_h = g.kernel_w = 5;
  g.pad_top = g.pad_left = 2;

  const auto in = random_vec(static_cast<size_t>(g.batch * g.in_channels * g.in_h * g.in_w), 1);
  const auto k = random_vec(static_cast<size_t>(g.out_channels * g.patch_size()), 2);
  const auto b = random_vec(static_cast<size_t>(g.out_channels), 3);
  const auto go = random_vec(static_cast<size_t>(g.batch * g.out_channels * g.out_pixels()), 4);
  std::vector<float> out_ref(go.size()), out_par(go.size());
  std::vector<float> gi_ref(in.size()), gi_par(in.size()), gk_ref(k.size()), gk_par(k.size());
  std::vector<float> gb_ref(b.size()), gb_par(b.size());
  using S = std::span<const float>;

  std::printf("threads %d, conv %dx%d 5x5, %d->%d channels, batch %d, median of %d\n",
              omp_get_max_threads(), extent, extent, channels, channels, batch, reps);
  std::printf("%-18s %12s %12s %9s %12s\n", "kernel", "serial ms", "openmp ms", "speedup", "max |diff|");

  const auto row = [&](const char* name, const std::function<void()>& ref, const std::function<void()>& par,
                       const std::vector<float>& a, const std::vector<float>& c) {
    const double ts = time_ms(reps, ref), tp = time_ms(reps, par);
    std::printf("%-18s %12.2f %12.2f %8.2fx %12.3g\n", name, ts, tp, ts / tp, max_diff(a, c));
  };
  row("forward",
      [&] { pim::kernels::conv2d_forward_reference<float>(g, S(in), S(k), S(b), out_ref); },
      [&] { pim::kernels::conv2d_forward<float>(g, S(in), S(k), S(b), out_par); }, out_ref, out_par);
  // Gradient kernels accumulate; a single call after zeroing is compared.
  row("backward_input",
      [&] { std::fill(gi_ref.begin(), gi_ref.end(), 0.0f);
            pim::kernels::conv2d_backward_input_reference<float>(g, S(k), S(go), gi_ref); },
      [&] { std::fill(gi_par.begin(), gi_par.end(), 0.0f);
            pim::kernels::conv2d_backward_input<float>(g, S(k), S(go), gi_par); }, gi_ref, gi_par);
  row("backward_kernel",
      [&] { std::fill(gk_ref.begin(), gk_ref.end(), 0.0f);
            std::fill(gb_ref.begin(), gb_ref.end(), 0.0f);
            pim::kernels::conv2d_backward_kernel_reference<float>(g, S(in), S(go), gk_ref, gb_ref); },
      [&] { std::fill(gk_par.begin(), gk_par.end(), 0.0f);
            std::fill(gb_par.begin(), gb_par.end(), 0.0f);
            pim::kernels::conv2d_backward_kernel<float>(g, S(in), S(go), gk_par, gb_par); }, gk_ref, gk_par);

  pim::Architecture arch;
  arch.cnn_width = channels;
  const pim::ModelParameters params = pim::init_parameters(5, arch);
  pim::Rng rng(6);
  const pim::Tensor images = pim::uniform_tensor<float>(pim::Shape{batch, 3, extent, extent}, rng, 0.0, 1.0);
  const double te = time_ms(reps, [&] { (void)pim::encode_images(params, images); });
  std::printf("encode_images (width %d): %.2f ms per batch\n", channels, te);
  return 0;
}
