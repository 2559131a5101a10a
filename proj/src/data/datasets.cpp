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

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "pim/data.hpp"

namespace pim {
namespace {

namespace fs = std::filesystem;

Tensor crop_chw(const Tensor& img, int64_t y0, int64_t x0, int64_t size) {
  const int64_t C = img.dim(0), H = img.dim(1), W = img.dim(2);
  Tensor out(Shape{C, size, size});
  for (int64_t c = 0; c < C; ++c)
    for (int64_t y = 0; y < size; ++y)
      for (int64_t x = 0; x < size; ++x)
        out[static_cast<size_t>((c * size + y) * size + x)] =
            img[static_cast<size_t>((c * H + y0 + y) * W + x0 + x)];
  return out;
}

bool is_frame_file(const fs::path& p) {
  const std::string name = p.filename().string();
  return p.extension() == ".ppm" && name.rfind("frame_", 0) == 0;
}

// ---- Procedural scenes.

struct Shape2D {
  bool disc = true;
  double cy = 0, cx = 0, ry = 0, rx = 0;
  float color[3] = {0, 0, 0};
};

struct Scene {
  int64_t canvas = 0;
  int64_t margin = 0;
  std::vector<float> background;  // [3, canvas, canvas]
  std::vector<Shape2D> shapes;
};

// Bilinear upsampling of a coarse n x n field to canvas x canvas.
std::vector<double> upsample_field(const std::vector<double>& coarse, int64_t n, int64_t canvas) {
  std::vector<double> out(static_cast<size_t>(canvas * canvas));
  const double scale = static_cast<double>(n - 1) / static_cast<double>(canvas - 1);
  for (int64_t y = 0; y < canvas; ++y)
    for (int64_t x = 0; x < canvas; ++x) {
      const double fy = y * scale, fx = x * scale;
      const int64_t y0 = std::min<int64_t>(static_cast<int64_t>(fy), n - 2);
      const int64_t x0 = std::min<int64_t>(static_cast<int64_t>(fx), n - 2);
      const double ay = fy - y0, ax = fx - x0;
      auto at = [&](int64_t yy, int64_t xx) { return coarse[static_cast<size_t>(yy * n + xx)]; };
      out[static_cast<size_t>(y * canvas + x)] =
          (1 - ay) * ((1 - ax) * at(y0, x0) + ax * at(y0, x0 + 1)) +
          ay * ((1 - ax) * at(y0 + 1, x0) + ax * at(y0 + 1, x0 + 1));
    }
  return out;
}

// Sum of bilinearly upsampled white-noise octaves with amplitude growing with
// scale, normalized to zero mean and unit deviation: a rough 1/f texture.
std::vector<double> octave_noise(Rng& rng, int64_t canvas) {
  std::normal_distribution<double> normal;
  std::vector<double> field(static_cast<size_t>(canvas * canvas), 0.0);
  double amplitude = 1.0;
  for (int64_t n = canvas; n >= 3; n /= 2) {
    std::vector<double> coarse(static_cast<size_t>(n * n));
    for (double& v : coarse) v = normal(rng);
    const auto up = n == canvas ? coarse : upsample_field(coarse, n, canvas);
    for (size_t i = 0; i < field.size(); ++i) field[i] += amplitude * up[i];
    amplitude *= 1.6;
  }
  double mean = 0.0, sq = 0.0;
  for (double v : field) mean += v;
  mean /= static_cast<double>(field.size());
  for (double v : field) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / static_cast<double>(field.size()));
  for (double& v : field) v = (v - mean) / sd;
  return field;
}

Scene make_scene(Rng& rng, const SynthConfig& config) {
  Scene scene;
  scene.margin = config.max_shift + config.moving_shape_step + 4;
  scene.canvas = config.patch + 2 * scene.margin;
  const int64_t n = scene.canvas;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const auto f0 = octave_noise(rng, n);
  const auto f1 = octave_noise(rng, n);
  double mix[3][2], base[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = 0.25 + 0.5 * unit(rng);
    mix[c][0] = 0.15 * (2 * unit(rng) - 1);
    mix[c][1] = 0.15 * (2 * unit(rng) - 1);
  }
  scene.background.resize(static_cast<size_t>(3 * n * n));
  for (int c = 0; c < 3; ++c)
    for (int64_t i = 0; i < n * n; ++i)
      scene.background[static_cast<size_t>(c * n * n + i)] = static_cast<float>(
          base[c] + mix[c][0] * f0[static_cast<size_t>(i)] + mix[c][1] * f1[static_cast<size_t>(i)]);

  for (int s = 0; s < config.shapes; ++s) {
    Shape2D shape;
    shape.disc = unit(rng) < 0.5;
    shape.cy = unit(rng) * static_cast<double>(n);
    shape.cx = unit(rng) * static_cast<double>(n);
    shape.ry = 3.0 + 9.0 * unit(rng);
    shape.rx = shape.disc ? shape.ry : 3.0 + 9.0 * unit(rng);
    for (float& c : shape.color) c = static_cast<float>(unit(rng));
    scene.shapes.push_back(shape);
  }
  return scene;
}

// Renders the patch whose top-left canvas coordinate is (margin + oy, margin + ox),
// with shape `moved` displaced by (my, mx).
Tensor render(const Scene& scene, int64_t patch, int oy, int ox, int moved, int my, int mx) {
  const int64_t n = scene.canvas;
  Tensor img(Shape{3, patch, patch});
  for (int64_t y = 0; y < patch; ++y)
    for (int64_t x = 0; x < patch; ++x) {
      const int64_t sy = y + scene.margin + oy, sx = x + scene.margin + ox;
      float px[3];
      for (int c = 0; c < 3; ++c) px[c] = scene.background[static_cast<size_t>((c * n + sy) * n + sx)];
      for (size_t k = 0; k < scene.shapes.size(); ++k) {
        const Shape2D& s = scene.shapes[k];
        const bool is_moved = static_cast<int>(k) == moved;
        const double dy = (static_cast<double>(sy) + 0.5) - (s.cy + (is_moved ? my : 0));
        const double dx = (static_cast<double>(sx) + 0.5) - (s.cx + (is_moved ? mx : 0));
        const bool inside = s.disc ? (dy * dy) / (s.ry * s.ry) + (dx * dx) / (s.rx * s.rx) <= 1.0
                                   : std::abs(dy) <= s.ry && std::abs(dx) <= s.rx;
        if (inside)
          for (int c = 0; c < 3; ++c) px[c] = s.color[c];
      }
      for (int c = 0; c < 3; ++c) img[static_cast<size_t>((c * patch + y) * patch + x)] = px[c];
    }
  return img;
}

void finish_frame(Tensor& img, double gain, double sigma, Rng& rng) {
  std::normal_distribution<double> noise(0.0, sigma > 0 ? sigma : 1.0);
  for (float& v : img.data()) {
    double out = v * gain;
    if (sigma > 0) out += noise(rng);
    v = static_cast<float>(std::clamp(out, 0.0, 1.0));
  }
}

}  // namespace

InMemoryPairSet::InMemoryPairSet(std::vector<FramePair> pairs) : pairs_(std::move(pairs)) {
  if (pairs_.empty()) throw Error("pair set is empty");
  const Shape shape = pairs_.front().x.shape();
  for (const auto& p : pairs_) {
    if (p.x.shape() != shape || p.y.shape() != shape) {
      throw ShapeError("pair set mixes extents " + shape_to_string(shape) + " and " +
                       shape_to_string(p.x.shape()));
    }
  }
}

int64_t InMemoryPairSet::patch_size() const { return pairs_.front().x.dim(1); }

std::vector<FramePair> build_frame_pairs(const fs::path& root, uint64_t seed,
                                         const FramePairConfig& config,
                                         std::vector<std::string>* warnings) {
  if (config.min_height < config.patch || config.max_height < config.min_height) {
    throw Error("frame pairs: need patch <= min_height <= max_height");
  }
  if (!fs::is_directory(root)) throw Error("frames directory '" + root.string() + "' not found");
  auto warn = [&](const std::string& msg) {
    if (warnings) warnings->push_back(msg);
  };
  std::vector<fs::path> segments;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) segments.push_back(entry.path());
  }
  std::sort(segments.begin(), segments.end());

  std::vector<FramePair> pairs;
  for (size_t si = 0; si < segments.size(); ++si) {
    std::vector<fs::path> frames;
    for (const auto& entry : fs::directory_iterator(segments[si])) {
      if (entry.is_regular_file() && is_frame_file(entry.path())) frames.push_back(entry.path());
    }
    std::sort(frames.begin(), frames.end());
    Rng rng(derive_seed(seed, si));
    std::uniform_int_distribution<int64_t> height_dist(config.min_height, config.max_height);
    const int64_t target_h = height_dist(rng);

    std::vector<Tensor> resized;
    for (const auto& f : frames) {
      try {
        const Tensor img = read_ppm(f);
        const int64_t target_w = std::max<int64_t>(
            1, std::llround(static_cast<double>(img.dim(2)) * static_cast<double>(target_h) /
                            static_cast<double>(img.dim(1))));
        resized.push_back(box_resample(img, target_h, target_w));
      } catch (const Error& e) {
        warn(std::string("skipping frame: ") + e.what());
      }
    }
    if (resized.size() < 2) {
      warn("skipping segment '" + segments[si].string() + "': fewer than 2 readable frames");
      continue;
    }
    for (size_t i = 0; i + 1 < resized.size(); i += 2) {
      const Tensor& a = resized[i];
      const Tensor& b = resized[i + 1];
      if (a.shape() != b.shape() || a.dim(2) < config.patch) {
        warn("skipping pair " + std::to_string(i / 2) + " of '" + segments[si].string() +
             "': frames too small or mismatched");
        continue;
      }
      std::uniform_int_distribution<int64_t> oy(0, a.dim(1) - config.patch);
      std::uniform_int_distribution<int64_t> ox(0, a.dim(2) - config.patch);
      const int64_t y0 = oy(rng), x0 = ox(rng);
      pairs.push_back({crop_chw(a, y0, x0, config.patch), crop_chw(b, y0, x0, config.patch)});
    }
  }
  return running_shuffle(std::move(pairs), config.shuffle_buffer, derive_seed(seed, ~0ULL));
}

FramePair synth_pair(uint64_t seed, uint64_t index, const SynthConfig& config) {
  Rng rng(derive_seed(seed, index));
  const Scene scene = make_scene(rng, config);
  std::uniform_int_distribution<int> shift(-config.max_shift, config.max_shift);
  std::uniform_int_distribution<int> step(-config.moving_shape_step, config.moving_shape_step);
  std::uniform_int_distribution<int> which(0, std::max(0, config.shapes - 1));
  std::uniform_real_distribution<double> jitter(-config.brightness_jitter,
                                                config.brightness_jitter);
  const int dy = shift(rng), dx = shift(rng);
  const int moved = config.shapes > 0 ? which(rng) : -1;
  const int my = step(rng), mx = step(rng);
  const double gain = 1.0 + jitter(rng);

  FramePair pair;
  pair.x = render(scene, config.patch, 0, 0, -1, 0, 0);
  pair.y = render(scene, config.patch, dy, dx, moved, my, mx);
  finish_frame(pair.x, 1.0, config.noise_sigma, rng);
  finish_frame(pair.y, gain, config.noise_sigma, rng);
  return pair;
}

Tensor synth_scene(uint64_t seed, uint64_t index, const SynthConfig& config) {
  Rng rng(derive_seed(seed, index));
  const Scene scene = make_scene(rng, config);
  Tensor img = render(scene, config.patch, 0, 0, -1, 0, 0);
  finish_frame(img, 1.0, 0.0, rng);
  return img;
}

std::vector<FramePair> synth_pairs(uint64_t seed, size_t n, const SynthConfig& config) {
  std::vector<FramePair> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) out.push_back(synth_pair(seed, i, config));
  return out;
}

FramePair SyntheticPairSet::get(size_t index) const {
  if (index >= n_) throw Error("synthetic pair index out of range");
  return synth_pair(seed_, index, config_);
}

}  // namespace pim
