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

#include "pim/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>

#include "pim/numerics/random.hpp"
#include "pim/pyramid.hpp"

namespace pim {
namespace {

namespace fs = std::filesystem;

constexpr uint64_t kShiftStream = 0x5348494654000000ULL;
constexpr uint64_t kSceneStream = 0x5343454e45000000ULL;

// Runs `job(i)` for i in [0, n) in parallel; rethrows the lowest-index error.
template <typename Job>
void parallel_records(size_t n, Job job) {
  std::vector<std::optional<std::string>> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (int64_t i = 0; i < static_cast<int64_t>(n); ++i) {
    try {
      job(static_cast<size_t>(i));
    } catch (const std::exception& e) {
      errors[static_cast<size_t>(i)] = e.what();
    }
  }
  for (size_t i = 0; i < n; ++i) {
    if (errors[i]) throw Error("record " + std::to_string(i) + ": " + *errors[i]);
  }
}

std::string record_label(const EvalRecord& r, size_t i) {
  return r.line > 0 ? "line " + std::to_string(r.line) : "record " + std::to_string(i);
}

void require_kind(const std::vector<EvalRecord>& records, RecordKind kind, const char* what) {
  if (records.empty()) throw Error(std::string(what) + ": no records");
  for (size_t i = 0; i < records.size(); ++i) {
    if (records[i].kind != kind) {
      throw Error(std::string(what) + ": " + record_label(records[i], i) + " is a " +
                  to_string(records[i].kind) + " record, expected " + to_string(kind));
    }
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

Tensor blur_plane_stack(const Tensor& image) {
  const Shape s = image.shape();
  return filters::blur(image.reshaped(Shape{1, s[0], s[1], s[2]})).reshaped(s);
}

}  // namespace

double baseline_rmse(const Tensor& x, const Tensor& y) {
  if (x.shape() != y.shape()) {
    throw ShapeError("rmse: extents differ: " + shape_to_string(x.shape()) + " vs " +
                     shape_to_string(y.shape()));
  }
  if (x.size() == 0) throw Error("rmse of empty images");
  double acc = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(x.size()));
}

MetricFn rmse_metric() {
  return {"RMSE", [](const Tensor& a, const Tensor& b, uint64_t) { return baseline_rmse(a, b); }};
}

MetricFn pim_metric(const PimModel& model) {
  return {model.components() == 1 ? "PIM-1" : "PIM",
          [&model](const Tensor& a, const Tensor& b, uint64_t seed) {
            return distance(a, b, model, seed);
          }};
}

uint64_t record_seed(uint64_t seed, size_t index) { return derive_seed(seed, index); }

double score_2afc(const std::vector<double>& h, const std::vector<double>& d0,
                  const std::vector<double>& d1) {
  if (h.empty()) throw Error("2AFC: no triplets");
  if (h.size() != d0.size() || h.size() != d1.size()) throw Error("2AFC: length mismatch");
  double credit = 0.0;
  for (size_t i = 0; i < h.size(); ++i) {
    if (d1[i] < d0[i]) {
      credit += h[i];
    } else if (d0[i] < d1[i]) {
      credit += 1.0 - h[i];
    } else {
      credit += 0.5;
    }
  }
  return 100.0 * credit / static_cast<double>(h.size());
}

double score_2afc(const std::vector<EvalRecord>& triplets, const MetricFn& metric, uint64_t seed) {
  require_kind(triplets, RecordKind::triplet, "2AFC");
  std::vector<double> h(triplets.size()), d0(triplets.size()), d1(triplets.size());
  parallel_records(triplets.size(), [&](size_t i) {
    const EvalRecord& r = triplets[i];
    const uint64_t s = record_seed(seed, i);
    h[i] = r.h;
    d0[i] = metric.fn(r.ref, r.img0, s);
    d1[i] = metric.fn(r.ref, r.img1, s);
  });
  return score_2afc(h, d0, d1);
}

double average_precision(const std::vector<double>& distances, const std::vector<bool>& same) {
  if (distances.size() != same.size()) throw Error("average precision: length mismatch");
  std::vector<size_t> order(distances.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return distances[a] < distances[b]; });
  double sum = 0.0;
  size_t hits = 0;
  for (size_t rank = 0; rank < order.size(); ++rank) {
    if (same[order[rank]]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  if (hits == 0) throw Error("average precision: no positive (same = 1) pairs");
  return sum / static_cast<double>(hits);
}

double score_jnd_map(const std::vector<EvalRecord>& pairs, const MetricFn& metric, uint64_t seed) {
  require_kind(pairs, RecordKind::pair, "JND");
  std::vector<double> d(pairs.size());
  std::vector<bool> same(pairs.size());
  for (size_t i = 0; i < pairs.size(); ++i) same[i] = pairs[i].same;
  parallel_records(pairs.size(), [&](size_t i) {
    d[i] = metric.fn(pairs[i].img0, pairs[i].img1, record_seed(seed, i));
  });
  return average_precision(d, same);
}

double score_jnd_map(const std::vector<std::vector<EvalRecord>>& manifests, const MetricFn& metric,
                     uint64_t seed) {
  if (manifests.empty()) throw Error("JND: no manifests");
  double sum = 0.0;
  for (size_t m = 0; m < manifests.size(); ++m) {
    sum += score_jnd_map(manifests[m], metric, derive_seed(seed, m));
  }
  return sum / static_cast<double>(manifests.size());
}

std::string to_string(ShiftDirection d) {
  switch (d) {
    case ShiftDirection::left: return "left";
    case ShiftDirection::right: return "right";
    case ShiftDirection::up: return "up";
    case ShiftDirection::down: return "down";
  }
  return "unknown";
}

Tensor shift_image(const Tensor& image, int64_t pixels, ShiftDirection direction) {
  if (image.rank() != 3) throw ShapeError("shift_image expects [C, H, W]");
  const int64_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  const bool horizontal = direction == ShiftDirection::left || direction == ShiftDirection::right;
  const int64_t extent = horizontal ? W : H;
  if (pixels < 0 || pixels >= extent) {
    throw Error("shift of " + std::to_string(pixels) + " px needs an extent above it, got " +
                std::to_string(extent));
  }
  if (pixels == 0) return image;
  Tensor out(image.shape());
  for (int64_t c = 0; c < C; ++c)
    for (int64_t y = 0; y < H; ++y)
      for (int64_t x = 0; x < W; ++x) {
        int64_t sy = y, sx = x;
        switch (direction) {
          case ShiftDirection::left: sx = std::min(x + pixels, W - 1); break;
          case ShiftDirection::right: sx = std::max(x - pixels, int64_t{0}); break;
          case ShiftDirection::up: sy = std::min(y + pixels, H - 1); break;
          case ShiftDirection::down: sy = std::max(y - pixels, int64_t{0}); break;
        }
        out[static_cast<size_t>((c * H + y) * W + x)] = image[static_cast<size_t>((c * H + sy) * W + sx)];
      }
  return out;
}

ShiftDirection shift_direction(uint64_t seed, size_t record_index) {
  Rng rng(derive_seed(seed ^ kShiftStream, record_index));
  return static_cast<ShiftDirection>(std::uniform_int_distribution<int>(0, 3)(rng));
}

ShiftReport pixel_shift_experiment(const std::vector<EvalRecord>& records, const MetricFn& metric,
                                   const std::vector<int64_t>& shifts, uint64_t seed) {
  if (records.empty()) throw Error("shift experiment: no records");
  const RecordKind kind = records.front().kind;
  require_kind(records, kind, "shift experiment");
  auto score = [&](const std::vector<EvalRecord>& r) {
    return kind == RecordKind::triplet ? score_2afc(r, metric, seed) : score_jnd_map(r, metric, seed);
  };

  ShiftReport report;
  report.baseline = score(records);
  for (int64_t s : shifts) {
    std::vector<EvalRecord> moved = records;
    for (size_t i = 0; i < moved.size(); ++i) {
      Tensor& target = kind == RecordKind::triplet ? moved[i].ref : moved[i].img0;
      target = shift_image(target, s, shift_direction(seed, i));
    }
    const double v = s == 0 ? report.baseline : score(moved);
    report.results.push_back({s, v, v - report.baseline});
  }
  return report;
}

std::vector<double> default_sigma_grid() {
  std::vector<double> grid(40);
  for (size_t i = 0; i < grid.size(); ++i) grid[i] = 0.01 + (0.60 - 0.01) * static_cast<double>(i) / 39.0;
  return grid;
}

Tensor add_gaussian_noise(const Tensor& image, double sigma, Rng& rng) {
  if (sigma < 0.0) throw Error("noise sigma must be nonnegative");
  std::normal_distribution<double> normal(0.0, sigma);
  Tensor out = image;
  for (float& v : out.data()) v = static_cast<float>(std::clamp(v + normal(rng), 0.0, 1.0));
  return out;
}

Tensor zoom_corruption(const Tensor& image, int k) {
  if (k < 1 || k > 5) throw Error("zoom severity must be in 1..5, got " + std::to_string(k));
  if (image.rank() != 3) throw ShapeError("zoom_corruption expects [C, H, W]");
  const int64_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  const double keep = 1.0 - 0.05 * k;
  const int64_t ch = std::lround(keep * static_cast<double>(H));
  const int64_t cw = std::lround(keep * static_cast<double>(W));
  const int64_t top = (H - ch) / 2, left = (W - cw) / 2;
  Tensor crop(Shape{C, ch, cw});
  for (int64_t c = 0; c < C; ++c)
    for (int64_t y = 0; y < ch; ++y)
      for (int64_t x = 0; x < cw; ++x)
        crop[static_cast<size_t>((c * ch + y) * cw + x)] =
            image[static_cast<size_t>((c * H + top + y) * W + left + x)];
  return box_resample(crop, H, W);
}

size_t nearest_index(const std::vector<double>& values, double target) {
  if (values.empty()) throw Error("nearest_index: empty grid");
  size_t best = 0;
  for (size_t i = 1; i < values.size(); ++i) {
    if (std::abs(values[i] - target) < std::abs(values[best] - target)) best = i;
  }
  return best;
}

EquivalentNoise equivalent_noise(const std::vector<Tensor>& refs,
                                 const std::vector<Tensor>& corrupted, const MetricFn& metric,
                                 const std::vector<double>& grid, uint64_t seed) {
  if (refs.empty()) throw Error("equivalent noise: no images");
  if (refs.size() != corrupted.size()) throw Error("equivalent noise: reference/corrupted count mismatch");
  if (grid.empty()) throw Error("equivalent noise: empty sigma grid");
  const size_t n = refs.size();

  std::vector<double> dc(n);
  parallel_records(n, [&](size_t i) { dc[i] = metric.fn(refs[i], corrupted[i], record_seed(seed, i)); });

  std::vector<double> dg(grid.size() * n);
  parallel_records(dg.size(), [&](size_t k) {
    const size_t j = k / n, i = k % n;
    Rng rng(derive_seed(derive_seed(seed, j), i));
    dg[k] = metric.fn(refs[i], add_gaussian_noise(refs[i], grid[j], rng), record_seed(seed, i));
  });

  EquivalentNoise out;
  out.grid = grid;
  out.corruption_mean = std::accumulate(dc.begin(), dc.end(), 0.0) / static_cast<double>(n);
  for (size_t j = 0; j < grid.size(); ++j) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += dg[j * n + i];
    out.grid_means.push_back(s / static_cast<double>(n));
  }
  out.sigma = grid[nearest_index(out.grid_means, out.corruption_mean)];
  return out;
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<size_t> order(v.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman_rho(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw Error("spearman: lengths differ (" + std::to_string(a.size()) + " vs " +
                std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw Error("spearman: empty score lists");
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw Error("spearman: a score list is constant");
  return sab / std::sqrt(saa * sbb);
}

Tensor distort(const Tensor& image, DistortionKind kind, double severity, Rng& rng) {
  if (!(severity >= 0.0 && severity <= 1.0)) throw Error("distortion severity outside [0, 1]");
  switch (kind) {
    case DistortionKind::noise:
      return add_gaussian_noise(image, 0.01 + 0.25 * severity, rng);
    case DistortionKind::blur: {
      // Fractional number of binomial passes, interpolated between integers.
      const double passes = 6.0 * severity;
      const int whole = static_cast<int>(std::floor(passes));
      const double frac = passes - whole;
      Tensor a = image;
      for (int i = 0; i < whole; ++i) a = blur_plane_stack(a);
      if (frac == 0.0) return a;
      const Tensor b = blur_plane_stack(a);
      for (size_t i = 0; i < a.size(); ++i) {
        a[i] = static_cast<float>((1.0 - frac) * a[i] + frac * b[i]);
      }
      return a;
    }
    case DistortionKind::contrast: {
      const double gain = 1.0 - 0.7 * severity;
      const double offset = (std::uniform_int_distribution<int>(0, 1)(rng) ? 1.0 : -1.0) * 0.15 * severity;
      double mean = 0.0;
      for (float v : image.data()) mean += v;
      mean /= static_cast<double>(image.size());
      Tensor out = image;
      for (float& v : out.data()) v = static_cast<float>(std::clamp(mean + gain * (v - mean) + offset, 0.0, 1.0));
      return out;
    }
  }
  throw Error("unknown distortion");
}

std::vector<EvalRecord> synth_triplets(uint64_t seed, size_t count, const SynthEvalConfig& cfg) {
  std::vector<EvalRecord> out(count);
  for (size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, i));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> kind(0, 2);
    EvalRecord& r = out[i];
    r.kind = RecordKind::triplet;
    r.ref = synth_scene(derive_seed(seed, kSceneStream), i, cfg.scene);
    const double s0 = unit(rng), s1 = unit(rng);
    r.img0 = distort(r.ref, static_cast<DistortionKind>(kind(rng)), s0, rng);
    r.img1 = distort(r.ref, static_cast<DistortionKind>(kind(rng)), s1, rng);
    r.h = logistic(cfg.label_sharpness * (s0 - s1));
  }
  return out;
}

std::vector<EvalRecord> synth_jnd_pairs(uint64_t seed, size_t count, const SynthEvalConfig& cfg) {
  std::vector<EvalRecord> out(count);
  for (size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, i));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> kind(0, 2);
    EvalRecord& r = out[i];
    r.kind = RecordKind::pair;
    r.img0 = synth_scene(derive_seed(seed, kSceneStream), i, cfg.scene);
    const double s = unit(rng);
    r.img1 = distort(r.img0, static_cast<DistortionKind>(kind(rng)), s, rng);
    r.same = s < cfg.same_threshold;
  }
  return out;
}

void write_report(const fs::path& dir, const ExperimentReport& report) {
  if (report.experiment.empty()) throw Error("report needs an experiment name");
  fs::create_directories(dir);
  const fs::path txt = dir / (report.experiment + ".txt");
  std::ofstream kv(txt, std::ios::trunc);
  if (!kv) throw Error("cannot open '" + txt.string() + "' for writing");
  kv << "experiment=" << report.experiment << "\n"
     << "metric=" << report.metric << "\n"
     << "seed=" << report.seed << "\n"
     << "score=" << format_double(report.score) << "\n";
  for (const auto& [k, v] : report.conditions) kv << "condition." << k << "=" << format_double(v) << "\n";
  for (const auto& [k, v] : report.config) kv << "config." << k << "=" << v << "\n";
  if (!kv) throw Error("failed writing '" + txt.string() + "'");

  const fs::path csv = dir / (report.experiment + ".csv");
  std::ofstream table(csv, std::ios::trunc);
  if (!table) throw Error("cannot open '" + csv.string() + "' for writing");
  table << "condition,value\n";
  for (const auto& [k, v] : report.conditions) table << k << "," << format_double(v) << "\n";
  if (!table) throw Error("failed writing '" + csv.string() + "'");
}

ExperimentReport read_report(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open report '" + file.string() + "'");
  ExperimentReport r;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(file.string() + ":" + std::to_string(n) + ": expected key=value");
    }
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "experiment") {
      r.experiment = value;
    } else if (key == "metric") {
      r.metric = value;
    } else if (key == "seed") {
      r.seed = std::stoull(value);
    } else if (key == "score") {
      r.score = std::stod(value);
    } else if (key.rfind("condition.", 0) == 0) {
      r.conditions.emplace_back(key.substr(10), std::stod(value));
    } else if (key.rfind("config.", 0) == 0) {
      r.config.emplace_back(key.substr(7), value);
    } else {
      throw Error(file.string() + ":" + std::to_string(n) + ": unknown key '" + key + "'");
    }
  }
  return r;
}

}  // namespace pim
