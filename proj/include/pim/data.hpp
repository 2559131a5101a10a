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

#ifndef PIM_DATA_HPP_
#define PIM_DATA_HPP_

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pim/numerics/random.hpp"
#include "pim/numerics/tensor.hpp"

namespace pim {

// ---- Image I/O: binary PPM (P6, maxval 255). Images are [3, H, W] in [0, 1].

Tensor read_ppm(const std::filesystem::path& path);
// Values are clamped to [0, 1] and rounded to the nearest 8-bit level.
void write_ppm(const Tensor& image, const std::filesystem::path& path);

// Area-averaging resampler for [C, H, W] images.
Tensor box_resample(const Tensor& image, int64_t out_h, int64_t out_w);

// ---- Frame pairs.

struct FramePair {
  Tensor x;  // [3, P, P]
  Tensor y;  // [3, P, P], the temporally adjacent frame, same crop window
};

// Random-access collection of training pairs.
class PairSet {
 public:
  virtual ~PairSet() = default;
  virtual size_t size() const = 0;
  virtual FramePair get(size_t index) const = 0;
  // Spatial extent P of every pair.
  virtual int64_t patch_size() const = 0;
};

class InMemoryPairSet : public PairSet {
 public:
  explicit InMemoryPairSet(std::vector<FramePair> pairs);
  size_t size() const override { return pairs_.size(); }
  FramePair get(size_t index) const override { return pairs_.at(index); }
  int64_t patch_size() const override;
  const std::vector<FramePair>& pairs() const { return pairs_; }

 private:
  std::vector<FramePair> pairs_;
};

struct FramePairConfig {
  int64_t patch = 64;
  int64_t min_height = 128;
  int64_t max_height = 160;
  size_t shuffle_buffer = 1000;
};

// Reads <root>/<segment>/frame_*.ppm (segments and frames in lexicographic
// order). Per segment: box-resample to a random height in [min, max]
// (aspect preserved), pair frames (0,1), (2,3), ..., crop one random
// colocated patch per pair, then emit through a running shuffle buffer.
// Unreadable frames and unusable segments are skipped and reported in
// `warnings` when provided.
std::vector<FramePair> build_frame_pairs(const std::filesystem::path& root, uint64_t seed,
                                         const FramePairConfig& config = {},
                                         std::vector<std::string>* warnings = nullptr);

// Running-buffer shuffle: keeps up to `capacity` items, emitting a random one
// each time the buffer is full, then drains in random order.
template <typename U>
std::vector<U> running_shuffle(std::vector<U> items, size_t capacity, uint64_t seed) {
  Rng rng(seed);
  std::vector<U> buffer, out;
  capacity = std::max<size_t>(capacity, 1);
  buffer.reserve(capacity);
  out.reserve(items.size());
  auto pop_random = [&] {
    std::uniform_int_distribution<size_t> pick(0, buffer.size() - 1);
    const size_t i = pick(rng);
    out.push_back(std::move(buffer[i]));
    buffer[i] = std::move(buffer.back());
    buffer.pop_back();
  };
  for (auto& item : items) {
    buffer.push_back(std::move(item));
    if (buffer.size() == capacity) pop_random();
  }
  while (!buffer.empty()) pop_random();
  return out;
}

struct SynthConfig {
  int64_t patch = 64;
  int max_shift = 2;               // global inter-frame shift bound, pixels
  int shapes = 6;                  // shapes per scene
  int moving_shape_step = 3;       // extra displacement of one shape, pixels
  double brightness_jitter = 0.05; // multiplicative gain drawn from 1 +- jitter
  double noise_sigma = 0.02;       // independent sensor noise per frame
};

// Procedural scene: multi-octave filtered noise plus flat-colored shapes. The
// second frame is the scene shifted by up to max_shift pixels with one shape
// moved, a brightness change and fresh sensor noise. Pair `index` depends
// only on (seed, index).
FramePair synth_pair(uint64_t seed, uint64_t index, const SynthConfig& config = {});

// A single clean scene render (no shift, no noise), e.g. for evaluation sets.
Tensor synth_scene(uint64_t seed, uint64_t index, const SynthConfig& config = {});

std::vector<FramePair> synth_pairs(uint64_t seed, size_t n, const SynthConfig& config = {});

class SyntheticPairSet : public PairSet {
 public:
  SyntheticPairSet(uint64_t seed, size_t n, SynthConfig config = {})
      : seed_(seed), n_(n), config_(config) {}
  size_t size() const override { return n_; }
  FramePair get(size_t index) const override;
  int64_t patch_size() const override { return config_.patch; }

 private:
  uint64_t seed_;
  size_t n_;
  SynthConfig config_;
};

// ---- Evaluation records and manifests.
//
// Triplet manifest lines: "ref.ppm img0.ppm img1.ppm h" with h the fraction of
// raters preferring img1. Pair manifest lines: "img0.ppm img1.ppm same=0|1".
// Paths are relative to the manifest; blank lines and '#' comments are skipped.

enum class RecordKind { triplet, pair };

std::string to_string(RecordKind kind);
RecordKind parse_record_kind(const std::string& name);

struct EvalRecord {
  RecordKind kind = RecordKind::triplet;
  Tensor ref;   // triplets only
  Tensor img0;
  Tensor img1;
  double h = 0.0;     // triplets: preference for img1
  bool same = false;  // pairs: judged identical
  int line = 0;       // manifest line number, 0 when not loaded from a file
};

// Throws Error naming the manifest line on malformed lines, out-of-range h,
// unreadable images or mismatched extents.
std::vector<EvalRecord> load_eval_records(const std::filesystem::path& manifest,
                                          RecordKind kind);

// Writes each record's images as PPM next to the manifest (prefix_<i>_*.ppm)
// and the manifest itself.
void write_eval_records(const std::filesystem::path& manifest,
                        const std::vector<EvalRecord>& records);

}  // namespace pim

#endif  // PIM_DATA_HPP_
