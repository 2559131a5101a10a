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

#ifndef PIM_ENCODERS_HPP_
#define PIM_ENCODERS_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pim/numerics/ops.hpp"
#include "pim/numerics/tape.hpp"
#include "pim/pyramid.hpp"

namespace pim {

// Network shape. The defaults are the reference model; narrower frontends
// (cnn_width) and shallower ones (cnn_depth 2 or 3) are supported for
// ablations and desk-scale runs.
struct Architecture {
  PyramidKind pyramid = PyramidKind::steerable;
  int cnn_depth = 4;          // conv layers per scale, last one has feature_channels units
  int cnn_width = 64;         // hidden conv units
  int feature_channels = 3;   // frontend output channels per scale
  int components = 5;         // mixture components of q(z|x)
  int latent_dim = 10;        // latent dimensions per location
  int marginal_width = 50;    // hidden units of the marginal heads
  int full_width = 10;        // hidden units of the full-encoder heads

  // Throws Error when any field is out of range.
  void validate() const;
  // Spatial radius over which one frontend output depends on its input.
  int receptive_radius() const { return 2 * cnn_depth; }
  bool operator==(const Architecture&) const = default;
};

inline constexpr int kFrontendKernel = 5;

enum class InitKind {
  relu_uniform,    // U(±sqrt(6 / fan_in)), for layers followed by ReLU
  linear_uniform,  // U(±sqrt(3 / fan_in)), for linear outputs
  small_uniform,   // U(±0.1 sqrt(3 / fan_in)), for the affine modulation branch
  zeros,
  affine_bias,     // first half ones (factors), second half zeros (offsets)
};

struct ParameterSpec {
  std::string name;
  Shape shape;
  int64_t fan_in = 0;
  InitKind init = InitKind::zeros;
};

// Ordered list of every parameter tensor, e.g. "frontend.s0.conv0.weight",
// "marginal.s2.fc1.bias", "full.s4.affine.weight".
std::vector<ParameterSpec> parameter_layout(const Architecture& arch);

// Named float tensors in layout order plus the architecture they belong to.
// The marginal heads are stored once per scale and used for both images.
class ModelParameters {
 public:
  ModelParameters() = default;
  // Throws Error when names or shapes disagree with parameter_layout(arch).
  ModelParameters(Architecture arch, std::vector<std::string> names,
                  std::vector<Tensor> tensors);

  const Architecture& architecture() const { return arch_; }
  size_t size() const { return tensors_.size(); }
  const std::string& name(size_t i) const { return names_.at(i); }
  const std::vector<std::string>& names() const { return names_; }
  size_t index(const std::string& name) const;
  const Tensor& at(const std::string& name) const { return tensors_[index(name)]; }
  Tensor& at(const std::string& name) { return tensors_[index(name)]; }
  std::span<Tensor> tensors() { return tensors_; }
  std::span<const Tensor> tensors() const { return tensors_; }
  int64_t scalar_count() const;

  bool operator==(const ModelParameters& other) const;

 private:
  Architecture arch_;
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::unordered_map<std::string, size_t> lookup_;
};

// Deterministic given (seed, arch). Biases start at zero except the affine
// branch, whose factors start at one so that p(z|x,y) initially ignores y.
ModelParameters init_parameters(uint64_t seed, const Architecture& arch);

// Parameters placed on a tape, as trainable leaves or as constants.
template <typename T>
class BoundParameters {
 public:
  BoundParameters(BasicTape<T>& tape, const ModelParameters& params, bool trainable);

  Var<T> operator[](const std::string& name) const { return vars_[source_->index(name)]; }
  Var<T> at(size_t i) const { return vars_[i]; }
  const std::vector<Var<T>>& vars() const { return vars_; }
  const ModelParameters& source() const { return *source_; }
  const Architecture& architecture() const { return source_->architecture(); }
  BasicTape<T>& tape() const { return *tape_; }

 private:
  BasicTape<T>* tape_;
  const ModelParameters* source_;
  std::vector<Var<T>> vars_;
};

// Per-scale frontend outputs, each [N, feature_channels, Hs, Ws].
template <typename T>
using Features = std::array<Var<T>, kNumScales>;

template <typename T>
struct MixtureScale {
  Var<T> logits;       // [N, C, Hs, Ws]
  Var<T> log_weights;  // log_softmax of logits over components
  Var<T> weights;      // softmax of logits over components
  Var<T> means;        // [N, C, D, Hs, Ws]
};

template <typename T>
using MixtureField = std::array<MixtureScale<T>, kNumScales>;

// Per-scale conditional means of p(z|x,y), each [N, D, Hs, Ws]; unit variance.
template <typename T>
using MeanField = std::array<Var<T>, kNumScales>;

// Top-left offset of the size-long window centered in an extent-long axis.
int64_t center_offset(int64_t extent, int64_t size);

// Per-scale CNNs ("same" zero padding, ReLU between layers, linear output).
template <typename T>
Features<T> frontend(const BoundParameters<T>& params, const PyramidDecomposition& pyramid);

// Equals center-cropping frontend() to size x size at every scale, but only
// evaluates the CNNs over the crop plus their receptive radius.
template <typename T>
Features<T> frontend_center(const BoundParameters<T>& params,
                            const PyramidDecomposition& pyramid, int64_t size);

// 1x1 mixture heads: hidden ReLU layers, then C weight logits followed by C
// mean vectors of length D (channel C + c * D + d).
template <typename T>
MixtureField<T> marginal_encode(const BoundParameters<T>& params, const Features<T>& features);

// 1x1 conditional head: fx -> relu -> relu, modulated elementwise by
// factors/offsets linearly predicted from fy, then a linear map to the mean.
template <typename T>
MeanField<T> full_encode(const BoundParameters<T>& params, const Features<T>& fx,
                         const Features<T>& fy);

// Evaluated marginal distribution of one or more images, detached from any tape.
struct MixtureValues {
  std::array<Tensor, kNumScales> log_weights;  // [N, C, Hs, Ws]
  std::array<Tensor, kNumScales> means;        // [N, C, D, Hs, Ws]
};

// Pyramid, frontend and marginal heads for images [N, 3, H, W] in [0, 1].
MixtureValues encode_images(const ModelParameters& params, const Tensor& images);

// Checkpoint I/O. Little-endian: "PIMK", u32 version, architecture (u32
// fields), u64 step, u32 tensor count, then per tensor u32 name length, name,
// u32 rank, u32 extents, float32 payload.
inline constexpr uint32_t kCheckpointVersion = 1;

class CheckpointError : public Error {
 public:
  using Error::Error;
};

struct Checkpoint {
  ModelParameters params;
  uint64_t step = 0;
};

void save_checkpoint(const std::filesystem::path& path, const ModelParameters& params,
                     uint64_t step);
// Throws CheckpointError on a missing, truncated or inconsistent file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pim

#endif  // PIM_ENCODERS_HPP_
