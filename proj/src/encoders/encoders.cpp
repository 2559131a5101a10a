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

#include "pim/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pim/numerics/random.hpp"

namespace pim {
namespace {

std::string scale_prefix(const char* group, int s) {
  return std::string(group) + ".s" + std::to_string(s) + ".";
}

void check_range(const char* field, int value, int lo, int hi) {
  if (value < lo || value > hi) {
    throw Error(std::string("architecture: ") + field + " = " + std::to_string(value) +
                " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
}

template <typename T>
BasicTensor<T> crop_spatial(const Tensor& x, int64_t y0, int64_t x0, int64_t h, int64_t w) {
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  BasicTensor<T> out(Shape{N, C, h, w});
  for (int64_t p = 0; p < N * C; ++p)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t xx = 0; xx < w; ++xx)
        out[static_cast<size_t>((p * h + y) * w + xx)] =
            static_cast<T>(x[static_cast<size_t>((p * H + y0 + y) * W + x0 + xx)]);
  return out;
}

template <typename T>
Var<T> dense(const BoundParameters<T>& p, const std::string& prefix, Var<T> x) {
  const Var<T> w = p[prefix + "weight"];
  const Var<T> k = reshape(w, Shape{w.dim(0), w.dim(1), 1, 1});
  return conv2d(x, k, p[prefix + "bias"], 1, Padding::valid);
}

template <typename T>
Var<T> scale_cnn(const BoundParameters<T>& p, int s, Var<T> x) {
  const int depth = p.architecture().cnn_depth;
  const std::string prefix = scale_prefix("frontend", s);
  for (int l = 0; l < depth; ++l) {
    const std::string layer = prefix + "conv" + std::to_string(l) + ".";
    x = conv2d(x, p[layer + "weight"], p[layer + "bias"], 1, Padding::same);
    if (l + 1 < depth) x = relu(x);
  }
  return x;
}

void check_pyramid_kind(const Architecture& arch, const PyramidDecomposition& pyramid) {
  if (arch.pyramid != pyramid.kind) {
    throw Error("frontend: model expects a " + to_string(arch.pyramid) +
                " pyramid, got " + to_string(pyramid.kind));
  }
}

template <typename T>
void check_features(const Architecture& arch, const Features<T>& f, const char* what) {
  for (int s = 0; s < kNumScales; ++s) {
    const Shape& shape = f[static_cast<size_t>(s)].shape();
    if (shape.size() != 4 || shape[1] != arch.feature_channels) {
      throw ShapeError(std::string(what) + ": scale " + std::to_string(s) +
                       " features have shape " + shape_to_string(shape));
    }
  }
}

}  // namespace

void Architecture::validate() const {
  check_range("cnn_depth", cnn_depth, 1, 8);
  check_range("cnn_width", cnn_width, 1, 1024);
  check_range("feature_channels", feature_channels, 1, 256);
  check_range("components", components, 1, 64);
  check_range("latent_dim", latent_dim, 1, 256);
  check_range("marginal_width", marginal_width, 1, 1024);
  check_range("full_width", full_width, 1, 1024);
}

std::vector<ParameterSpec> parameter_layout(const Architecture& arch) {
  arch.validate();
  std::vector<ParameterSpec> specs;
  const auto channels = level_channels(arch.pyramid);
  const int64_t k = kFrontendKernel;
  auto add = [&](std::string name, Shape shape, int64_t fan_in, InitKind init) {
    specs.push_back({std::move(name), std::move(shape), fan_in, init});
  };
  auto add_dense = [&](const std::string& prefix, int64_t out, int64_t in, InitKind init) {
    add(prefix + "weight", {out, in}, in, init);
    add(prefix + "bias", {out}, in, InitKind::zeros);
  };
  for (int s = 0; s < kNumScales; ++s) {
    const std::string prefix = scale_prefix("frontend", s);
    int64_t in = channels[static_cast<size_t>(s)];
    for (int l = 0; l < arch.cnn_depth; ++l) {
      const bool last = l + 1 == arch.cnn_depth;
      const int64_t out = last ? arch.feature_channels : arch.cnn_width;
      const std::string layer = prefix + "conv" + std::to_string(l) + ".";
      add(layer + "weight", {out, in, k, k}, in * k * k,
          last ? InitKind::linear_uniform : InitKind::relu_uniform);
      add(layer + "bias", {out}, in * k * k, InitKind::zeros);
      in = out;
    }
  }
  const int64_t mixture_out = arch.components + arch.components * arch.latent_dim;
  for (int s = 0; s < kNumScales; ++s) {
    const std::string prefix = scale_prefix("marginal", s);
    add_dense(prefix + "fc0.", arch.marginal_width, arch.feature_channels, InitKind::relu_uniform);
    add_dense(prefix + "fc1.", arch.marginal_width, arch.marginal_width, InitKind::relu_uniform);
    add_dense(prefix + "fc2.", mixture_out, arch.marginal_width, InitKind::linear_uniform);
  }
  for (int s = 0; s < kNumScales; ++s) {
    const std::string prefix = scale_prefix("full", s);
    add_dense(prefix + "fc0.", arch.full_width, arch.feature_channels, InitKind::relu_uniform);
    add_dense(prefix + "fc1.", arch.full_width, arch.full_width, InitKind::relu_uniform);
    add(prefix + "affine.weight", {2 * arch.full_width, arch.feature_channels},
        arch.feature_channels, InitKind::small_uniform);
    add(prefix + "affine.bias", {2 * arch.full_width}, arch.feature_channels,
        InitKind::affine_bias);
    add_dense(prefix + "fc2.", arch.latent_dim, arch.full_width, InitKind::linear_uniform);
  }
  return specs;
}

ModelParameters::ModelParameters(Architecture arch, std::vector<std::string> names,
                                 std::vector<Tensor> tensors)
    : arch_(arch), names_(std::move(names)), tensors_(std::move(tensors)) {
  const auto layout = parameter_layout(arch_);
  if (names_.size() != layout.size() || tensors_.size() != layout.size()) {
    throw Error("model parameters: expected " + std::to_string(layout.size()) +
                " tensors, got " + std::to_string(tensors_.size()));
  }
  for (size_t i = 0; i < layout.size(); ++i) {
    if (names_[i] != layout[i].name) {
      throw Error("model parameters: tensor " + std::to_string(i) + " is '" + names_[i] +
                  "', expected '" + layout[i].name + "'");
    }
    if (tensors_[i].shape() != layout[i].shape) {
      throw Error("model parameters: '" + names_[i] + "' has shape " +
                  shape_to_string(tensors_[i].shape()) + ", expected " +
                  shape_to_string(layout[i].shape));
    }
    lookup_.emplace(names_[i], i);
  }
}

size_t ModelParameters::index(const std::string& name) const {
  const auto it = lookup_.find(name);
  if (it == lookup_.end()) throw Error("model parameters: no tensor named '" + name + "'");
  return it->second;
}

int64_t ModelParameters::scalar_count() const {
  int64_t n = 0;
  for (const auto& t : tensors_) n += static_cast<int64_t>(t.size());
  return n;
}

bool ModelParameters::operator==(const ModelParameters& other) const {
  return arch_ == other.arch_ && names_ == other.names_ && tensors_ == other.tensors_;
}

ModelParameters init_parameters(uint64_t seed, const Architecture& arch) {
  const auto layout = parameter_layout(arch);
  std::vector<std::string> names;
  std::vector<Tensor> tensors;
  for (size_t i = 0; i < layout.size(); ++i) {
    const ParameterSpec& spec = layout[i];
    // One stream per tensor: adding a tensor never perturbs the others.
    Rng rng(derive_seed(seed, i));
    const double fan = static_cast<double>(std::max<int64_t>(spec.fan_in, 1));
    Tensor t(spec.shape);
    switch (spec.init) {
      case InitKind::relu_uniform: {
        const double b = std::sqrt(6.0 / fan);
        t = uniform_tensor<float>(spec.shape, rng, -b, b);
        break;
      }
      case InitKind::linear_uniform: {
        const double b = std::sqrt(3.0 / fan);
        t = uniform_tensor<float>(spec.shape, rng, -b, b);
        break;
      }
      case InitKind::small_uniform: {
        const double b = 0.1 * std::sqrt(3.0 / fan);
        t = uniform_tensor<float>(spec.shape, rng, -b, b);
        break;
      }
      case InitKind::zeros:
        break;
      case InitKind::affine_bias:
        for (size_t j = 0; j < t.size() / 2; ++j) t[j] = 1.0f;
        break;
    }
    names.push_back(spec.name);
    tensors.push_back(std::move(t));
  }
  return ModelParameters(arch, std::move(names), std::move(tensors));
}

template <typename T>
BoundParameters<T>::BoundParameters(BasicTape<T>& tape, const ModelParameters& params,
                                    bool trainable)
    : tape_(&tape), source_(&params) {
  vars_.reserve(params.size());
  for (const Tensor& t : params.tensors()) {
    BasicTensor<T> value = t.cast<T>();
    vars_.push_back(trainable ? tape.parameter(std::move(value))
                              : tape.constant(std::move(value)));
  }
}

int64_t center_offset(int64_t extent, int64_t size) {
  if (size > extent) {
    throw ShapeError("center crop of " + std::to_string(size) + " exceeds extent " +
                     std::to_string(extent));
  }
  return (extent - size) / 2;
}

template <typename T>
Features<T> frontend(const BoundParameters<T>& params, const PyramidDecomposition& pyramid) {
  check_pyramid_kind(params.architecture(), pyramid);
  Features<T> out;
  for (int s = 0; s < kNumScales; ++s) {
    const Tensor& band = pyramid.levels[static_cast<size_t>(s)].subbands;
    out[static_cast<size_t>(s)] =
        scale_cnn(params, s, params.tape().constant(band.cast<T>()));
  }
  return out;
}

template <typename T>
Features<T> frontend_center(const BoundParameters<T>& params,
                            const PyramidDecomposition& pyramid, int64_t size) {
  check_pyramid_kind(params.architecture(), pyramid);
  const int64_t margin = params.architecture().receptive_radius();
  Features<T> out;
  for (int s = 0; s < kNumScales; ++s) {
    const Tensor& band = pyramid.levels[static_cast<size_t>(s)].subbands;
    const int64_t H = band.dim(2), W = band.dim(3);
    const int64_t top = center_offset(H, size), left = center_offset(W, size);
    // Where the window reaches the border the zero padding is the real one,
    // so clipping keeps the result exact.
    const int64_t y0 = std::max<int64_t>(0, top - margin);
    const int64_t y1 = std::min(H, top + size + margin);
    const int64_t x0 = std::max<int64_t>(0, left - margin);
    const int64_t x1 = std::min(W, left + size + margin);
    Var<T> in = params.tape().constant(crop_spatial<T>(band, y0, x0, y1 - y0, x1 - x0));
    Var<T> full = scale_cnn(params, s, in);
    out[static_cast<size_t>(s)] = slice(slice(full, 2, top - y0, size), 3, left - x0, size);
  }
  return out;
}

template <typename T>
MixtureField<T> marginal_encode(const BoundParameters<T>& params,
                                const Features<T>& features) {
  const Architecture& arch = params.architecture();
  check_features(arch, features, "marginal_encode");
  const int64_t C = arch.components, D = arch.latent_dim;
  MixtureField<T> out;
  for (int s = 0; s < kNumScales; ++s) {
    const std::string prefix = scale_prefix("marginal", s);
    Var<T> h = relu(dense(params, prefix + "fc0.", features[static_cast<size_t>(s)]));
    h = relu(dense(params, prefix + "fc1.", h));
    const Var<T> o = dense(params, prefix + "fc2.", h);
    const int64_t N = o.dim(0), H = o.dim(2), W = o.dim(3);
    MixtureScale<T>& m = out[static_cast<size_t>(s)];
    m.logits = slice(o, 1, 0, C);
    m.log_weights = log_softmax(m.logits, 1);
    m.weights = softmax(m.logits, 1);
    m.means = reshape(slice(o, 1, C, C * D), Shape{N, C, D, H, W});
  }
  return out;
}

template <typename T>
MeanField<T> full_encode(const BoundParameters<T>& params, const Features<T>& fx,
                         const Features<T>& fy) {
  const Architecture& arch = params.architecture();
  check_features(arch, fx, "full_encode");
  check_features(arch, fy, "full_encode");
  const int64_t F = arch.full_width;
  MeanField<T> out;
  for (int s = 0; s < kNumScales; ++s) {
    const auto i = static_cast<size_t>(s);
    if (fx[i].shape() != fy[i].shape()) {
      throw ShapeError("full_encode: scale " + std::to_string(s) + " x features " +
                       shape_to_string(fx[i].shape()) + " vs y features " +
                       shape_to_string(fy[i].shape()));
    }
    const std::string prefix = scale_prefix("full", s);
    Var<T> h = relu(dense(params, prefix + "fc0.", fx[i]));
    h = relu(dense(params, prefix + "fc1.", h));
    const Var<T> mod = dense(params, prefix + "affine.", fy[i]);
    h = affine(h, slice(mod, 1, 0, F), slice(mod, 1, F, F));
    out[i] = dense(params, prefix + "fc2.", h);
  }
  return out;
}

MixtureValues encode_images(const ModelParameters& params, const Tensor& images) {
  Tape tape;
  const BoundParameters<float> bound(tape, params, false);
  const auto pyramid = decompose(images, params.architecture().pyramid);
  const auto field = marginal_encode(bound, frontend(bound, pyramid));
  MixtureValues out;
  for (size_t s = 0; s < kNumScales; ++s) {
    out.log_weights[s] = field[s].log_weights.value();
    out.means[s] = field[s].means.value();
  }
  return out;
}

#define PIM_INSTANTIATE_ENCODERS(T)                                                      \
  template class BoundParameters<T>;                                                     \
  template Features<T> frontend(const BoundParameters<T>&, const PyramidDecomposition&); \
  template Features<T> frontend_center(const BoundParameters<T>&,                        \
                                       const PyramidDecomposition&, int64_t);            \
  template MixtureField<T> marginal_encode(const BoundParameters<T>&, const Features<T>&); \
  template MeanField<T> full_encode(const BoundParameters<T>&, const Features<T>&,       \
                                    const Features<T>&);

PIM_INSTANTIATE_ENCODERS(float)
PIM_INSTANTIATE_ENCODERS(double)

}  // namespace pim
