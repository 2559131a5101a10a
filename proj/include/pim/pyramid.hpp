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

#ifndef PIM_PYRAMID_HPP_
#define PIM_PYRAMID_HPP_

#include <array>
#include <span>
#include <string>
#include <utility>

#include "pim/numerics/tensor.hpp"

namespace pim {

enum class PyramidKind { steerable, laplacian };

std::string to_string(PyramidKind kind);
PyramidKind parse_pyramid_kind(const std::string& name);

inline constexpr int kNumScales = 5;

struct ScaleDescriptor {
  int downsampling = 1;  // level pixel spacing in input pixels
  int orientations = 1;  // oriented subbands per color channel
};

struct PyramidLevel {
  Tensor subbands;  // [N, channels, Hs, Ws]
  ScaleDescriptor scale;
};

// Five levels: highpass, three bandpass, lowpass (steerable); or four detail
// levels and a low-resolution residual (Laplacian).
struct PyramidDecomposition {
  PyramidKind kind = PyramidKind::steerable;
  std::array<PyramidLevel, kNumScales> levels;
};

// Downsampling factor of each level for a pyramid kind:
// steerable {1, 1, 2, 4, 8}, Laplacian {1, 2, 4, 8, 8}.
std::array<int, kNumScales> level_factors(PyramidKind kind);
// Channels per level for 3-channel input: steerable {3, 6, 6, 6, 3}, Laplacian 3 each.
std::array<int, kNumScales> level_channels(PyramidKind kind);

// Image extents must be at least 32 and divisible by 8.
void check_pyramid_input(const Tensor& image);

// Steerable pyramid with two orientations (horizontal and vertical
// derivative-of-binomial filters) and three bandpass scales. Bandpass channel
// 2c holds the horizontal response of color c, channel 2c+1 the vertical one.
PyramidDecomposition steerable_decompose(const Tensor& image);

PyramidDecomposition laplacian_decompose(const Tensor& image);
Tensor laplacian_reconstruct(const PyramidDecomposition& pyramid);

PyramidDecomposition decompose(const Tensor& image, PyramidKind kind);

// Filter-bank building blocks, exposed for tests. All operate per plane of a
// [N, C, H, W] tensor with reflect padding (x[-i] = x[i]).
namespace filters {

inline constexpr std::array<float, 5> kBinomial5 = {1.0f / 16, 4.0f / 16, 6.0f / 16,
                                                    4.0f / 16, 1.0f / 16};
inline constexpr std::array<float, 5> kDerivative5 = {-1.0f / 8, -2.0f / 8, 0.0f,
                                                      2.0f / 8, 1.0f / 8};

// Applies taps_y along H and taps_x along W (odd lengths, centered).
Tensor separable(const Tensor& x, std::span<const float> taps_y,
                 std::span<const float> taps_x);
Tensor blur(const Tensor& x);
Tensor downsample2(const Tensor& x);
// Zero-insertion to twice the extent followed by a 2x-gain binomial blur.
Tensor upsample2(const Tensor& x);
// [N, C, H, W] -> [N, 2C, H, W] horizontal/vertical responses per channel.
Tensor oriented(const Tensor& x);
Tensor subtract(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);

// One Laplacian step: {g - upsample2(coarse), coarse = downsample2(blur(g))}.
std::pair<Tensor, Tensor> laplacian_split(const Tensor& g);

}  // namespace filters
}  // namespace pim

#endif  // PIM_PYRAMID_HPP_
