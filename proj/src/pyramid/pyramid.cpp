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

#include "pim/pyramid.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace pim {
namespace {

inline int64_t reflect(int64_t i, int64_t n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

void check_nchw(const Tensor& x, const char* what) {
  if (x.rank() != 4) {
    throw ShapeError(std::string(what) + ": expected [N, C, H, W], got " +
                     shape_to_string(x.shape()));
  }
}

// Copies channel `c` of each image of `src` into channel `dst_c` of `dst`.
void copy_channel(const Tensor& src, int64_t c, Tensor& dst, int64_t dst_c) {
  const int64_t n_img = src.dim(0), plane = src.dim(2) * src.dim(3);
  for (int64_t n = 0; n < n_img; ++n) {
    const float* s = src.data().data() + (n * src.dim(1) + c) * plane;
    float* d = dst.data().data() + (n * dst.dim(1) + dst_c) * plane;
    std::copy(s, s + plane, d);
  }
}

constexpr std::array<float, 5> kUpsampleTaps = {2.0f / 16, 8.0f / 16, 12.0f / 16,
                                                8.0f / 16, 2.0f / 16};

}  // namespace

std::string to_string(PyramidKind kind) {
  return kind == PyramidKind::steerable ? "steerable" : "laplacian";
}

PyramidKind parse_pyramid_kind(const std::string& name) {
  if (name == "steerable") return PyramidKind::steerable;
  if (name == "laplacian") return PyramidKind::laplacian;
  throw Error("unknown pyramid kind '" + name + "' (expected steerable or laplacian)");
}

std::array<int, kNumScales> level_factors(PyramidKind kind) {
  if (kind == PyramidKind::steerable) return {1, 1, 2, 4, 8};
  return {1, 2, 4, 8, 8};
}

std::array<int, kNumScales> level_channels(PyramidKind kind) {
  if (kind == PyramidKind::steerable) return {3, 6, 6, 6, 3};
  return {3, 3, 3, 3, 3};
}

void check_pyramid_input(const Tensor& image) {
  check_nchw(image, "pyramid input");
  if (image.dim(1) != 3) {
    throw ShapeError("pyramid input must have 3 color channels, got " +
                     shape_to_string(image.shape()));
  }
  for (int axis : {2, 3}) {
    const int64_t e = image.dim(axis);
    if (e < 32 || e % 8 != 0) {
      throw ShapeError("pyramid input extents must be >= 32 and divisible by 8, got " +
                       shape_to_string(image.shape()));
    }
  }
}

namespace filters {

Tensor separable(const Tensor& x, std::span<const float> taps_y,
                 std::span<const float> taps_x) {
  check_nchw(x, "separable filter");
  if (taps_y.size() % 2 == 0 || taps_x.size() % 2 == 0) {
    throw Error("separable filter taps must have odd length");
  }
  const int64_t planes = x.dim(0) * x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t ry = static_cast<int64_t>(taps_y.size()) / 2;
  const int64_t rx = static_cast<int64_t>(taps_x.size()) / 2;
  Tensor out(x.shape());
  const float* src = x.data().data();
  float* dst = out.data().data();
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < planes; ++p) {
    std::vector<float> rows(static_cast<size_t>(H * W));
    const float* s = src + p * H * W;
    for (int64_t y = 0; y < H; ++y) {
      for (int64_t xx = 0; xx < W; ++xx) {
        float acc = 0.0f;
        for (int64_t j = -rx; j <= rx; ++j) {
          acc += taps_x[static_cast<size_t>(j + rx)] * s[y * W + reflect(xx + j, W)];
        }
        rows[static_cast<size_t>(y * W + xx)] = acc;
      }
    }
    float* d = dst + p * H * W;
    for (int64_t y = 0; y < H; ++y) {
      for (int64_t xx = 0; xx < W; ++xx) {
        float acc = 0.0f;
        for (int64_t i = -ry; i <= ry; ++i) {
          acc += taps_y[static_cast<size_t>(i + ry)] *
                 rows[static_cast<size_t>(reflect(y + i, H) * W + xx)];
        }
        d[y * W + xx] = acc;
      }
    }
  }
  return out;
}

Tensor blur(const Tensor& x) { return separable(x, kBinomial5, kBinomial5); }

Tensor downsample2(const Tensor& x) {
  check_nchw(x, "downsample2");
  const int64_t planes = x.dim(0) * x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t h = (H + 1) / 2, w = (W + 1) / 2;
  Tensor out(Shape{x.dim(0), x.dim(1), h, w});
  for (int64_t p = 0; p < planes; ++p) {
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t xx = 0; xx < w; ++xx) {
        out[p * h * w + y * w + xx] = x[p * H * W + 2 * y * W + 2 * xx];
      }
    }
  }
  return out;
}

Tensor upsample2(const Tensor& x) {
  check_nchw(x, "upsample2");
  const int64_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor sparse(Shape{x.dim(0), x.dim(1), 2 * h, 2 * w});
  for (int64_t p = 0; p < planes; ++p) {
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t xx = 0; xx < w; ++xx) {
        sparse[p * 4 * h * w + 2 * y * 2 * w + 2 * xx] = x[p * h * w + y * w + xx];
      }
    }
  }
  return separable(sparse, kUpsampleTaps, kUpsampleTaps);
}

Tensor oriented(const Tensor& x) {
  check_nchw(x, "oriented filter");
  const Tensor horizontal = separable(x, kBinomial5, kDerivative5);
  const Tensor vertical = separable(x, kDerivative5, kBinomial5);
  Tensor out(Shape{x.dim(0), 2 * x.dim(1), x.dim(2), x.dim(3)});
  for (int64_t c = 0; c < x.dim(1); ++c) {
    copy_channel(horizontal, c, out, 2 * c);
    copy_channel(vertical, c, out, 2 * c + 1);
  }
  return out;
}

Tensor subtract(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("subtract: " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
  Tensor out(a.shape());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
  Tensor out(a.shape());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

std::pair<Tensor, Tensor> laplacian_split(const Tensor& g) {
  Tensor coarse = downsample2(blur(g));
  Tensor detail = subtract(g, upsample2(coarse));
  return {std::move(detail), std::move(coarse)};
}

}  // namespace filters

PyramidDecomposition steerable_decompose(const Tensor& image) {
  check_pyramid_input(image);
  PyramidDecomposition pyr;
  pyr.kind = PyramidKind::steerable;
  const auto factors = level_factors(pyr.kind);

  Tensor low = filters::blur(image);
  pyr.levels[0] = {filters::subtract(image, low), {factors[0], 1}};
  for (int s = 1; s <= 3; ++s) {
    pyr.levels[static_cast<size_t>(s)] = {filters::oriented(low), {factors[s], 2}};
    low = filters::downsample2(filters::blur(low));
  }
  pyr.levels[4] = {std::move(low), {factors[4], 1}};
  return pyr;
}

PyramidDecomposition laplacian_decompose(const Tensor& image) {
  check_pyramid_input(image);
  PyramidDecomposition pyr;
  pyr.kind = PyramidKind::laplacian;
  const auto factors = level_factors(pyr.kind);

  Tensor g = image;
  for (int s = 0; s < 3; ++s) {
    auto [detail, coarse] = filters::laplacian_split(g);
    pyr.levels[static_cast<size_t>(s)] = {std::move(detail), {factors[s], 1}};
    g = std::move(coarse);
  }
  // The coarsest band keeps its resolution: detail = g - blur(g), residual = blur(g).
  Tensor residual = filters::blur(g);
  pyr.levels[3] = {filters::subtract(g, residual), {factors[3], 1}};
  pyr.levels[4] = {std::move(residual), {factors[4], 1}};
  return pyr;
}

Tensor laplacian_reconstruct(const PyramidDecomposition& pyramid) {
  if (pyramid.kind != PyramidKind::laplacian) {
    throw Error("laplacian_reconstruct requires a Laplacian pyramid");
  }
  Tensor g = filters::add(pyramid.levels[3].subbands, pyramid.levels[4].subbands);
  for (int s = 2; s >= 0; --s) {
    g = filters::add(pyramid.levels[static_cast<size_t>(s)].subbands, filters::upsample2(g));
  }
  return g;
}

PyramidDecomposition decompose(const Tensor& image, PyramidKind kind) {
  return kind == PyramidKind::steerable ? steerable_decompose(image)
                                        : laplacian_decompose(image);
}

}  // namespace pim
