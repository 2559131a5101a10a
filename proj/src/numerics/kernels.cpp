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

#include "pim/numerics/kernels.hpp"

#include <algorithm>
#include <vector>

namespace pim::kernels {
namespace {

constexpr int64_t kTileRows = 4;
constexpr int64_t kTileCols = 32;

template <typename T>
void im2col(const Conv2dGeometry& g, const T* image, T* cols) {
  const int64_t P = g.out_pixels();
  const int64_t R = g.patch_size();
#pragma omp parallel for schedule(static)
  for (int64_t r = 0; r < R; ++r) {
    const int64_t kx = r % g.kernel_w;
    const int64_t ky = (r / g.kernel_w) % g.kernel_h;
    const int64_t c = r / (g.kernel_w * g.kernel_h);
    const T* plane = image + c * g.in_h * g.in_w;
    T* row = cols + r * P;
    for (int64_t oy = 0; oy < g.out_h; ++oy) {
      const int64_t iy = oy * g.stride - g.pad_top + ky;
      T* dst = row + oy * g.out_w;
      if (iy < 0 || iy >= g.in_h) {
        std::fill(dst, dst + g.out_w, T{0});
        continue;
      }
      const T* src = plane + iy * g.in_w;
      if (g.stride == 1) {
        // Contiguous run of valid columns, zeros either side.
        const int64_t lo = std::clamp<int64_t>(g.pad_left - kx, 0, g.out_w);
        const int64_t hi = std::clamp<int64_t>(g.in_w + g.pad_left - kx, lo, g.out_w);
        std::fill(dst, dst + lo, T{0});
        std::copy(src + lo - g.pad_left + kx, src + hi - g.pad_left + kx, dst + lo);
        std::fill(dst + hi, dst + g.out_w, T{0});
        continue;
      }
      for (int64_t ox = 0; ox < g.out_w; ++ox) {
        const int64_t ix = ox * g.stride - g.pad_left + kx;
        dst[ox] = (ix >= 0 && ix < g.in_w) ? src[ix] : T{0};
      }
    }
  }
}

// out[i][p] = sum_k a[i][k] * b[k][p] for a tile of rows [i0, i0+rows) and
// columns [p0, p0+cols); `a` is addressed as a[i * a_row + k * a_col].
template <typename T>
inline void product_tile(const T* a, int64_t a_row, int64_t a_col, const T* b,
                         int64_t depth, int64_t ldb, int64_t i0, int64_t rows,
                         int64_t p0, int64_t cols, T* out, int64_t ldo) {
  if (rows == kTileRows && cols == kTileCols) {
    T acc[kTileRows][kTileCols] = {};
    for (int64_t k = 0; k < depth; ++k) {
      const T* brow = b + k * ldb + p0;
      for (int64_t i = 0; i < kTileRows; ++i) {
        const T w = a[(i0 + i) * a_row + k * a_col];
#pragma omp simd
        for (int64_t j = 0; j < kTileCols; ++j) acc[i][j] += w * brow[j];
      }
    }
    for (int64_t i = 0; i < kTileRows; ++i) {
      std::copy(acc[i], acc[i] + kTileCols, out + (i0 + i) * ldo + p0);
    }
    return;
  }
  T acc[kTileRows][kTileCols] = {};
  for (int64_t k = 0; k < depth; ++k) {
    const T* brow = b + k * ldb + p0;
    for (int64_t i = 0; i < rows; ++i) {
      const T w = a[(i0 + i) * a_row + k * a_col];
      for (int64_t j = 0; j < cols; ++j) acc[i][j] += w * brow[j];
    }
  }
  for (int64_t i = 0; i < rows; ++i) {
    std::copy(acc[i], acc[i] + cols, out + (i0 + i) * ldo + p0);
  }
}

// Tiled parallel product over all tiles of an [rows x cols] result.
template <typename T>
void product(const T* a, int64_t a_row, int64_t a_col, const T* b, int64_t depth,
             int64_t rows, int64_t cols, T* out) {
  const int64_t row_tiles = (rows + kTileRows - 1) / kTileRows;
  const int64_t col_tiles = (cols + kTileCols - 1) / kTileCols;
  // Column strips outermost: one strip of `b` stays cached across all row tiles.
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t ct = 0; ct < col_tiles; ++ct) {
    for (int64_t rt = 0; rt < row_tiles; ++rt) {
      const int64_t i0 = rt * kTileRows;
      const int64_t p0 = ct * kTileCols;
      product_tile(a, a_row, a_col, b, depth, cols, i0,
                   std::min(kTileRows, rows - i0), p0,
                   std::min(kTileCols, cols - p0), out, cols);
    }
  }
}

}  // namespace

template <typename T>
void conv2d_forward_reference(const Conv2dGeometry& g, std::span<const T> input,
                              std::span<const T> kernel, std::span<const T> bias,
                              std::span<T> output) {
  for (int64_t n = 0; n < g.batch; ++n) {
    for (int64_t o = 0; o < g.out_channels; ++o) {
      for (int64_t oy = 0; oy < g.out_h; ++oy) {
        for (int64_t ox = 0; ox < g.out_w; ++ox) {
          T acc{0};
          for (int64_t c = 0; c < g.in_channels; ++c) {
            for (int64_t ky = 0; ky < g.kernel_h; ++ky) {
              const int64_t iy = oy * g.stride - g.pad_top + ky;
              for (int64_t kx = 0; kx < g.kernel_w; ++kx) {
                const int64_t ix = ox * g.stride - g.pad_left + kx;
                const T w = kernel[((o * g.in_channels + c) * g.kernel_h + ky) *
                                       g.kernel_w + kx];
                const T v = (iy >= 0 && iy < g.in_h && ix >= 0 && ix < g.in_w)
                                ? input[((n * g.in_channels + c) * g.in_h + iy) *
                                            g.in_w + ix]
                                : T{0};
                acc += w * v;
              }
            }
          }
          if (!bias.empty()) acc += bias[o];
          output[((n * g.out_channels + o) * g.out_h + oy) * g.out_w + ox] = acc;
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_input_reference(const Conv2dGeometry& g,
                                     std::span<const T> kernel,
                                     std::span<const T> grad_output,
                                     std::span<T> grad_input) {
  for (int64_t n = 0; n < g.batch; ++n) {
    for (int64_t o = 0; o < g.out_channels; ++o) {
      for (int64_t oy = 0; oy < g.out_h; ++oy) {
        for (int64_t ox = 0; ox < g.out_w; ++ox) {
          const T go =
              grad_output[((n * g.out_channels + o) * g.out_h + oy) * g.out_w + ox];
          for (int64_t c = 0; c < g.in_channels; ++c) {
            for (int64_t ky = 0; ky < g.kernel_h; ++ky) {
              const int64_t iy = oy * g.stride - g.pad_top + ky;
              if (iy < 0 || iy >= g.in_h) continue;
              for (int64_t kx = 0; kx < g.kernel_w; ++kx) {
                const int64_t ix = ox * g.stride - g.pad_left + kx;
                if (ix < 0 || ix >= g.in_w) continue;
                grad_input[((n * g.in_channels + c) * g.in_h + iy) * g.in_w + ix] +=
                    go * kernel[((o * g.in_channels + c) * g.kernel_h + ky) *
                                    g.kernel_w + kx];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_kernel_reference(const Conv2dGeometry& g,
                                      std::span<const T> input,
                                      std::span<const T> grad_output,
                                      std::span<T> grad_kernel,
                                      std::span<T> grad_bias) {
  for (int64_t n = 0; n < g.batch; ++n) {
    for (int64_t o = 0; o < g.out_channels; ++o) {
      for (int64_t oy = 0; oy < g.out_h; ++oy) {
        for (int64_t ox = 0; ox < g.out_w; ++ox) {
          const T go =
              grad_output[((n * g.out_channels + o) * g.out_h + oy) * g.out_w + ox];
          if (!grad_bias.empty()) grad_bias[o] += go;
          for (int64_t c = 0; c < g.in_channels; ++c) {
            for (int64_t ky = 0; ky < g.kernel_h; ++ky) {
              const int64_t iy = oy * g.stride - g.pad_top + ky;
              if (iy < 0 || iy >= g.in_h) continue;
              for (int64_t kx = 0; kx < g.kernel_w; ++kx) {
                const int64_t ix = ox * g.stride - g.pad_left + kx;
                if (ix < 0 || ix >= g.in_w) continue;
                grad_kernel[((o * g.in_channels + c) * g.kernel_h + ky) *
                                g.kernel_w + kx] +=
                    go * input[((n * g.in_channels + c) * g.in_h + iy) * g.in_w + ix];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_forward(const Conv2dGeometry& g, std::span<const T> input,
                    std::span<const T> kernel, std::span<const T> bias,
                    std::span<T> output) {
  const int64_t R = g.patch_size();
  const int64_t P = g.out_pixels();
  const int64_t O = g.out_channels;
  std::vector<T> cols(static_cast<size_t>(R * P));
  for (int64_t n = 0; n < g.batch; ++n) {
    im2col(g, input.data() + n * g.in_channels * g.in_h * g.in_w, cols.data());
    T* out = output.data() + n * O * P;
    product(kernel.data(), R, int64_t{1}, cols.data(), R, O, P, out);
    if (!bias.empty()) {
#pragma omp parallel for schedule(static)
      for (int64_t o = 0; o < O; ++o) {
        for (int64_t p = 0; p < P; ++p) out[o * P + p] += bias[o];
      }
    }
  }
}

template <typename T>
void conv2d_backward_input(const Conv2dGeometry& g, std::span<const T> kernel,
                           std::span<const T> grad_output,
                           std::span<T> grad_input) {
  const int64_t R = g.patch_size();
  const int64_t P = g.out_pixels();
  const int64_t O = g.out_channels;
  const int64_t KK = g.kernel_h * g.kernel_w;
  std::vector<T> gcols(static_cast<size_t>(R * P));
  for (int64_t n = 0; n < g.batch; ++n) {
    // gcols[r][p] = sum_o kernel[o][r] * grad_output[o][p]
    product(kernel.data(), int64_t{1}, R, grad_output.data() + n * O * P, O, R, P,
            gcols.data());
    T* gin = grad_input.data() + n * g.in_channels * g.in_h * g.in_w;
#pragma omp parallel for schedule(static)
    for (int64_t c = 0; c < g.in_channels; ++c) {
      T* plane = gin + c * g.in_h * g.in_w;
      for (int64_t k = 0; k < KK; ++k) {
        const int64_t ky = k / g.kernel_w;
        const int64_t kx = k % g.kernel_w;
        const T* row = gcols.data() + (c * KK + k) * P;
        for (int64_t oy = 0; oy < g.out_h; ++oy) {
          const int64_t iy = oy * g.stride - g.pad_top + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          for (int64_t ox = 0; ox < g.out_w; ++ox) {
            const int64_t ix = ox * g.stride - g.pad_left + kx;
            if (ix < 0 || ix >= g.in_w) continue;
            plane[iy * g.in_w + ix] += row[oy * g.out_w + ox];
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_kernel(const Conv2dGeometry& g, std::span<const T> input,
                            std::span<const T> grad_output,
                            std::span<T> grad_kernel, std::span<T> grad_bias) {
  const int64_t R = g.patch_size();
  const int64_t P = g.out_pixels();
  const int64_t O = g.out_channels;
  std::vector<T> cols(static_cast<size_t>(R * P));
  for (int64_t n = 0; n < g.batch; ++n) {
    im2col(g, input.data() + n * g.in_channels * g.in_h * g.in_w, cols.data());
    const T* go = grad_output.data() + n * O * P;
#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t o = 0; o < O; ++o) {
      for (int64_t r = 0; r < R; ++r) {
        const T* a = go + o * P;
        const T* b = cols.data() + r * P;
        T acc{0};
#pragma omp simd reduction(+ : acc)
        for (int64_t p = 0; p < P; ++p) acc += a[p] * b[p];
        grad_kernel[o * R + r] += acc;
      }
    }
    if (!grad_bias.empty()) {
      for (int64_t o = 0; o < O; ++o) {
        T acc{0};
        for (int64_t p = 0; p < P; ++p) acc += go[o * P + p];
        grad_bias[o] += acc;
      }
    }
  }
}

#define PIM_INSTANTIATE_CONV(T)                                                  \
  template void conv2d_forward_reference<T>(const Conv2dGeometry&,              \
                                            std::span<const T>,                 \
                                            std::span<const T>,                 \
                                            std::span<const T>, std::span<T>);  \
  template void conv2d_backward_input_reference<T>(                             \
      const Conv2dGeometry&, std::span<const T>, std::span<const T>,            \
      std::span<T>);                                                            \
  template void conv2d_backward_kernel_reference<T>(                            \
      const Conv2dGeometry&, std::span<const T>, std::span<const T>,            \
      std::span<T>, std::span<T>);                                              \
  template void conv2d_forward<T>(const Conv2dGeometry&, std::span<const T>,    \
                                  std::span<const T>, std::span<const T>,       \
                                  std::span<T>);                                \
  template void conv2d_backward_input<T>(const Conv2dGeometry&,                 \
                                         std::span<const T>,                    \
                                         std::span<const T>, std::span<T>);     \
  template void conv2d_backward_kernel<T>(const Conv2dGeometry&,                \
                                          std::span<const T>,                   \
                                          std::span<const T>, std::span<T>,     \
                                          std::span<T>);

PIM_INSTANTIATE_CONV(float)
PIM_INSTANTIATE_CONV(double)

#undef PIM_INSTANTIATE_CONV

}  // namespace pim::kernels
