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

#ifndef PIM_NUMERICS_KERNELS_HPP_
#define PIM_NUMERICS_KERNELS_HPP_

#include <cstdint>
#include <span>

namespace pim::kernels {

// Cross-correlation geometry. Input [N,C,H,W], kernel [O,C,KH,KW],
// output [N,O,OH,OW]; zero padding of pad_top/pad_left before the first row
// and column (bottom/right padding is implied by OH/OW).
struct Conv2dGeometry {
  int64_t batch = 0;
  int64_t in_channels = 0;
  int64_t in_h = 0;
  int64_t in_w = 0;
  int64_t out_channels = 0;
  int64_t kernel_h = 0;
  int64_t kernel_w = 0;
  int64_t stride = 1;
  int64_t pad_top = 0;
  int64_t pad_left = 0;
  int64_t out_h = 0;
  int64_t out_w = 0;

  int64_t patch_size() const { return in_channels * kernel_h * kernel_w; }
  int64_t out_pixels() const { return out_h * out_w; }
};

// Both kernel families produce, for every output element, the sum over
// (c, ky, kx) in ascending order. The parallel kernels assign each output
// element to exactly one thread, so results do not depend on thread count.

// Serial direct-loop reference.
template <typename T>
void conv2d_forward_reference(const Conv2dGeometry& g, std::span<const T> input,
                              std::span<const T> kernel, std::span<const T> bias,
                              std::span<T> output);
template <typename T>
void conv2d_backward_input_reference(const Conv2dGeometry& g,
                                     std::span<const T> kernel,
                                     std::span<const T> grad_output,
                                     std::span<T> grad_input);
template <typename T>
void conv2d_backward_kernel_reference(const Conv2dGeometry& g,
                                      std::span<const T> input,
                                      std::span<const T> grad_output,
                                      std::span<T> grad_kernel,
                                      std::span<T> grad_bias);

// OpenMP im2col + register-tiled products. Gradients accumulate (+=) into
// grad_input / grad_kernel / grad_bias; forward overwrites output.
template <typename T>
void conv2d_forward(const Conv2dGeometry& g, std::span<const T> input,
                    std::span<const T> kernel, std::span<const T> bias,
                    std::span<T> output);
template <typename T>
void conv2d_backward_input(const Conv2dGeometry& g, std::span<const T> kernel,
                           std::span<const T> grad_output,
                           std::span<T> grad_input);
template <typename T>
void conv2d_backward_kernel(const Conv2dGeometry& g, std::span<const T> input,
                            std::span<const T> grad_output,
                            std::span<T> grad_kernel, std::span<T> grad_bias);

}  // namespace pim::kernels

#endif  // PIM_NUMERICS_KERNELS_HPP_
