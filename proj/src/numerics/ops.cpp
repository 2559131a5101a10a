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

#include "pim/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pim/numerics/kernels.hpp"

namespace pim {

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const size_t r = std::max(a.size(), b.size());
  Shape out(r, 1);
  for (size_t i = 0; i < r; ++i) {
    const int64_t ea = i < a.size() ? a[a.size() - 1 - i] : 1;
    const int64_t eb = i < b.size() ? b[b.size() - 1 - i] : 1;
    if (ea != eb && ea != 1 && eb != 1) {
      throw ShapeError("cannot broadcast " + shape_to_string(a) + " with " +
                       shape_to_string(b));
    }
    out[r - 1 - i] = ea == 1 ? eb : ea;
  }
  return out;
}

namespace {

struct BroadcastPlan {
  Shape out;
  std::vector<int64_t> stride_a;
  std::vector<int64_t> stride_b;
  bool same = false;
};

std::vector<int64_t> aligned_strides(const Shape& in, const Shape& out) {
  const size_t r = out.size();
  std::vector<int64_t> strides(r, 0);
  int64_t s = 1;
  for (size_t i = 0; i < in.size(); ++i) {
    const size_t ax_in = in.size() - 1 - i;
    const size_t ax_out = r - 1 - i;
    strides[ax_out] = in[ax_in] == 1 ? 0 : s;
    s *= in[ax_in];
  }
  return strides;
}

BroadcastPlan make_plan(const Shape& a, const Shape& b) {
  BroadcastPlan p;
  p.out = broadcast_shape(a, b);
  p.same = (a == b);
  p.stride_a = aligned_strides(a, p.out);
  p.stride_b = aligned_strides(b, p.out);
  return p;
}

// Calls f(out_index, a_index, b_index) for every output element in order.
template <typename F>
void for_each_broadcast(const BroadcastPlan& p, F&& f) {
  const int64_t total = shape_numel(p.out);
  if (total == 0) return;
  if (p.same) {
    for (int64_t i = 0; i < total; ++i) f(i, i, i);
    return;
  }
  const size_t r = p.out.size();
  if (r == 0) {
    f(0, 0, 0);
    return;
  }
  const int64_t inner = p.out[r - 1];
  const int64_t sai = p.stride_a[r - 1];
  const int64_t sbi = p.stride_b[r - 1];
  const int64_t outer = total / inner;
  std::vector<int64_t> idx(r, 0);
  int64_t ia = 0;
  int64_t ib = 0;
  for (int64_t o = 0; o < outer; ++o) {
    const int64_t base = o * inner;
    for (int64_t j = 0; j < inner; ++j) f(base + j, ia + j * sai, ib + j * sbi);
    for (int64_t ax = static_cast<int64_t>(r) - 2; ax >= 0; --ax) {
      ++idx[ax];
      ia += p.stride_a[ax];
      ib += p.stride_b[ax];
      if (idx[ax] < p.out[ax]) break;
      ia -= p.stride_a[ax] * p.out[ax];
      ib -= p.stride_b[ax] * p.out[ax];
      idx[ax] = 0;
    }
  }
}

struct AxisView {
  int64_t outer = 1;
  int64_t n = 1;
  int64_t inner = 1;
  size_t axis = 0;
};

AxisView axis_view(const Shape& s, int axis, const char* op) {
  const int r = static_cast<int>(s.size());
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) {
    throw ShapeError(std::string(op) + ": axis out of range for shape " +
                     shape_to_string(s));
  }
  AxisView v;
  v.axis = static_cast<size_t>(axis);
  for (int i = 0; i < axis; ++i) v.outer *= s[i];
  v.n = s[axis];
  for (int i = axis + 1; i < r; ++i) v.inner *= s[i];
  return v;
}

Shape without_axis(const Shape& s, size_t axis) {
  Shape out;
  for (size_t i = 0; i < s.size(); ++i) {
    if (i != axis) out.push_back(s[i]);
  }
  return out;
}

template <typename T>
void check_same_tape(Var<T> a, Var<T> b, const char* op) {
  if (a.tape != b.tape || a.tape == nullptr) {
    throw Error(std::string(op) + ": operands are not on the same tape");
  }
}

template <typename T, typename F, typename G>
Var<T> unary(Var<T> x, const char* name, F forward, G derivative) {
  const auto& xv = x.value();
  BasicTensor<T> out(xv.shape());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = forward(xv[i]);
  return x.tape->record(
      std::move(out), {x},
      [x, derivative](BasicTape<T>& tape, const BasicTensor<T>& y,
                      const BasicTensor<T>& g) {
        if (!tape.requires_grad(x)) return;
        const auto& xv = tape.value(x);
        auto& gx = tape.grad_buffer(x);
        for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * derivative(xv[i], y[i]);
      },
      name);
}

}  // namespace

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  check_same_tape(a, b, "add");
  const auto plan = make_plan(a.shape(), b.shape());
  const auto& av = a.value();
  const auto& bv = b.value();
  BasicTensor<T> out(plan.out);
  for_each_broadcast(plan, [&](int64_t i, int64_t ia, int64_t ib) {
    out[i] = av[ia] + bv[ib];
  });
  return a.tape->record(
      std::move(out), {a, b},
      [a, b, plan](BasicTape<T>& tape, const BasicTensor<T>&,
                   const BasicTensor<T>& g) {
        if (tape.requires_grad(a)) {
          auto& ga = tape.grad_buffer(a);
          for_each_broadcast(plan, [&](int64_t i, int64_t ia, int64_t) { ga[ia] += g[i]; });
        }
        if (tape.requires_grad(b)) {
          auto& gb = tape.grad_buffer(b);
          for_each_broadcast(plan, [&](int64_t i, int64_t, int64_t ib) { gb[ib] += g[i]; });
        }
      },
      "add");
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  check_same_tape(a, b, "sub");
  const auto plan = make_plan(a.shape(), b.shape());
  const auto& av = a.value();
  const auto& bv = b.value();
  BasicTensor<T> out(plan.out);
  for_each_broadcast(plan, [&](int64_t i, int64_t ia, int64_t ib) {
    out[i] = av[ia] - bv[ib];
  });
  return a.tape->record(
      std::move(out), {a, b},
      [a, b, plan](BasicTape<T>& tape, const BasicTensor<T>&,
                   const BasicTensor<T>& g) {
        if (tape.requires_grad(a)) {
          auto& ga = tape.grad_buffer(a);
          for_each_broadcast(plan, [&](int64_t i, int64_t ia, int64_t) { ga[ia] += g[i]; });
        }
        if (tape.requires_grad(b)) {
          auto& gb = tape.grad_buffer(b);
          for_each_broadcast(plan, [&](int64_t i, int64_t, int64_t ib) { gb[ib] -= g[i]; });
        }
      },
      "sub");
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  check_same_tape(a, b, "mul");
  const auto plan = make_plan(a.shape(), b.shape());
  const auto& av = a.value();
  const auto& bv = b.value();
  BasicTensor<T> out(plan.out);
  for_each_broadcast(plan, [&](int64_t i, int64_t ia, int64_t ib) {
    out[i] = av[ia] * bv[ib];
  });
  return a.tape->record(
      std::move(out), {a, b},
      [a, b, plan](BasicTape<T>& tape, const BasicTensor<T>&,
                   const BasicTensor<T>& g) {
        const auto& av = tape.value(a);
        const auto& bv = tape.value(b);
        if (tape.requires_grad(a)) {
          auto& ga = tape.grad_buffer(a);
          for_each_broadcast(plan, [&](int64_t i, int64_t ia, int64_t ib) {
            ga[ia] += g[i] * bv[ib];
          });
        }
        if (tape.requires_grad(b)) {
          auto& gb = tape.grad_buffer(b);
          for_each_broadcast(plan, [&](int64_t i, int64_t ia, int64_t ib) {
            gb[ib] += g[i] * av[ia];
          });
        }
      },
      "mul");
}

template <typename T>
Var<T> scale(Var<T> x, double factor) {
  const T f = static_cast<T>(factor);
  return unary(
      x, "scale", [f](T v) { return v * f; }, [f](T, T) { return f; });
}

template <typename T>
Var<T> add_scalar(Var<T> x, double offset) {
  const T c = static_cast<T>(offset);
  return unary(
      x, "add_scalar", [c](T v) { return v + c; }, [](T, T) { return T{1}; });
}

template <typename T>
Var<T> affine(Var<T> x, Var<T> factor, Var<T> offset) {
  return add(mul(x, factor), offset);
}

template <typename T>
Var<T> relu(Var<T> x) {
  // Subgradient at 0 is 0.
  return unary(
      x, "relu", [](T v) { return v > T{0} ? v : T{0}; },
      [](T v, T) { return v > T{0} ? T{1} : T{0}; });
}

template <typename T>
Var<T> exp(Var<T> x) {
  return unary(
      x, "exp", [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Var<T> log(Var<T> x) {
  return unary(
      x, "log", [](T v) { return std::log(v); }, [](T v, T) { return T{1} / v; });
}

template <typename T>
Var<T> square(Var<T> x) {
  return unary(
      x, "square", [](T v) { return v * v; }, [](T v, T) { return T{2} * v; });
}

template <typename T>
Var<T> sum_all(Var<T> x) {
  const auto& xv = x.value();
  double acc = 0.0;
  for (size_t i = 0; i < xv.size(); ++i) acc += static_cast<double>(xv[i]);
  return x.tape->record(
      BasicTensor<T>::scalar(static_cast<T>(acc)), {x},
      [x](BasicTape<T>& tape, const BasicTensor<T>&, const BasicTensor<T>& g) {
        if (!tape.requires_grad(x)) return;
        auto& gx = tape.grad_buffer(x);
        const T g0 = g[0];
        for (size_t i = 0; i < gx.size(); ++i) gx[i] += g0;
      },
      "sum_all");
}

template <typename T>
Var<T> mean_all(Var<T> x) {
  const auto n = x.value().size();
  if (n == 0) throw ShapeError("mean_all of an empty tensor");
  return scale(sum_all(x), 1.0 / static_cast<double>(n));
}

template <typename T>
Var<T> sum(Var<T> x, int axis) {
  const auto v = axis_view(x.shape(), axis, "sum");
  const auto& xv = x.value();
  BasicTensor<T> out(without_axis(x.shape(), v.axis));
  for (int64_t o = 0; o < v.outer; ++o) {
    for (int64_t i = 0; i < v.inner; ++i) {
      double acc = 0.0;
      for (int64_t k = 0; k < v.n; ++k) {
        acc += static_cast<double>(xv[(o * v.n + k) * v.inner + i]);
      }
      out[o * v.inner + i] = static_cast<T>(acc);
    }
  }
  return x.tape->record(
      std::move(out), {x},
      [x, v](BasicTape<T>& tape, const BasicTensor<T>&, const BasicTensor<T>& g) {
        if (!tape.requires_grad(x)) return;
        auto& gx = tape.grad_buffer(x);
        for (int64_t o = 0; o < v.outer; ++o) {
          for (int64_t k = 0; k < v.n; ++k) {
            for (int64_t i = 0; i < v.inner; ++i) {
              gx[(o * v.n + k) * v.inner + i] += g[o * v.inner + i];
            }
          }
        }
      },
      "sum");
}

template <typename T>
Var<T> logsumexp(Var<T> x, int axis) {
  const auto v = axis_view(x.shape(), axis, "logsumexp");
  if (v.n == 0) throw ShapeError("logsumexp over an empty axis");
  const auto& xv = x.value();
  BasicTensor<T> out(without_axis(x.shape(), v.axis));
  for (int64_t o = 0; o < v.outer; ++o) {
    for (int64_t i = 0; i < v.inner; ++i) {
      T m = -std::numeric_limits<T>::infinity();
      for (int64_t k = 0; k < v.n; ++k) m = std::max(m, xv[(o * v.n + k) * v.inner + i]);
      double acc = 0.0;
      for (int64_t k = 0; k < v.n; ++k) {
        acc += std::exp(static_cast<double>(xv[(o * v.n + k) * v.inner + i]) -
                        static_cast<double>(m));
      }
      out[o * v.inner + i] = static_cast<T>(static_cast<double>(m) + std::log(acc));
    }
  }
  return x.tape->record(
      std::move(out), {x},
      [x, v](BasicTape<T>& tape, const BasicTensor<T>& y, const BasicTensor<T>& g) {
        if (!tape.requires_grad(x)) return;
        const auto& xv = tape.value(x);
        auto& gx = tape.grad_buffer(x);
        for (int64_t o = 0; o < v.outer; ++o) {
          for (int64_t i = 0; i < v.inner; ++i) {
            const T yo = y[o * v.inner + i];
            const T go = g[o * v.inner + i];
            for (int64_t k = 0; k < v.n; ++k) {
              const int64_t idx = (o * v.n + k) * v.inner + i;
              gx[idx] += go * std::exp(xv[idx] - yo);
            }
          }
        }
      },
      "logsumexp");
}

namespace {

template <typename T>
BasicTensor<T> log_softmax_values(const BasicTensor<T>& xv, const AxisView& v) {
  BasicTensor<T> out(xv.shape());
  for (int64_t o = 0; o < v.outer; ++o) {
    for (int64_t i = 0; i < v.inner; ++i) {
      T m = -std::numeric_limits<T>::infinity();
      for (int64_t k = 0; k < v.n; ++k) m = std::max(m, xv[(o * v.n + k) * v.inner + i]);
      double acc = 0.0;
      for (int64_t k = 0; k < v.n; ++k) {
        acc += std::exp(static_cast<double>(xv[(o * v.n + k) * v.inner + i]) -
                        static_cast<double>(m));
      }
      const double lse = static_cast<double>(m) + std::log(acc);
      for (int64_t k = 0; k < v.n; ++k) {
        const int64_t idx = (o * v.n + k) * v.inner + i;
        out[idx] = static_cast<T>(static_cast<double>(xv[idx]) - lse);
      }
    }
  }
  return out;
}

}  // namespace

template <typename T>
Var<T> log_softmax(Var<T> x, int axis) {
  const auto v = axis_view(x.shape(), axis, "log_softmax");
  if (v.n == 0) throw ShapeError("log_softmax over an empty axis");
  return x.tape->record(
      log_softmax_values(x.value(), v), {x},
      [x, v](BasicTape<T>& tape, const BasicTensor<T>& y, const BasicTensor<T>& g) {
        if (!tape.requires_grad(x)) return;
        auto& gx = tape.grad_buffer(x);
        for (int64_t o = 0; o < v.outer; ++o) {
          for (int64_t i = 0; i < v.inner; ++i) {
            double gsum = 0.0;
            for (int64_t k = 0; k < v.n; ++k) gsum += g[(o * v.n + k) * v.inner + i];
            for (int64_t k = 0; k < v.n; ++k) {
              const int64_t idx = (o * v.n + k) * v.inner + i;
              gx[idx] += g[idx] - static_cast<T>(std::exp(static_cast<double>(y[idx])) * gsum);
            }
          }
        }
      },
      "log_softmax");
}

template <typename T>
Var<T> softmax(Var<T> x, int axis) {
  const auto v = axis_view(x.shape(), axis, "softmax");
  if (v.n == 0) throw ShapeError("softmax over an empty axis");
  auto out = log_softmax_values(x.value(), v);
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
  return x.tape->record(
      std::move(out), {x},
      [x, v](BasicTape<T>& tape, const BasicTensor<T>& y, const BasicTensor<T>& g) {
        if (!tape.requires_grad(x)) return;
        auto& gx = tape.grad_buffer(x);
        for (int64_t o = 0; o < v.outer; ++o) {
          for (int64_t i = 0; i < v.inner; ++i) {
            double dot = 0.0;
            for (int64_t k = 0; k < v.n; ++k) {
              const int64_t idx = (o * v.n + k) * v.inner + i;
              dot += static_cast<double>(g[idx]) * static_cast<double>(y[idx]);
            }
            for (int64_t k = 0; k < v.n; ++k) {
              const int64_t idx = (o * v.n + k) * v.inner + i;
              gx[idx] += y[idx] * (g[idx] - static_cast<T>(dot));
            }
          }
        }
      },
      "softmax");
}

template <typename T>
Var<T> reshape(Var<T> x, Shape shape) {
  if (shape_numel(shape) != static_cast<int64_t>(x.value().size())) {
    throw ShapeError("reshape " + shape_to_string(x.shape()) + " to " +
                     shape_to_string(shape));
  }
  return x.tape->record(
      x.value().reshaped(std::move(shape)), {x},
      [x](BasicTape<T>& tape, const BasicTensor<T>&, const BasicTensor<T>& g) {
        if (!tape.requires_grad(x)) return;
        auto& gx = tape.grad_buffer(x);
        for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      },
      "reshape");
}

template <typename T>
Var<T> slice(Var<T> x, int axis, int64_t start, int64_t length) {
  const auto v = axis_view(x.shape(), axis, "slice");
  if (start < 0 || length < 0 || start + length > v.n) {
    throw ShapeError("slice [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") out of range on axis " +
                     std::to_string(v.axis) + " of " + shape_to_string(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[v.axis] = length;
  BasicTensor<T> out(out_shape);
  const auto& xv = x.value();
  for (int64_t o = 0; o < v.outer; ++o) {
    std::copy_n(xv.data().begin() + (o * v.n + start) * v.inner, length * v.inner,
                out.data().begin() + o * length * v.inner);
  }
  return x.tape->record(
      std::move(out), {x},
      [x, v, start, length](BasicTape<T>& tape, const BasicTensor<T>&,
                            const BasicTensor<T>& g) {
        if (!tape.requires_grad(x)) return;
        auto& gx = tape.grad_buffer(x);
        for (int64_t o = 0; o < v.outer; ++o) {
          for (int64_t j = 0; j < length * v.inner; ++j) {
            gx[(o * v.n + start) * v.inner + j] += g[o * length * v.inner + j];
          }
        }
      },
      "slice");
}

template <typename T>
Var<T> concat(std::span<const Var<T>> parts, int axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const Shape& first = parts[0].shape();
  const auto v0 = axis_view(first, axis, "concat");
  int64_t total = 0;
  for (const auto& p : parts) {
    check_same_tape(parts[0], p, "concat");
    const Shape& s = p.shape();
    if (s.size() != first.size()) throw ShapeError("concat: rank mismatch");
    for (size_t i = 0; i < s.size(); ++i) {
      if (i != v0.axis && s[i] != first[i]) {
        throw ShapeError("concat: " + shape_to_string(s) + " vs " +
                         shape_to_string(first));
      }
    }
    total += s[v0.axis];
  }
  Shape out_shape = first;
  out_shape[v0.axis] = total;
  BasicTensor<T> out(out_shape);
  std::vector<Var<T>> inputs(parts.begin(), parts.end());
  std::vector<int64_t> offsets;
  int64_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const int64_t n = p.shape()[v0.axis];
    const auto& pv = p.value();
    for (int64_t o = 0; o < v0.outer; ++o) {
      std::copy_n(pv.data().begin() + o * n * v0.inner, n * v0.inner,
                  out.data().begin() + (o * total + off) * v0.inner);
    }
    off += n;
  }
  // The node needs a gradient iff some part does; that part is passed to
  // record() and the closure routes gradients to every part.
  Var<T> anchor = inputs[0];
  for (const auto& p : inputs) {
    if (p.tape->requires_grad(p)) {
      anchor = p;
      break;
    }
  }
  const int64_t outer = v0.outer;
  const int64_t inner = v0.inner;
  const size_t ax = v0.axis;
  return parts[0].tape->record(
      std::move(out), {anchor},
      [inputs, offsets, outer, inner, total, ax](
          BasicTape<T>& tape, const BasicTensor<T>&, const BasicTensor<T>& g) {
        for (size_t k = 0; k < inputs.size(); ++k) {
          const Var<T>& p = inputs[k];
          if (!tape.requires_grad(p)) continue;
          auto& gp = tape.grad_buffer(p);
          const int64_t n = tape.value(p).shape()[ax];
          for (int64_t o = 0; o < outer; ++o) {
            for (int64_t j = 0; j < n * inner; ++j) {
              gp[o * n * inner + j] += g[(o * total + offsets[k]) * inner + j];
            }
          }
        }
      },
      "concat");
}

template <typename T>
Var<T> diagonal(Var<T> x) {
  const Shape& s = x.shape();
  if (s.size() != 2 || s[0] != s[1]) {
    throw ShapeError("diagonal needs a square matrix, got " + shape_to_string(s));
  }
  const int64_t k = s[0];
  BasicTensor<T> out(Shape{k});
  for (int64_t i = 0; i < k; ++i) out[i] = x.value()[i * k + i];
  return x.tape->record(
      std::move(out), {x},
      [x, k](BasicTape<T>& tape, const BasicTensor<T>&, const BasicTensor<T>& g) {
        if (!tape.requires_grad(x)) return;
        auto& gx = tape.grad_buffer(x);
        for (int64_t i = 0; i < k; ++i) gx[i * k + i] += g[i];
      },
      "diagonal");
}

template <typename T>
Var<T> select_components(Var<T> means, std::span<const int32_t> choice) {
  const Shape& s = means.shape();
  if (s.size() != 4) {
    throw ShapeError("select_components expects [K,C,D,L], got " + shape_to_string(s));
  }
  const int64_t K = s[0], C = s[1], D = s[2], L = s[3];
  if (static_cast<int64_t>(choice.size()) != K * L) {
    throw ShapeError("select_components: choice has " + std::to_string(choice.size()) +
                     " entries, expected " + std::to_string(K * L));
  }
  for (int32_t c : choice) {
    if (c < 0 || c >= C) throw ShapeError("select_components: component out of range");
  }
  std::vector<int32_t> idx(choice.begin(), choice.end());
  BasicTensor<T> out(Shape{K, D, L});
  const auto& mv = means.value();
  for (int64_t k = 0; k < K; ++k) {
    for (int64_t d = 0; d < D; ++d) {
      for (int64_t l = 0; l < L; ++l) {
        out[(k * D + d) * L + l] = mv[((k * C + idx[k * L + l]) * D + d) * L + l];
      }
    }
  }
  return means.tape->record(
      std::move(out), {means},
      [means, idx, K, C, D, L](BasicTape<T>& tape, const BasicTensor<T>&,
                               const BasicTensor<T>& g) {
        if (!tape.requires_grad(means)) return;
        auto& gm = tape.grad_buffer(means);
        for (int64_t k = 0; k < K; ++k) {
          for (int64_t d = 0; d < D; ++d) {
            for (int64_t l = 0; l < L; ++l) {
              gm[((k * C + idx[k * L + l]) * D + d) * L + l] += g[(k * D + d) * L + l];
            }
          }
        }
      },
      "select_components");
}

template <typename T>
Var<T> conv2d(Var<T> input, Var<T> kernel,
              std::type_identity_t<std::optional<Var<T>>> bias,
              int64_t stride, Padding padding) {
  check_same_tape(input, kernel, "conv2d");
  const Shape& xs = input.shape();
  const Shape& ks = kernel.shape();
  if (xs.size() != 4 || ks.size() != 4) {
    throw ShapeError("conv2d expects input [N,C,H,W] and kernel [O,C,kh,kw], got " +
                     shape_to_string(xs) + " and " + shape_to_string(ks));
  }
  if (xs[1] != ks[1]) {
    throw ShapeError("conv2d channel mismatch: input " + shape_to_string(xs) +
                     ", kernel " + shape_to_string(ks));
  }
  if (stride < 1) throw ShapeError("conv2d stride must be >= 1");
  if (bias) {
    check_same_tape(input, *bias, "conv2d");
    if (bias->shape() != Shape{ks[0]}) {
      throw ShapeError("conv2d bias shape " + shape_to_string(bias->shape()) +
                       " does not match " + std::to_string(ks[0]) + " outputs");
    }
  }
  kernels::Conv2dGeometry g;
  g.batch = xs[0];
  g.in_channels = xs[1];
  g.in_h = xs[2];
  g.in_w = xs[3];
  g.out_channels = ks[0];
  g.kernel_h = ks[2];
  g.kernel_w = ks[3];
  g.stride = stride;
  if (padding == Padding::same) {
    g.out_h = (g.in_h + stride - 1) / stride;
    g.out_w = (g.in_w + stride - 1) / stride;
    const int64_t pad_h = std::max<int64_t>(0, (g.out_h - 1) * stride + g.kernel_h - g.in_h);
    const int64_t pad_w = std::max<int64_t>(0, (g.out_w - 1) * stride + g.kernel_w - g.in_w);
    if (g.kernel_h > g.in_h + pad_h || g.kernel_w > g.in_w + pad_w) {
      throw ShapeError("conv2d kernel larger than padded input");
    }
    g.pad_top = pad_h / 2;
    g.pad_left = pad_w / 2;
  } else {
    if (g.kernel_h > g.in_h || g.kernel_w > g.in_w) {
      throw ShapeError("conv2d kernel " + shape_to_string(ks) +
                       " larger than input " + shape_to_string(xs));
    }
    g.out_h = (g.in_h - g.kernel_h) / stride + 1;
    g.out_w = (g.in_w - g.kernel_w) / stride + 1;
  }
  BasicTensor<T> out(Shape{g.batch, g.out_channels, g.out_h, g.out_w});
  std::span<const T> bias_span;
  if (bias) bias_span = bias->value().data();
  kernels::conv2d_forward<T>(g, input.value().data(), kernel.value().data(), bias_span,
                             out.data());
  const Var<T> bias_var = bias ? *bias : kernel;
  const bool has_bias = bias.has_value();
  return input.tape->record(
      std::move(out), {input, kernel, bias_var},
      [input, kernel, bias_var, has_bias, g](BasicTape<T>& tape, const BasicTensor<T>&,
                                             const BasicTensor<T>& grad) {
        if (tape.requires_grad(input)) {
          kernels::conv2d_backward_input<T>(g, tape.value(kernel).data(), grad.data(),
                                            tape.grad_buffer(input).data());
        }
        const bool want_kernel = tape.requires_grad(kernel);
        const bool want_bias = has_bias && tape.requires_grad(bias_var);
        if (!want_kernel && !want_bias) return;
        // Kernel gradient is always computed alongside the bias; discard if unneeded.
        BasicTensor<T> scratch_kernel;
        std::span<T> gk;
        if (want_kernel) {
          gk = tape.grad_buffer(kernel).data();
        } else {
          scratch_kernel = BasicTensor<T>(tape.value(kernel).shape());
          gk = scratch_kernel.data();
        }
        std::span<T> gb;
        if (want_bias) gb = tape.grad_buffer(bias_var).data();
        kernels::conv2d_backward_kernel<T>(g, tape.value(input).data(), grad.data(), gk, gb);
      },
      "conv2d");
}

#define PIM_INSTANTIATE_OPS(T)                                                 \
  template Var<T> add<T>(Var<T>, Var<T>);                                     \
  template Var<T> sub<T>(Var<T>, Var<T>);                                     \
  template Var<T> mul<T>(Var<T>, Var<T>);                                     \
  template Var<T> scale<T>(Var<T>, double);                                   \
  template Var<T> add_scalar<T>(Var<T>, double);                              \
  template Var<T> affine<T>(Var<T>, Var<T>, Var<T>);                          \
  template Var<T> relu<T>(Var<T>);                                            \
  template Var<T> exp<T>(Var<T>);                                             \
  template Var<T> log<T>(Var<T>);                                             \
  template Var<T> square<T>(Var<T>);                                          \
  template Var<T> sum_all<T>(Var<T>);                                         \
  template Var<T> mean_all<T>(Var<T>);                                        \
  template Var<T> sum<T>(Var<T>, int);                                        \
  template Var<T> logsumexp<T>(Var<T>, int);                                  \
  template Var<T> softmax<T>(Var<T>, int);                                    \
  template Var<T> log_softmax<T>(Var<T>, int);                                \
  template Var<T> reshape<T>(Var<T>, Shape);                                  \
  template Var<T> slice<T>(Var<T>, int, int64_t, int64_t);                    \
  template Var<T> concat<T>(std::span<const Var<T>>, int);                    \
  template Var<T> diagonal<T>(Var<T>);                                        \
  template Var<T> select_components<T>(Var<T>, std::span<const int32_t>);     \
  template Var<T> conv2d<T>(Var<T>, Var<T>, std::optional<Var<T>>, int64_t,   \
                            Padding);

PIM_INSTANTIATE_OPS(float)
PIM_INSTANTIATE_OPS(double)

#undef PIM_INSTANTIATE_OPS

}  // namespace pim
