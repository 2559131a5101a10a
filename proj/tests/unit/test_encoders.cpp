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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "pim/encoders.hpp"
#include "pim/numerics/random.hpp"
#include "support/oracles.hpp"

using namespace pim;
using pim::testing::conv2d_oracle;
using pim::testing::dense_oracle;

namespace {

Architecture small_arch(PyramidKind kind = PyramidKind::steerable) {
  Architecture a;
  a.pyramid = kind;
  a.cnn_depth = 2;
  a.cnn_width = 4;
  return a;
}

Tensor random_images(int64_t n, int64_t size, uint64_t seed) {
  Rng rng(seed);
  return uniform_tensor<float>(Shape{n, 3, size, size}, rng, 0.0, 1.0);
}

Tensor crop(const Tensor& x, int64_t y0, int64_t x0, int64_t size) {
  Tensor out(Shape{x.dim(0), x.dim(1), size, size});
  for (int64_t n = 0; n < x.dim(0); ++n)
    for (int64_t c = 0; c < x.dim(1); ++c)
      for (int64_t y = 0; y < size; ++y)
        for (int64_t xx = 0; xx < size; ++xx) out.at({n, c, y, xx}) = x.at({n, c, y + y0, xx + x0});
  return out;
}

std::vector<double> to_vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

// Channel vector of a [N, C, H, W] tensor at one location.
std::vector<double> at_location(const Tensor& t, int64_t n, int64_t y, int64_t x) {
  std::vector<double> v;
  for (int64_t c = 0; c < t.dim(1); ++c) v.push_back(t.at({n, c, y, x}));
  return v;
}

}  // namespace

TEST_CASE("architecture validation and layout") {
  Architecture a;
  CHECK_NOTHROW(a.validate());
  a.cnn_depth = 0;
  CHECK_THROWS_AS(a.validate(), Error);
  a = Architecture{};
  a.latent_dim = 0;
  CHECK_THROWS_AS(init_parameters(1, a), Error);

  for (int depth : {2, 3, 4}) {
    Architecture d;
    d.cnn_depth = depth;
    const auto layout = parameter_layout(d);
    // conv weight+bias per layer per scale, 3 dense layers per marginal head,
    // 4 weight/bias pairs per full head.
    CHECK(layout.size() == static_cast<size_t>(kNumScales * (2 * depth + 6 + 8)));
    CHECK(layout.front().name == "frontend.s0.conv0.weight");
  }
}

TEST_CASE("parameter count of the default architecture matches a hand count") {
  const ModelParameters p = init_parameters(3, Architecture{});
  int64_t frontend = 0;
  for (int64_t in : {3, 6, 6, 6, 3}) {
    frontend += in * 25 * 64 + 64;           // conv0
    frontend += 2 * (64 * 25 * 64 + 64);     // conv1, conv2
    frontend += 64 * 25 * 3 + 3;             // conv3
  }
  const int64_t marginal = 5 * ((3 * 50 + 50) + (50 * 50 + 50) + (50 * 55 + 55));
  const int64_t full = 5 * ((3 * 10 + 10) + (10 * 10 + 10) + (3 * 20 + 20) + (10 * 10 + 10));
  CHECK(p.scalar_count() == frontend + marginal + full);
  CHECK(p.scalar_count() == 1116850);
}

TEST_CASE("init_parameters is deterministic and seed dependent") {
  const auto a = init_parameters(42, small_arch());
  const auto b = init_parameters(42, small_arch());
  const auto c = init_parameters(43, small_arch());
  CHECK(a == b);
  CHECK_FALSE(a == c);
  for (float v : a.at("marginal.s1.fc0.bias").data()) CHECK(v == 0.0f);
  const Tensor& ab = a.at("full.s0.affine.bias");
  for (int i = 0; i < 10; ++i) CHECK(ab[i] == 1.0f);
  for (int i = 10; i < 20; ++i) CHECK(ab[i] == 0.0f);
  // Fan-in scaled: conv0 of scale 1 has fan-in 6 * 25.
  const double bound = std::sqrt(6.0 / 150.0);
  for (float v : a.at("frontend.s1.conv0.weight").data()) CHECK(std::abs(v) <= bound);
  CHECK_THROWS_AS(a.at("frontend.s9.conv0.weight"), Error);
}

TEST_CASE("frontend output layout") {
  for (PyramidKind kind : {PyramidKind::steerable, PyramidKind::laplacian}) {
    const auto params = init_parameters(1, small_arch(kind));
    Tape tape;
    const BoundParameters<float> bound(tape, params, false);
    const auto f = frontend(bound, decompose(random_images(2, 64, 5), kind));
    const auto factors = level_factors(kind);
    for (int s = 0; s < kNumScales; ++s) {
      CHECK(f[s].shape() == Shape{2, 3, 64 / factors[s], 64 / factors[s]});
    }
  }
  const auto params = init_parameters(1, small_arch(PyramidKind::laplacian));
  Tape tape;
  const BoundParameters<float> bound(tape, params, false);
  CHECK_THROWS_AS(frontend(bound, steerable_decompose(random_images(1, 64, 5))), Error);
}

TEST_CASE("frontend with zero weights outputs zeros") {
  auto params = init_parameters(1, small_arch());
  for (Tensor& t : params.tensors()) t.fill(0.0f);
  Tape tape;
  const BoundParameters<float> bound(tape, params, false);
  const auto f = frontend(bound, steerable_decompose(random_images(1, 64, 6)));
  for (const auto& v : f)
    for (float x : v.value().data()) CHECK(x == 0.0f);
}

TEST_CASE("frontend matches a conv/relu oracle at the coarsest scale") {
  const auto params = init_parameters(9, small_arch());
  const Tensor img = random_images(1, 64, 7);
  const auto pyr = steerable_decompose(img);
  Tape tape;
  const BoundParameters<float> bound(tape, params, false);
  const auto f = frontend(bound, pyr);

  auto bias = [&](const char* name) { return to_vec(params.at(name)); };
  const Tensor& band = pyr.levels[4].subbands;  // [1, 3, 8, 8]
  TensorD h = conv2d_oracle(band, params.at("frontend.s4.conv0.weight"),
                            bias("frontend.s4.conv0.bias"), 1, 2, 2, 8, 8);
  for (size_t i = 0; i < h.size(); ++i) h[i] = std::max(0.0, h[i]);
  const TensorD out = conv2d_oracle(h, params.at("frontend.s4.conv1.weight").cast<double>(),
                                    bias("frontend.s4.conv1.bias"), 1, 2, 2, 8, 8);
  double err = 0.0;
  for (size_t i = 0; i < out.size(); ++i) {
    err = std::max(err, std::abs(out[i] - f[4].value()[i]));
  }
  CHECK(err < 1e-5);
}

TEST_CASE("frontend_center equals cropping the full frontend") {
  for (PyramidKind kind : {PyramidKind::steerable, PyramidKind::laplacian}) {
    Architecture a = small_arch(kind);
    a.cnn_depth = 3;
    const auto params = init_parameters(4, a);
    const auto pyr = decompose(random_images(2, 64, 8), kind);
    Tape tape;
    const BoundParameters<float> bound(tape, params, false);
    const auto full = frontend(bound, pyr);
    const auto cropped = frontend_center(bound, pyr, 8);
    for (int s = 0; s < kNumScales; ++s) {
      const Tensor& big = full[s].value();
      const int64_t top = center_offset(big.dim(2), 8), left = center_offset(big.dim(3), 8);
      const Tensor want = crop(big, top, left, 8);
      REQUIRE(cropped[s].shape() == want.shape());
      CHECK(max_abs_diff(cropped[s].value(), want) < 1e-5);
    }
  }
  CHECK(center_offset(64, 8) == 28);
  CHECK(center_offset(8, 8) == 0);
  CHECK_THROWS_AS(center_offset(4, 8), ShapeError);
}

TEST_CASE("marginal encoder emits a simplex and matches an MLP oracle") {
  const auto params = init_parameters(11, small_arch());
  Tape tape;
  const BoundParameters<float> bound(tape, params, false);
  const auto f = frontend(bound, steerable_decompose(random_images(2, 64, 12)));
  const auto m = marginal_encode(bound, f);
  for (int s = 0; s < kNumScales; ++s) {
    const Tensor& w = m[s].weights.value();
    CHECK(w.dim(1) == 5);
    CHECK(m[s].means.shape() == Shape{2, 5, 10, w.dim(2), w.dim(3)});
    for (int64_t n = 0; n < 2; ++n)
      for (int64_t y = 0; y < w.dim(2); ++y)
        for (int64_t x = 0; x < w.dim(3); ++x) {
          double total = 0.0;
          for (int64_t c = 0; c < 5; ++c) {
            CHECK(w.at({n, c, y, x}) >= 0.0f);
            total += w.at({n, c, y, x});
          }
          CHECK(std::abs(total - 1.0) < 1e-5);
        }
  }

  // One location of scale 2 against a direct 3-layer MLP.
  const int64_t n = 1, y = 5, x = 3;
  const auto feat = at_location(f[2].value(), n, y, x);
  auto layer = [&](const std::vector<double>& in, const char* w, const char* b, bool relu) {
    return dense_oracle(in, to_vec(params.at(w)), to_vec(params.at(b)), relu);
  };
  auto h = layer(feat, "marginal.s2.fc0.weight", "marginal.s2.fc0.bias", true);
  h = layer(h, "marginal.s2.fc1.weight", "marginal.s2.fc1.bias", true);
  const auto o = layer(h, "marginal.s2.fc2.weight", "marginal.s2.fc2.bias", false);
  REQUIRE(o.size() == 55);
  double zmax = o[0];
  for (int c = 1; c < 5; ++c) zmax = std::max(zmax, o[c]);
  double zsum = 0.0;
  for (int c = 0; c < 5; ++c) zsum += std::exp(o[c] - zmax);
  double err = 0.0;
  for (int64_t c = 0; c < 5; ++c) {
    const double w = std::exp(o[c] - zmax) / zsum;
    err = std::max(err, std::abs(w - m[2].weights.value().at({n, c, y, x})));
    err = std::max(err, std::abs(std::log(w) - m[2].log_weights.value().at({n, c, y, x})));
    for (int64_t d = 0; d < 10; ++d) {
      err = std::max(err, std::abs(o[5 + c * 10 + d] - m[2].means.value().at({n, c, d, y, x})));
    }
  }
  CHECK(err < 1e-5);
}

TEST_CASE("marginal encoder with zero output layer is uniform with zero means") {
  auto params = init_parameters(13, small_arch());
  for (int s = 0; s < kNumScales; ++s) {
    params.at("marginal.s" + std::to_string(s) + ".fc2.weight").fill(0.0f);
    params.at("marginal.s" + std::to_string(s) + ".fc2.bias").fill(0.0f);
  }
  Tape tape;
  const BoundParameters<float> bound(tape, params, false);
  const auto m = marginal_encode(bound, frontend(bound, steerable_decompose(random_images(1, 64, 1))));
  for (const auto& scale : m) {
    for (float w : scale.weights.value().data()) CHECK(w == doctest::Approx(0.2).epsilon(1e-6));
    for (float mu : scale.means.value().data()) CHECK(mu == 0.0f);
  }
}

TEST_CASE("full encoder: shape, affine identity and MLP oracle") {
  auto params = init_parameters(21, small_arch());
  const Tensor x = random_images(1, 64, 22);
  const Tensor y1 = random_images(1, 64, 23);
  const Tensor y2 = random_images(1, 64, 24);

  SUBCASE("identity modulation ignores y") {
    for (int s = 0; s < kNumScales; ++s) {
      params.at("full.s" + std::to_string(s) + ".affine.weight").fill(0.0f);
    }
    Tape tape;
    const BoundParameters<float> bound(tape, params, false);
    const auto fx = frontend(bound, steerable_decompose(x));
    const auto a = full_encode(bound, fx, frontend(bound, steerable_decompose(y1)));
    const auto b = full_encode(bound, fx, frontend(bound, steerable_decompose(y2)));
    for (int s = 0; s < kNumScales; ++s) {
      CHECK(a[s].shape() == Shape{1, 10, fx[s].dim(2), fx[s].dim(3)});
      CHECK(a[s].value() == b[s].value());
    }
  }

  SUBCASE("one location matches a hand-composed oracle") {
    Rng rng(5);
    // Move the modulation away from identity so it matters.
    params.at("full.s1.affine.weight") = normal_tensor<float>(Shape{20, 3}, rng, 0.5);
    params.at("full.s1.affine.bias") = normal_tensor<float>(Shape{20}, rng, 0.5);
    Tape tape;
    const BoundParameters<float> bound(tape, params, false);
    const auto fx = frontend(bound, steerable_decompose(x));
    const auto fy = frontend(bound, steerable_decompose(y1));
    const auto mean = full_encode(bound, fx, fy);

    const int64_t yy = 10, xx = 40;
    auto layer = [&](const std::vector<double>& in, const std::string& name, bool relu) {
      return dense_oracle(in, to_vec(params.at(name + ".weight")),
                          to_vec(params.at(name + ".bias")), relu);
    };
    auto h = layer(at_location(fx[1].value(), 0, yy, xx), "full.s1.fc0", true);
    h = layer(h, "full.s1.fc1", true);
    const auto mod = layer(at_location(fy[1].value(), 0, yy, xx), "full.s1.affine", false);
    for (size_t i = 0; i < 10; ++i) h[i] = h[i] * mod[i] + mod[10 + i];
    const auto want = layer(h, "full.s1.fc2", false);
    const auto got = at_location(mean[1].value(), 0, yy, xx);
    double err = 0.0;
    for (size_t i = 0; i < 10; ++i) err = std::max(err, std::abs(want[i] - got[i]));
    CHECK(err < 1e-5);
  }
}

TEST_CASE("encoders are translation equivariant in the interior") {
  Architecture a = small_arch();
  const auto params = init_parameters(31, a);
  const Tensor big = random_images(1, 136, 32);
  const Tensor img_a = crop(big, 0, 0, 128);
  const Tensor img_b = crop(big, 8, 8, 128);  // img_b(p) = img_a(p + 8)
  Tape tape;
  const BoundParameters<float> bound(tape, params, false);
  const auto fa = frontend(bound, steerable_decompose(img_a));
  const auto fb = frontend(bound, steerable_decompose(img_b));
  const auto ma = marginal_encode(bound, fa);
  const auto mb = marginal_encode(bound, fb);
  const auto factors = level_factors(a.pyramid);
  double err = 0.0;
  int compared = 0;
  for (int s = 0; s < kNumScales; ++s) {
    const int64_t f = factors[s], shift = 8 / f, extent = 128 / f;
    const int64_t border = (40 + f - 1) / f + 1;
    const Tensor& ta = ma[s].means.value();
    const Tensor& tb = mb[s].means.value();
    for (int64_t c = 0; c < 5; ++c)
      for (int64_t d = 0; d < 10; ++d)
        for (int64_t y = border; y + shift < extent - border; ++y)
          for (int64_t x = border; x + shift < extent - border; ++x) {
            err = std::max(err, static_cast<double>(std::abs(
                                    tb.at({0, c, d, y, x}) - ta.at({0, c, d, y + shift, x + shift}))));
            ++compared;
          }
  }
  CHECK(compared > 0);
  CHECK(err < 1e-4);
}

TEST_CASE("marginal heads are shared between images and independent across scales") {
  const auto params = init_parameters(41, small_arch());
  const Tensor x = random_images(1, 64, 42), y = random_images(1, 64, 43);
  Tape tape;
  const BoundParameters<float> bound(tape, params, true);
  const auto fx = frontend(bound, steerable_decompose(x));
  const auto fy = frontend(bound, steerable_decompose(y));
  const auto qx = marginal_encode(bound, fx), qy = marginal_encode(bound, fy);
  const auto qy_swapped = marginal_encode(bound, fy), qx_swapped = marginal_encode(bound, fx);
  for (int s = 0; s < kNumScales; ++s) {
    CHECK(qx[s].means.value() == qx_swapped[s].means.value());
    CHECK(qy[s].log_weights.value() == qy_swapped[s].log_weights.value());
  }
  // Exactly one marginal parameter set per scale, referenced by both encodings.
  int marginal_tensors = 0;
  for (const auto& name : params.names()) marginal_tensors += name.rfind("marginal.", 0) == 0;
  CHECK(marginal_tensors == kNumScales * 6);

  auto perturbed = params;
  for (float& v : perturbed.at("marginal.s2.fc1.weight").data()) v += 0.05f;
  Tape tape2;
  const BoundParameters<float> bound2(tape2, perturbed, false);
  const auto qx2 = marginal_encode(bound2, frontend(bound2, steerable_decompose(x)));
  for (int s = 0; s < kNumScales; ++s) {
    const bool same = qx2[s].means.value() == qx[s].means.value();
    CHECK(same == (s != 2));
  }
}

TEST_CASE("encode_images matches the tape path") {
  const auto params = init_parameters(51, small_arch());
  const Tensor img = random_images(2, 64, 52);
  const MixtureValues v = encode_images(params, img);
  Tape tape;
  const BoundParameters<float> bound(tape, params, false);
  const auto m = marginal_encode(bound, frontend(bound, steerable_decompose(img)));
  for (int s = 0; s < kNumScales; ++s) {
    CHECK(v.means[s] == m[s].means.value());
    CHECK(v.log_weights[s] == m[s].log_weights.value());
  }
}

TEST_CASE("checkpoint round trip and corruption handling") {
  const auto dir = std::filesystem::temp_directory_path() / "pim_test_encoders";
  std::filesystem::create_directories(dir);
  const auto path = dir / "model.pimk";
  Architecture a = small_arch(PyramidKind::laplacian);
  a.cnn_depth = 3;
  const auto params = init_parameters(61, a);
  save_checkpoint(path, params, 1234);
  const Checkpoint ck = load_checkpoint(path);
  CHECK(ck.step == 1234);
  CHECK(ck.params == params);
  CHECK(ck.params.architecture() == a);

  std::ifstream in(path, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), {});
  in.close();
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "PIMK");
  auto write = [&](const std::vector<char>& b) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
  };

  SUBCASE("truncated") {
    write(std::vector<char>(bytes.begin(), bytes.begin() + static_cast<long>(bytes.size() / 2)));
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  }
  SUBCASE("bad magic") {
    auto b = bytes;
    b[0] = 'X';
    write(b);
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  }
  SUBCASE("architecture inconsistent with tensors") {
    auto b = bytes;
    b[12] = 4;  // cnn_depth field
    write(b);
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  }
  SUBCASE("trailing garbage") {
    auto b = bytes;
    b.push_back('!');
    write(b);
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint(dir / "absent.pimk"), CheckpointError);
  }
  std::filesystem::remove_all(dir);
}
