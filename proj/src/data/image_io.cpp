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

#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "pim/data.hpp"

namespace pim {
namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string header_token(const std::vector<unsigned char>& bytes, size_t& pos) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string token;
  while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') {
    token.push_back(static_cast<char>(bytes[pos++]));
  }
  return token;
}

int64_t header_int(const std::vector<unsigned char>& bytes, size_t& pos,
                   const std::filesystem::path& path, const char* what) {
  const std::string tok = header_token(bytes, pos);
  if (tok.empty() || tok.size() > 9 ||
      tok.find_first_not_of("0123456789") != std::string::npos) {
    throw Error("malformed PPM header in '" + path.string() + "': bad " + what + " '" + tok +
                "'");
  }
  return std::stoll(tok);
}

}  // namespace

Tensor read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open image '" + path.string() + "'");
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
  size_t pos = 0;
  if (header_token(bytes, pos) != "P6") {
    throw Error("'" + path.string() + "' is not a binary PPM (P6) file");
  }
  const int64_t w = header_int(bytes, pos, path, "width");
  const int64_t h = header_int(bytes, pos, path, "height");
  const int64_t maxval = header_int(bytes, pos, path, "maxval");
  if (w <= 0 || h <= 0) throw Error("PPM '" + path.string() + "' has empty extents");
  if (maxval != 255) {
    throw Error("PPM '" + path.string() + "' has maxval " + std::to_string(maxval) +
                "; only 8-bit (255) is supported");
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw Error("malformed PPM header in '" + path.string() + "'");
  }
  ++pos;  // single whitespace before the raster
  const size_t need = static_cast<size_t>(w * h * 3);
  if (bytes.size() - pos < need) {
    throw Error("PPM '" + path.string() + "' is truncated: expected " + std::to_string(need) +
                " payload bytes, found " + std::to_string(bytes.size() - pos));
  }
  Tensor img(Shape{3, h, w});
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t c = 0; c < 3; ++c) {
        img[static_cast<size_t>((c * h + y) * w + x)] =
            static_cast<float>(bytes[pos + static_cast<size_t>((y * w + x) * 3 + c)]) / 255.0f;
      }
  return img;
}

void write_ppm(const Tensor& image, const std::filesystem::path& path) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("write_ppm expects [3, H, W], got " + shape_to_string(image.shape()));
  }
  const int64_t h = image.dim(1), w = image.dim(2);
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  const size_t header = out.size();
  out.resize(header + static_cast<size_t>(w * h * 3));
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t c = 0; c < 3; ++c) {
        const float v = image[static_cast<size_t>((c * h + y) * w + x)];
        const float clamped = std::isnan(v) ? 0.0f : std::clamp(v, 0.0f, 1.0f);
        out[header + static_cast<size_t>((y * w + x) * 3 + c)] =
            static_cast<char>(static_cast<unsigned char>(std::lround(clamped * 255.0f)));
      }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error("cannot open '" + path.string() + "' for writing");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw Error("failed writing '" + path.string() + "'");
}

Tensor box_resample(const Tensor& image, int64_t out_h, int64_t out_w) {
  if (image.rank() != 3) {
    throw ShapeError("box_resample expects [C, H, W], got " + shape_to_string(image.shape()));
  }
  if (out_h <= 0 || out_w <= 0) throw Error("box_resample: output extents must be positive");
  const int64_t C = image.dim(0), H = image.dim(1), W = image.dim(2);

  // Overlap weights of output cell i = [i*s, (i+1)*s) with input cells, normalized.
  struct Tap {
    int64_t index;
    double weight;
  };
  auto taps_for = [](int64_t in, int64_t out) {
    std::vector<std::vector<Tap>> taps(static_cast<size_t>(out));
    const double s = static_cast<double>(in) / static_cast<double>(out);
    for (int64_t i = 0; i < out; ++i) {
      const double a = i * s, b = (i + 1) * s;
      for (auto j = static_cast<int64_t>(std::floor(a)); j < std::min<int64_t>(in, static_cast<int64_t>(std::ceil(b))); ++j) {
        const double overlap = std::min(b, j + 1.0) - std::max(a, static_cast<double>(j));
        if (overlap > 0) taps[static_cast<size_t>(i)].push_back({j, overlap / s});
      }
    }
    return taps;
  };
  const auto ty = taps_for(H, out_h), tx = taps_for(W, out_w);

  Tensor rows(Shape{C, H, out_w});
  for (int64_t c = 0; c < C; ++c)
    for (int64_t y = 0; y < H; ++y)
      for (int64_t x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (const Tap& t : tx[static_cast<size_t>(x)])
          acc += t.weight * image[static_cast<size_t>((c * H + y) * W + t.index)];
        rows[static_cast<size_t>((c * H + y) * out_w + x)] = static_cast<float>(acc);
      }
  Tensor out(Shape{C, out_h, out_w});
  for (int64_t c = 0; c < C; ++c)
    for (int64_t y = 0; y < out_h; ++y)
      for (int64_t x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (const Tap& t : ty[static_cast<size_t>(y)])
          acc += t.weight * rows[static_cast<size_t>((c * H + t.index) * out_w + x)];
        out[static_cast<size_t>((c * out_h + y) * out_w + x)] = static_cast<float>(acc);
      }
  return out;
}

}  // namespace pim
