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

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "pim/encoders.hpp"

namespace pim {
namespace {

constexpr std::array<char, 4> kMagic = {'P', 'I', 'M', 'K'};
constexpr uint32_t kMaxRank = 8;
constexpr uint32_t kMaxNameLength = 4096;

class Writer {
 public:
  void bytes(const void* p, size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u32(uint32_t v) { le(v); }
  void u64(uint64_t v) { le(v); }
  void f32(float v) { le(std::bit_cast<uint32_t>(v)); }
  const std::vector<char>& buffer() const { return buf_; }

 private:
  template <typename U>
  void le(U v) {
    for (size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> data) : data_(std::move(data)) {}
  void bytes(void* p, size_t n) {
    need(n);
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  uint32_t u32() { return le<uint32_t>(); }
  uint64_t u64() { return le<uint64_t>(); }
  float f32() { return std::bit_cast<float>(le<uint32_t>()); }
  bool at_end() const { return pos_ == data_.size(); }
  size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(size_t n) const {
    if (data_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
  }
  template <typename U>
  U le() {
    need(sizeof(U));
    U v = 0;
    for (size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }
  std::vector<char> data_;
  size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParameters& params,
                     uint64_t step) {
  const Architecture& a = params.architecture();
  Writer w;
  w.bytes(kMagic.data(), kMagic.size());
  w.u32(kCheckpointVersion);
  for (int field : {static_cast<int>(a.pyramid), a.cnn_depth, a.cnn_width, a.feature_channels,
                    a.components, a.latent_dim, a.marginal_width, a.full_width}) {
    w.u32(static_cast<uint32_t>(field));
  }
  w.u64(step);
  w.u32(static_cast<uint32_t>(params.size()));
  for (size_t i = 0; i < params.size(); ++i) {
    const std::string& name = params.name(i);
    const Tensor& t = params.tensors()[i];
    w.u32(static_cast<uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u32(static_cast<uint32_t>(t.rank()));
    for (int64_t e : t.shape()) w.u32(static_cast<uint32_t>(e));
    for (float v : t.data()) w.f32(v);
  }
  // Write-then-rename so readers never observe a partial file.
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    if (!out) throw Error("failed writing checkpoint '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}));
  try {
    std::array<char, 4> magic{};
    r.bytes(magic.data(), magic.size());
    if (magic != kMagic) throw CheckpointError("not a checkpoint (bad magic)");
    const uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
      throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    Architecture a;
    const uint32_t kind = r.u32();
    if (kind > 1) throw CheckpointError("unknown pyramid kind " + std::to_string(kind));
    a.pyramid = static_cast<PyramidKind>(kind);
    for (int* field : {&a.cnn_depth, &a.cnn_width, &a.feature_channels, &a.components,
                       &a.latent_dim, &a.marginal_width, &a.full_width}) {
      *field = static_cast<int>(r.u32());
    }
    const uint64_t step = r.u64();
    const uint32_t count = r.u32();
    std::vector<std::string> names;
    std::vector<Tensor> tensors;
    for (uint32_t i = 0; i < count; ++i) {
      const uint32_t len = r.u32();
      if (len > kMaxNameLength) throw CheckpointError("implausible tensor name length");
      std::string name(len, '\0');
      r.bytes(name.data(), len);
      const uint32_t rank = r.u32();
      if (rank > kMaxRank) throw CheckpointError("implausible rank for '" + name + "'");
      Shape shape(rank);
      uint64_t numel = 1;
      for (auto& e : shape) {
        e = r.u32();
        numel *= static_cast<uint64_t>(e);
        if (numel * sizeof(float) > r.remaining()) {
          throw CheckpointError("tensor '" + name + "' extends past end of file");
        }
      }
      Tensor t(shape);
      for (float& v : t.data()) v = r.f32();
      names.push_back(std::move(name));
      tensors.push_back(std::move(t));
    }
    if (!r.at_end()) throw CheckpointError("trailing bytes after last tensor");
    return {ModelParameters(a, std::move(names), std::move(tensors)), step};
  } catch (const Error& e) {
    throw CheckpointError("corrupt checkpoint '" + path.string() + "': " + e.what());
  }
}

}  // namespace pim
