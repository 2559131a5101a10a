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

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pim/data.hpp"

namespace pim {
namespace {

namespace fs = std::filesystem;

[[noreturn]] void fail(const fs::path& manifest, int line, const std::string& msg) {
  throw Error(manifest.string() + ":" + std::to_string(line) + ": " + msg);
}

Tensor load_image(const fs::path& manifest, int line, const std::string& rel) {
  try {
    return read_ppm(manifest.parent_path() / rel);
  } catch (const Error& e) {
    fail(manifest, line, e.what());
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(RecordKind kind) { return kind == RecordKind::triplet ? "triplet" : "pair"; }

RecordKind parse_record_kind(const std::string& name) {
  if (name == "triplet") return RecordKind::triplet;
  if (name == "pair") return RecordKind::pair;
  throw Error("unknown record kind '" + name + "' (expected triplet or pair)");
}

std::vector<EvalRecord> load_eval_records(const fs::path& manifest, RecordKind kind) {
  std::ifstream in(manifest);
  if (!in) throw Error("cannot open manifest '" + manifest.string() + "'");
  std::vector<EvalRecord> records;
  std::string text;
  int line = 0;
  while (std::getline(in, text)) {
    ++line;
    const auto first = text.find_first_not_of(" \t\r");
    if (first == std::string::npos || text[first] == '#') continue;
    std::istringstream fields(text);
    std::vector<std::string> tok;
    for (std::string t; fields >> t;) tok.push_back(t);

    EvalRecord r;
    r.kind = kind;
    r.line = line;
    if (kind == RecordKind::triplet) {
      if (tok.size() != 4) fail(manifest, line, "expected 'ref img0 img1 h', got " + std::to_string(tok.size()) + " fields");
      double h = 0.0;
      const auto [end, ec] = std::from_chars(tok[3].data(), tok[3].data() + tok[3].size(), h);
      if (ec != std::errc() || end != tok[3].data() + tok[3].size() || !std::isfinite(h)) {
        fail(manifest, line, "h '" + tok[3] + "' is not a number");
      }
      if (h < 0.0 || h > 1.0) fail(manifest, line, "h = " + tok[3] + " outside [0, 1]");
      r.h = h;
      r.ref = load_image(manifest, line, tok[0]);
      r.img0 = load_image(manifest, line, tok[1]);
      r.img1 = load_image(manifest, line, tok[2]);
      if (r.ref.shape() != r.img0.shape() || r.ref.shape() != r.img1.shape()) {
        fail(manifest, line, "image extents differ within the record");
      }
    } else {
      if (tok.size() != 3) fail(manifest, line, "expected 'img0 img1 same=0|1', got " + std::to_string(tok.size()) + " fields");
      if (tok[2] == "same=1") {
        r.same = true;
      } else if (tok[2] != "same=0") {
        fail(manifest, line, "expected same=0 or same=1, got '" + tok[2] + "'");
      }
      r.img0 = load_image(manifest, line, tok[0]);
      r.img1 = load_image(manifest, line, tok[1]);
      if (r.img0.shape() != r.img1.shape()) fail(manifest, line, "image extents differ within the record");
    }
    records.push_back(std::move(r));
  }
  return records;
}

void write_eval_records(const fs::path& manifest, const std::vector<EvalRecord>& records) {
  const fs::path dir = manifest.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  const std::string stem = manifest.stem().string();
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw Error("cannot open '" + manifest.string() + "' for writing");
  for (size_t i = 0; i < records.size(); ++i) {
    const EvalRecord& r = records[i];
    const std::string base = stem + "_" + std::to_string(i) + "_";
    if (r.kind == RecordKind::triplet) {
      if (!(r.h >= 0.0 && r.h <= 1.0)) throw Error("record " + std::to_string(i) + ": h outside [0, 1]");
      write_ppm(r.ref, dir / (base + "ref.ppm"));
      write_ppm(r.img0, dir / (base + "img0.ppm"));
      write_ppm(r.img1, dir / (base + "img1.ppm"));
      out << base << "ref.ppm " << base << "img0.ppm " << base << "img1.ppm "
          << format_double(r.h) << "\n";
    } else {
      write_ppm(r.img0, dir / (base + "img0.ppm"));
      write_ppm(r.img1, dir / (base + "img1.ppm"));
      out << base << "img0.ppm " << base << "img1.ppm same=" << (r.same ? 1 : 0) << "\n";
    }
  }
  if (!out) throw Error("failed writing '" + manifest.string() + "'");
}

}  // namespace pim
