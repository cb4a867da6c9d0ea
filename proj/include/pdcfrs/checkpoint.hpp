// Copyright 2026 The PDC-FRS Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Binary model checkpoints.
//
// Layout, all integers little-endian:
//
//   "PDCFRSCK"  u32 version  u32 activation  u32 tensor count
//   per tensor: u32 name length, name bytes, u64 rows, u64 cols,
//               rows * cols IEEE-754 doubles (row-major)
//
// Tensors are "users", "items", "layer<k>.weight", "layer<k>.bias" and
// "head"; biases and the head are stored as single-column tensors.

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "pdcfrs/common.hpp"
#include "pdcfrs/model.hpp"

namespace pdcfrs {

inline constexpr std::array<char, 8> kCheckpointMagic = {'P', 'D', 'C', 'F', 'R', 'S', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_le(std::ostream& out, std::uint64_t v, int bytes) {
  char buf[8];
  for (int b = 0; b < bytes; ++b) buf[b] = static_cast<char>((v >> (8 * b)) & 0xff);
  out.write(buf, bytes);
}

inline std::uint64_t get_le(std::istream& in, int bytes) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), bytes)) throw Error("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int b = 0; b < bytes; ++b) v |= static_cast<std::uint64_t>(buf[b]) << (8 * b);
  return v;
}

inline void put_tensor(std::ostream& out, const std::string& name, const double* data, Index rows,
                       Index cols) {
  put_le(out, name.size(), 4);
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_le(out, static_cast<std::uint64_t>(rows), 8);
  put_le(out, static_cast<std::uint64_t>(cols), 8);
  for (Index i = 0; i < rows * cols; ++i) put_le(out, std::bit_cast<std::uint64_t>(data[i]), 8);
}

struct RawTensor {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  std::vector<double> data;
};

inline RawTensor get_tensor(std::istream& in) {
  RawTensor t;
  auto len = get_le(in, 4);
  if (len > 4096) throw Error("checkpoint: corrupt tensor name");
  t.name.resize(len);
  if (!in.read(t.name.data(), static_cast<std::streamsize>(len))) {
    throw Error("checkpoint: truncated file");
  }
  auto rows = get_le(in, 8);
  auto cols = get_le(in, 8);
  if (rows > (1ull << 32) || cols > (1ull << 32) || (rows && cols > (1ull << 40) / rows)) {
    throw Error("checkpoint: corrupt shape for tensor '" + t.name + "'");
  }
  t.rows = static_cast<Index>(rows);
  t.cols = static_cast<Index>(cols);
  t.data.resize(rows * cols);
  for (auto& x : t.data) x = std::bit_cast<double>(get_le(in, 8));
  return t;
}

inline RawTensor expect_tensor(std::istream& in, const std::string& name) {
  RawTensor t = get_tensor(in);
  if (t.name != name) {
    throw Error("checkpoint: expected tensor '" + name + "', found '" + t.name + "'");
  }
  return t;
}

inline Matrix to_matrix(const RawTensor& t) {
  Matrix m(t.rows, t.cols);
  std::copy(t.data.begin(), t.data.end(), m.data());
  return m;
}

inline Vector to_vector(const RawTensor& t) {
  if (t.cols != 1) throw Error("checkpoint: tensor '" + t.name + "' must have one column");
  Vector v(t.rows);
  std::copy(t.data.begin(), t.data.end(), v.data());
  return v;
}

}  // namespace detail

inline void save_checkpoint(std::ostream& out, const ModelParams& p) {
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::put_le(out, kCheckpointVersion, 4);
  detail::put_le(out, static_cast<std::uint64_t>(p.mlp.activation), 4);
  detail::put_le(out, 3 + 2 * p.mlp.layers.size(), 4);
  detail::put_tensor(out, "users", p.users.data(), p.users.rows(), p.users.cols());
  detail::put_tensor(out, "items", p.items.data(), p.items.rows(), p.items.cols());
  for (std::size_t l = 0; l < p.mlp.layers.size(); ++l) {
    const auto& layer = p.mlp.layers[l];
    const std::string prefix = "layer" + std::to_string(l);
    detail::put_tensor(out, prefix + ".weight", layer.weight.data(), layer.weight.rows(),
                       layer.weight.cols());
    detail::put_tensor(out, prefix + ".bias", layer.bias.data(), layer.bias.size(), 1);
  }
  detail::put_tensor(out, "head", p.mlp.head.data(), p.mlp.head.size(), 1);
  if (!out) throw Error("checkpoint: write failed");
}

inline ModelParams load_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kCheckpointMagic) {
    throw Error("checkpoint: bad magic");
  }
  auto version = detail::get_le(in, 4);
  if (version != kCheckpointVersion) {
    throw Error("checkpoint: unsupported version " + std::to_string(version));
  }
  auto act = detail::get_le(in, 4);
  if (act > static_cast<std::uint64_t>(Activation::kIdentity)) {
    throw Error("checkpoint: unknown activation code");
  }
  auto count = detail::get_le(in, 4);
  if (count < 3 || count % 2 == 0) throw Error("checkpoint: bad tensor count");

  ModelParams p;
  p.mlp.activation = static_cast<Activation>(act);
  p.users = detail::to_matrix(detail::expect_tensor(in, "users"));
  p.items = detail::to_matrix(detail::expect_tensor(in, "items"));
  if (p.users.cols() != p.items.cols()) throw Error("checkpoint: embedding widths differ");
  Index in_width = 2 * p.items.cols();
  for (std::uint64_t l = 0; l < (count - 3) / 2; ++l) {
    const std::string prefix = "layer" + std::to_string(l);
    DenseLayer layer;
    layer.weight = detail::to_matrix(detail::expect_tensor(in, prefix + ".weight"));
    layer.bias = detail::to_vector(detail::expect_tensor(in, prefix + ".bias"));
    if (layer.weight.cols() != in_width || layer.bias.size() != layer.weight.rows()) {
      throw Error("checkpoint: layer " + std::to_string(l) + " has inconsistent shape");
    }
    in_width = layer.weight.rows();
    p.mlp.layers.push_back(std::move(layer));
  }
  p.mlp.head = detail::to_vector(detail::expect_tensor(in, "head"));
  if (p.mlp.head.size() != in_width) throw Error("checkpoint: head has inconsistent shape");
  return p;
}

inline void save_checkpoint(const std::filesystem::path& path, const ModelParams& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  save_checkpoint(out, p);
}

inline ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return load_checkpoint(in);
}

}  // namespace pdcfrs
