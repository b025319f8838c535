// Copyright 2026 The afde authors
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

#include "afde/model.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "afde/error.hpp"
#include "afde/kernels.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace afde {

const char* to_string(Variant v) { return v == Variant::lightgcn ? "lightgcn" : "gccf"; }
const char* to_string(Pooling p) { return p == Pooling::mean ? "mean" : "concat"; }

Variant variant_from_string(const std::string& s) {
  if (s == "lightgcn") return Variant::lightgcn;
  if (s == "gccf") return Variant::gccf;
  throw Error::config("unknown variant '" + s + "' (expected lightgcn or gccf)");
}

Matrix init_embeddings(std::uint32_t rows, std::uint32_t d, Rng& rng) {
  if (rows == 0 || d == 0) throw Error::config("embedding table must be non-empty");
  const double bound = std::sqrt(6.0 / (static_cast<double>(d) + static_cast<double>(d)));
  Matrix e(rows, d);
  double* a = e.data();
  for (std::size_t i = 0; i < e.size(); ++i) a[i] = rng.uniform(-bound, bound);
  return e;
}

void propagate_into(LayerStack& stack, const SparseMatrix& adj, const Matrix& e0,
                    std::uint32_t L, Variant variant, std::uint32_t p) {
  if (adj.rows != e0.rows())
    throw Error::data("propagate: adjacency is " + std::to_string(adj.rows) +
                      " rows but embeddings have " + std::to_string(e0.rows()));
  stack.variant = variant;
  stack.p = p;
  stack.layers.resize(L + 1);
  if (!stack.layers[0].same_shape(e0)) stack.layers[0].resize(e0.rows(), e0.cols());
  std::memcpy(stack.layers[0].data(), e0.data(), e0.size() * sizeof(double));
  for (std::uint32_t l = 0; l < L; ++l) {
    spmm_into(adj, stack.layers[l], stack.layers[l + 1]);
    if (variant == Variant::gccf) {
      kernels::active().axpy(stack.layers[l + 1].data(), 1.0, stack.layers[l].data(),
                             stack.layers[l].size());
    }
  }
}

LayerStack propagate(const SparseMatrix& adj, const Matrix& e0, std::uint32_t L,
                     Variant variant, std::uint32_t p) {
  LayerStack stack;
  propagate_into(stack, adj, e0, L, variant, p);
  return stack;
}

void pool_into(const LayerStack& stack, Pooling pooling, Matrix& out, bool strict) {
  if (strict && pooling != default_pooling(stack.variant))
    throw Error::config(std::string("pooling '") + to_string(pooling) +
                        "' contradicts the default for variant '" +
                        to_string(stack.variant) + "' (strict mode)");
  const std::size_t n = stack.layers[0].rows();
  const std::size_t d = stack.layers[0].cols();
  const std::size_t nl = stack.layers.size();
  if (pooling == Pooling::mean) {
    if (out.rows() != n || out.cols() != d) out.resize(n, d);
    out.zero();
    const auto& k = kernels::active();
    const double w = 1.0 / static_cast<double>(nl);
    for (const Matrix& layer : stack.layers) k.axpy(out.data(), w, layer.data(), out.size());
  } else {
    if (out.rows() != n || out.cols() != nl * d) out.resize(n, nl * d);
    for (std::size_t r = 0; r < n; ++r) {
      double* dst = out.row(r);
      for (std::size_t l = 0; l < nl; ++l)
        std::memcpy(dst + l * d, stack.layers[l].row(r), d * sizeof(double));
    }
  }
}

Matrix pool(const LayerStack& stack, Pooling pooling, bool strict) {
  Matrix out;
  pool_into(stack, pooling, out, strict);
  return out;
}

std::vector<double> score_all(const Matrix& pooled, std::uint32_t p, std::uint32_t q,
                              std::uint32_t user) {
  if (pooled.rows() != static_cast<std::size_t>(p) + q)
    throw Error::data("score_all: pooled table has " + std::to_string(pooled.rows()) +
                      " rows, expected " + std::to_string(p + q));
  if (user >= p)
    throw Error::data("score_all: user index " + std::to_string(user) +
                      " out of range (p=" + std::to_string(p) + ")");
  const auto& k = kernels::active();
  const double* urow = pooled.row(user);
  const std::size_t d = pooled.cols();
  std::vector<double> scores(q);
  for (std::uint32_t i = 0; i < q; ++i)
    scores[i] = k.dot(urow, pooled.row(static_cast<std::size_t>(p) + i), d);
  return scores;
}

namespace {
constexpr char kMagic[4] = {'A', 'F', 'D', 'E'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::FILE* f, std::uint32_t v) { std::fwrite(&v, sizeof(v), 1, f); }

std::uint32_t get_u32(std::FILE* f, const std::string& path) {
  std::uint32_t v;
  if (std::fread(&v, sizeof(v), 1, f) != 1)
    throw Error::data(path + ": truncated checkpoint header");
  return v;
}
}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (f == nullptr) throw Error::data("cannot write " + path);
  std::fwrite(kMagic, 1, 4, f);
  put_u32(f, kVersion);
  put_u32(f, ck.p);
  put_u32(f, ck.q);
  put_u32(f, ck.d);
  put_u32(f, ck.L);
  put_u32(f, ck.variant == Variant::lightgcn ? 0u : 1u);
  const std::size_t n = ck.e0.size();
  if (std::fwrite(ck.e0.data(), sizeof(double), n, f) != n) {
    std::fclose(f);
    throw Error::data("short write to " + path);
  }
  if (std::fclose(f) != 0) throw Error::data("error closing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (f == nullptr) throw Error::data("cannot open " + path);
  Checkpoint ck;
  char magic[4];
  if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    std::fclose(f);
    throw Error::data(path + ": not a checkpoint file (bad magic)");
  }
  const std::uint32_t version = get_u32(f, path);
  if (version != kVersion) {
    std::fclose(f);
    throw Error::data(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  ck.p = get_u32(f, path);
  ck.q = get_u32(f, path);
  ck.d = get_u32(f, path);
  ck.L = get_u32(f, path);
  const std::uint32_t vcode = get_u32(f, path);
  if (vcode > 1) {
    std::fclose(f);
    throw Error::data(path + ": unknown variant code " + std::to_string(vcode));
  }
  ck.variant = vcode == 0 ? Variant::lightgcn : Variant::gccf;
  const std::size_t n =
      (static_cast<std::size_t>(ck.p) + ck.q) * static_cast<std::size_t>(ck.d);
  ck.e0.resize(static_cast<std::size_t>(ck.p) + ck.q, ck.d);
  if (std::fread(ck.e0.data(), sizeof(double), n, f) != n) {
    std::fclose(f);
    throw Error::data(path + ": truncated embedding payload");
  }
  std::fclose(f);
  return ck;
}

}  // namespace afde
