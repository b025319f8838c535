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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "afde/mat.hpp"
#include "afde/rng.hpp"
#include "afde/sparse.hpp"

namespace afde {

// Propagation rule for the embedding stack.
//   lightgcn: E(l+1) = A_hat E(l)
//   gccf:     E(l+1) = A_hat E(l) + E(l)   (linear residual, no self-loops in A)
enum class Variant { lightgcn, gccf };

enum class Pooling { mean, concat };

inline Pooling default_pooling(Variant v) {
  return v == Variant::lightgcn ? Pooling::mean : Pooling::concat;
}

const char* to_string(Variant v);
const char* to_string(Pooling p);
Variant variant_from_string(const std::string& s);

// (p+q) x d table, users first. Entries i.i.d. uniform on
// [-sqrt(6/(d+d)), +sqrt(6/(d+d))] (Xavier with fan_in = fan_out = d).
Matrix init_embeddings(std::uint32_t rows, std::uint32_t d, Rng& rng);

// Embeddings at every propagation depth; layers[0] is E(0), size L+1.
struct LayerStack {
  Variant variant = Variant::lightgcn;
  std::uint32_t p = 0;  // user rows; item rows follow
  std::vector<Matrix> layers;

  std::uint32_t depth() const { return static_cast<std::uint32_t>(layers.size()) - 1; }
};

LayerStack propagate(const SparseMatrix& adj, const Matrix& e0, std::uint32_t L,
                     Variant variant, std::uint32_t p);
// Same, reusing the stack's buffers across training steps.
void propagate_into(LayerStack& stack, const SparseMatrix& adj, const Matrix& e0,
                    std::uint32_t L, Variant variant, std::uint32_t p);

// mean: elementwise average of all L+1 layers; concat: [E(0) | ... | E(L)].
// With strict set, a pooling that contradicts the variant's default throws.
Matrix pool(const LayerStack& stack, Pooling pooling, bool strict = false);
void pool_into(const LayerStack& stack, Pooling pooling, Matrix& out, bool strict = false);

// Scores of every item for one user: dot(pooled[u], pooled[p + i]).
std::vector<double> score_all(const Matrix& pooled, std::uint32_t p, std::uint32_t q,
                              std::uint32_t user);

// Checkpoint: "AFDE" magic, format version, p/q/d/L/variant words, then E(0)
// row-major as little-endian doubles.
struct Checkpoint {
  Matrix e0;
  std::uint32_t p = 0;
  std::uint32_t q = 0;
  std::uint32_t d = 0;
  std::uint32_t L = 0;
  Variant variant = Variant::lightgcn;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace afde
