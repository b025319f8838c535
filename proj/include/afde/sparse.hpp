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
#include <vector>

#include "afde/dataset.hpp"
#include "afde/mat.hpp"

namespace afde {

// CSR with canonical layout: row_ptr has rows+1 entries, column indices are
// strictly increasing within each row, one stored value per entry.
struct SparseMatrix {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint64_t> row_ptr;
  std::vector<std::uint32_t> col_idx;
  std::vector<double> values;

  std::uint64_t nnz() const { return values.size(); }
};

// Symmetric bipartite adjacency of the train split:
//   A = [[0, R], [R^T, 0]]  with user rows first, size (p+q) x (p+q).
SparseMatrix build_adjacency(const InteractionDataset& ds);

// A_hat = D^{-1/2} A D^{-1/2} with D the (row-sum) degree matrix. Zero-degree
// rows get D^{-1/2} = 0. Requires a square input.
SparseMatrix normalize_symmetric(SparseMatrix a);

// Row sums of a sparse matrix (the degrees for a 0/1 adjacency).
std::vector<double> row_sums(const SparseMatrix& a);

// Y = A * X. Rows of the output are accumulated in CSR storage order, and the
// row partition used for threading never changes any bit of the result.
void spmm_into(const SparseMatrix& a, const Matrix& x, Matrix& y);
Matrix spmm(const SparseMatrix& a, const Matrix& x);

}  // namespace afde
