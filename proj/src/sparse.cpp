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

#include "afde/sparse.hpp"

#include <cmath>

#include "afde/error.hpp"
#include "afde/kernels.hpp"

namespace afde {

SparseMatrix build_adjacency(const InteractionDataset& ds) {
  const std::uint32_t n = ds.p + ds.q;
  SparseMatrix a;
  a.rows = n;
  a.cols = n;
  a.row_ptr.assign(n + 1, 0);

  // Item rows need users in ascending order; collect them by walking users
  // in order, which also gives the degree counts.
  std::vector<std::vector<std::uint32_t>> users_by_item(ds.q);
  for (std::uint32_t u = 0; u < ds.p; ++u)
    for (std::uint32_t i : ds.train_items_by_user[u]) users_by_item[i].push_back(u);

  for (std::uint32_t u = 0; u < ds.p; ++u)
    a.row_ptr[u + 1] = a.row_ptr[u] + ds.train_items_by_user[u].size();
  for (std::uint32_t i = 0; i < ds.q; ++i)
    a.row_ptr[ds.p + i + 1] = a.row_ptr[ds.p + i] + users_by_item[i].size();

  a.col_idx.resize(a.row_ptr[n]);
  a.values.assign(a.row_ptr[n], 1.0);
  std::uint64_t e = 0;
  for (std::uint32_t u = 0; u < ds.p; ++u)
    for (std::uint32_t i : ds.train_items_by_user[u]) a.col_idx[e++] = ds.p + i;
  for (std::uint32_t i = 0; i < ds.q; ++i)
    for (std::uint32_t u : users_by_item[i]) a.col_idx[e++] = u;
  return a;
}

std::vector<double> row_sums(const SparseMatrix& a) {
  std::vector<double> deg(a.rows, 0.0);
  for (std::uint32_t r = 0; r < a.rows; ++r) {
    double s = 0.0;
    for (std::uint64_t e = a.row_ptr[r]; e < a.row_ptr[r + 1]; ++e) s += a.values[e];
    deg[r] = s;
  }
  return deg;
}

SparseMatrix normalize_symmetric(SparseMatrix a) {
  if (a.rows != a.cols)
    throw Error::data("normalize_symmetric: matrix is " + std::to_string(a.rows) +
                      "x" + std::to_string(a.cols) + ", not square");
  std::vector<double> inv_sqrt = row_sums(a);
  for (double& d : inv_sqrt) d = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  for (std::uint32_t r = 0; r < a.rows; ++r)
    for (std::uint64_t e = a.row_ptr[r]; e < a.row_ptr[r + 1]; ++e)
      a.values[e] *= inv_sqrt[r] * inv_sqrt[a.col_idx[e]];
  return a;
}

void spmm_into(const SparseMatrix& a, const Matrix& x, Matrix& y) {
  if (x.rows() != a.cols)
    throw Error::data("spmm: matrix has " + std::to_string(a.cols) +
                      " columns but dense input has " + std::to_string(x.rows()) +
                      " rows");
  if (y.rows() != a.rows || y.cols() != x.cols()) y.resize(a.rows, x.cols());

  const auto& k = kernels::active();
  const std::size_t d = x.cols();
  const std::int64_t n = static_cast<std::int64_t>(a.rows);
  // Each thread owns whole rows, so the per-row accumulation order (and thus
  // every output bit) is the same for any thread count.
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < n; ++r) {
    k.spmm_rows(a.row_ptr.data(), a.col_idx.data(), a.values.data(), x.data(), d,
                y.data(), static_cast<std::size_t>(r), static_cast<std::size_t>(r + 1));
  }
}

Matrix spmm(const SparseMatrix& a, const Matrix& x) {
  Matrix y(a.rows, x.cols());
  spmm_into(a, x, y);
  return y;
}

}  // namespace afde
