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

#include "afde/mat.hpp"
#include "afde/model.hpp"

namespace afde {

// Feature de-correlation penalty. For an n x d block E with centered columns
// Ec and Gram matrix C = Ec^T Ec, the pairwise correlation is
//   P[i][j] = C[i][j] / sqrt((C[i][i] + eps) * (C[j][j] + eps)),  eps = 1e-12,
// and the penalty is the mean squared off-diagonal correlation
//   pbar(E) = (1 / (d (d-1))) * sum_{i != j} P[i][j]^2.
// Constant columns therefore contribute zero, and pbar is invariant to
// per-column positive affine maps (up to the eps guard).

inline constexpr double kCorrEps = 1e-12;

// Full d x d correlation matrix of a block's columns; diagonal is exactly 1,
// off-diagonal entries clamped to [-1, 1].
Matrix column_correlation(const Matrix& block);

// pbar as defined above, computed with the summation form.
double mean_feature_correlation(const Matrix& block);

// Layer weights lambda[l] proportional to 1 / (pbar[l] + eps), normalized to
// sum to 1. More correlated layers get smaller weight.
std::vector<double> adaptive_coefficients(const std::vector<double>& pbar);

// Per-layer, per-side penalty state for one training step. Layer l entries
// live at index l-1 (layer 0 is never penalized). The Gram matrices, column
// means, and sampled row ids are kept so the backward pass reuses the exact
// quantities the loss saw.
struct CorrelationReport {
  std::vector<double> pbar_user, pbar_item;
  std::vector<double> lambda_user, lambda_item;
  double loss = 0.0;  // sum_l lambda_u[l]*pbar_u[l] + lambda_i[l]*pbar_i[l]

  std::vector<std::uint32_t> sample_user, sample_item;  // empty = all rows
  std::vector<Matrix> cov_user, cov_item;
  std::vector<std::vector<double>> mean_user, mean_item;
};

// Penalty over layers 1..L of the stack. The lambda weights use the inverse
// weighting above when adaptive is true and are fixed at 1/L otherwise;
// either way they are treated as constants by the backward pass. Optional
// row samples (indices within each side) restrict the computation.
CorrelationReport afd_loss(const LayerStack& stack, bool adaptive = true,
                           const std::vector<std::uint32_t>* sample_user = nullptr,
                           const std::vector<std::uint32_t>* sample_item = nullptr);

// Analytic gradient of the report's loss with respect to each layer.
// Returns L+1 matrices; index 0 is empty (layer 0 carries no penalty), the
// rest are (p+q) x d with non-zero rows only where the loss sampled.
std::vector<Matrix> afd_backward(const LayerStack& stack,
                                 const CorrelationReport& report);

}  // namespace afde
