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

// Top-k item indices by score, ties broken by ascending index. Masked items
// (a sorted index list, typically the user's train items) are excluded.
// Throws if k exceeds the number of unmasked items.
std::vector<std::uint32_t> rank_topk(const std::vector<double>& scores,
                                     const std::vector<std::uint32_t>& mask_sorted,
                                     std::uint32_t k);

// relevant_sorted must be non-empty and ascending.
// recall: |topk ∩ relevant| / |relevant|
// ndcg: binary gains, DCG = sum over hit ranks r of 1/log2(r+1), ideal DCG
//       over min(k, |relevant|) leading ranks
// map: (1 / min(k, |relevant|)) * sum over hit ranks r of precision@r
double recall_at_k(const std::vector<std::uint32_t>& topk,
                   const std::vector<std::uint32_t>& relevant_sorted);
double ndcg_at_k(const std::vector<std::uint32_t>& topk,
                 const std::vector<std::uint32_t>& relevant_sorted);
double map_at_k(const std::vector<std::uint32_t>& topk,
                const std::vector<std::uint32_t>& relevant_sorted);

enum class Split { valid, test };

struct MetricsReport {
  std::uint32_t k = 0;
  double recall = 0.0;
  double ndcg = 0.0;
  double map = 0.0;
  std::uint32_t users_evaluated = 0;
};

// All-ranking evaluation: for every user with at least one pair in the chosen
// split, score all items, mask the user's train items, rank top-k, and
// average the metrics over those users.
MetricsReport evaluate(const Matrix& pooled, const InteractionDataset& ds,
                       Split split, std::uint32_t k);

// Mean absolute off-diagonal column correlation of a block (optionally of a
// row subset).
double corr_metric(const Matrix& block);
double corr_metric(const Matrix& block, const std::vector<std::uint32_t>& rows);

// Mean over unordered row pairs of half the distance between unit-normalized
// rows: smv = mean 0.5*||x/||x|| - y/||y||||. Throws on zero-norm rows.
double smv_metric(const Matrix& block);
double smv_metric(const Matrix& block, const std::vector<std::uint32_t>& rows);

struct StandardizeResult {
  Matrix m;
  double residual = 0.0;  // max deviation of any row/col mean from 0, var from 1
  std::uint32_t iters = 0;
  bool converged = false;
};

// Alternating row/column standardization (population variance) until every
// row and column has mean 0 and variance 1 within tol. Never throws on
// non-convergence; the caller inspects `converged`.
StandardizeResult double_standardize(Matrix m, double tol, std::uint32_t max_iter);

// For a doubly standardized m x n matrix the row- and column-correlation
// matrices collapse to Gram forms P_R = (1/n) E E^T and P_C = (1/m) E^T E,
// which forces (1/m)||P_R||_F == (1/n)||P_C||_F. This returns
// |(1/m)||P_R||_F - (1/n)||P_C||_F| with both sides computed as honest
// pairwise correlation matrices, so the identity genuinely fails on
// unstandardized input. With require_standardized set, inputs that deviate
// from double standardization by more than 1e-8 throw instead.
double theorem1_residual(const Matrix& m, bool require_standardized = true);

Matrix transpose(const Matrix& m);

}  // namespace afde
