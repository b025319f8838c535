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

#include "afde/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "afde/afd.hpp"
#include "afde/error.hpp"
#include "afde/model.hpp"

namespace afde {

std::vector<std::uint32_t> rank_topk(const std::vector<double>& scores,
                                     const std::vector<std::uint32_t>& mask_sorted,
                                     std::uint32_t k) {
  const std::size_t q = scores.size();
  if (k == 0) throw Error::config("rank_topk: k must be positive");
  if (static_cast<std::size_t>(k) + mask_sorted.size() > q)
    throw Error::config("rank_topk: k=" + std::to_string(k) + " too large for " +
                        std::to_string(q - mask_sorted.size()) + " unmasked items");

  std::vector<double> s = scores;
  for (std::uint32_t m : mask_sorted) s[m] = -std::numeric_limits<double>::infinity();

  std::vector<std::uint32_t> idx(q);
  std::iota(idx.begin(), idx.end(), 0u);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      if (s[a] != s[b]) return s[a] > s[b];
                      return a < b;
                    });
  idx.resize(k);
  return idx;
}

namespace {

void check_relevant(const std::vector<std::uint32_t>& relevant) {
  if (relevant.empty())
    throw Error::data("ranking metric called with an empty relevant set");
}

bool is_relevant(const std::vector<std::uint32_t>& relevant_sorted, std::uint32_t item) {
  return std::binary_search(relevant_sorted.begin(), relevant_sorted.end(), item);
}

}  // namespace

double recall_at_k(const std::vector<std::uint32_t>& topk,
                   const std::vector<std::uint32_t>& relevant_sorted) {
  check_relevant(relevant_sorted);
  std::size_t hits = 0;
  for (std::uint32_t item : topk)
    if (is_relevant(relevant_sorted, item)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(relevant_sorted.size());
}

double ndcg_at_k(const std::vector<std::uint32_t>& topk,
                 const std::vector<std::uint32_t>& relevant_sorted) {
  check_relevant(relevant_sorted);
  double dcg = 0.0;
  for (std::size_t r = 0; r < topk.size(); ++r)
    if (is_relevant(relevant_sorted, topk[r]))
      dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  const std::size_t ideal = std::min(topk.size(), relevant_sorted.size());
  double idcg = 0.0;
  for (std::size_t r = 0; r < ideal; ++r)
    idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return dcg / idcg;
}

double map_at_k(const std::vector<std::uint32_t>& topk,
                const std::vector<std::uint32_t>& relevant_sorted) {
  check_relevant(relevant_sorted);
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < topk.size(); ++r) {
    if (is_relevant(relevant_sorted, topk[r])) {
      ++hits;
      sum += static_cast<double>(hits) / (static_cast<double>(r) + 1.0);
    }
  }
  const std::size_t denom = std::min(topk.size(), relevant_sorted.size());
  return sum / static_cast<double>(denom);
}

MetricsReport evaluate(const Matrix& pooled, const InteractionDataset& ds,
                       Split split, std::uint32_t k) {
  if (pooled.rows() != static_cast<std::size_t>(ds.p) + ds.q)
    throw Error::data("evaluate: pooled table has " + std::to_string(pooled.rows()) +
                      " rows but dataset has p=" + std::to_string(ds.p) +
                      " q=" + std::to_string(ds.q));

  const auto& pairs = split == Split::valid ? ds.valid : ds.test;
  std::vector<std::vector<std::uint32_t>> relevant(ds.p);
  for (const auto& [u, i] : pairs) relevant[u].push_back(i);
  // Split files are (user, item) sorted, but don't rely on it here.
  for (auto& r : relevant) std::sort(r.begin(), r.end());

  std::vector<double> rec(ds.p, 0.0), ndc(ds.p, 0.0), ap(ds.p, 0.0);
  std::vector<std::uint8_t> used(ds.p, 0);
  const std::int64_t p = static_cast<std::int64_t>(ds.p);
  // Users are independent; the final reduction below runs in user order, so
  // results do not depend on the thread count.
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t u = 0; u < p; ++u) {
    if (relevant[u].empty()) continue;
    const std::vector<double> scores =
        score_all(pooled, ds.p, ds.q, static_cast<std::uint32_t>(u));
    const std::vector<std::uint32_t> topk =
        rank_topk(scores, ds.train_items_by_user[u], k);
    rec[u] = recall_at_k(topk, relevant[u]);
    ndc[u] = ndcg_at_k(topk, relevant[u]);
    ap[u] = map_at_k(topk, relevant[u]);
    used[u] = 1;
  }

  MetricsReport out;
  out.k = k;
  for (std::uint32_t u = 0; u < ds.p; ++u) {
    if (!used[u]) continue;
    ++out.users_evaluated;
    out.recall += rec[u];
    out.ndcg += ndc[u];
    out.map += ap[u];
  }
  if (out.users_evaluated > 0) {
    out.recall /= out.users_evaluated;
    out.ndcg /= out.users_evaluated;
    out.map /= out.users_evaluated;
  }
  return out;
}

namespace {

Matrix gather_rows(const Matrix& block, const std::vector<std::uint32_t>& rows) {
  Matrix sub(rows.size(), block.cols());
  for (std::size_t r = 0; r < rows.size(); ++r)
    std::memcpy(sub.row(r), block.row(rows[r]), block.cols() * sizeof(double));
  return sub;
}

double mean_abs_offdiag(const Matrix& p) {
  const std::size_t d = p.rows();
  double sum = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) sum += std::fabs(p.at(i, j));
  return sum / (static_cast<double>(d) * static_cast<double>(d - 1) / 2.0);
}

}  // namespace

double corr_metric(const Matrix& block) {
  return mean_abs_offdiag(column_correlation(block));
}

double corr_metric(const Matrix& block, const std::vector<std::uint32_t>& rows) {
  if (rows.empty()) return corr_metric(block);
  return mean_abs_offdiag(column_correlation(gather_rows(block, rows)));
}

namespace {

double smv_of(const Matrix& unit_rows) {
  const std::size_t n = unit_rows.rows();
  const std::size_t d = unit_rows.cols();
  if (n < 2) throw Error::data("smv_metric needs at least 2 rows");
  std::vector<double> partial(n, 0.0);
  const std::int64_t ni = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t i = 0; i < ni - 1; ++i) {
    const double* x = unit_rows.row(static_cast<std::size_t>(i));
    double acc = 0.0;
    for (std::size_t j = static_cast<std::size_t>(i) + 1; j < n; ++j) {
      const double* y = unit_rows.row(j);
      double ss = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = x[c] - y[c];
        ss += diff * diff;
      }
      acc += 0.5 * std::sqrt(ss);
    }
    partial[static_cast<std::size_t>(i)] = acc;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += partial[i];
  return sum / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

Matrix unit_normalize_rows(const Matrix& block) {
  Matrix out(block.rows(), block.cols());
  for (std::size_t r = 0; r < block.rows(); ++r) {
    const double* src = block.row(r);
    double ss = 0.0;
    for (std::size_t c = 0; c < block.cols(); ++c) ss += src[c] * src[c];
    if (ss <= 0.0)
      throw Error::data("smv_metric: row " + std::to_string(r) + " has zero norm");
    const double inv = 1.0 / std::sqrt(ss);
    double* dst = out.row(r);
    for (std::size_t c = 0; c < block.cols(); ++c) dst[c] = src[c] * inv;
  }
  return out;
}

}  // namespace

double smv_metric(const Matrix& block) {
  return smv_of(unit_normalize_rows(block));
}

double smv_metric(const Matrix& block, const std::vector<std::uint32_t>& rows) {
  if (rows.empty()) return smv_metric(block);
  return smv_of(unit_normalize_rows(gather_rows(block, rows)));
}

namespace {

// One standardization sweep along rows (axis 0) or columns (axis 1).
// Population variance; constant slices cannot be standardized and throw.
void standardize_rows(Matrix& m) {
  const std::size_t n = m.rows(), d = m.cols();
  for (std::size_t r = 0; r < n; ++r) {
    double* row = m.row(r);
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += row[c];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double t = row[c] - mean;
      var += t * t;
    }
    var /= static_cast<double>(d);
    if (var <= 0.0)
      throw Error::data("double_standardize: row " + std::to_string(r) + " is constant");
    const double inv = 1.0 / std::sqrt(var);
    for (std::size_t c = 0; c < d; ++c) row[c] = (row[c] - mean) * inv;
  }
}

void standardize_cols(Matrix& m) {
  const std::size_t n = m.rows(), d = m.cols();
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += m.at(r, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double t = m.at(r, c) - mean;
      var += t * t;
    }
    var /= static_cast<double>(n);
    if (var <= 0.0)
      throw Error::data("double_standardize: column " + std::to_string(c) + " is constant");
    const double inv = 1.0 / std::sqrt(var);
    for (std::size_t r = 0; r < n; ++r) m.at(r, c) = (m.at(r, c) - mean) * inv;
  }
}

// Max deviation of any row/column mean from 0 or variance from 1.
double standardization_residual(const Matrix& m) {
  const std::size_t n = m.rows(), d = m.cols();
  double worst = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = m.row(r);
    double mean = 0.0, sq = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += row[c];
    mean /= static_cast<double>(d);
    for (std::size_t c = 0; c < d; ++c) {
      const double t = row[c] - mean;
      sq += t * t;
    }
    worst = std::max(worst, std::fabs(mean));
    worst = std::max(worst, std::fabs(sq / static_cast<double>(d) - 1.0));
  }
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += m.at(r, c);
    mean /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
      const double t = m.at(r, c) - mean;
      sq += t * t;
    }
    worst = std::max(worst, std::fabs(mean));
    worst = std::max(worst, std::fabs(sq / static_cast<double>(n) - 1.0));
  }
  return worst;
}

}  // namespace

StandardizeResult double_standardize(Matrix m, double tol, std::uint32_t max_iter) {
  if (m.rows() < 2 || m.cols() < 2)
    throw Error::data("double_standardize needs at least a 2x2 matrix");
  StandardizeResult res;
  res.residual = standardization_residual(m);
  while (res.iters < max_iter && res.residual >= tol) {
    standardize_rows(m);
    standardize_cols(m);
    ++res.iters;
    res.residual = standardization_residual(m);
  }
  res.converged = res.residual < tol;
  res.m = std::move(m);
  return res;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) t.at(c, r) = m.at(r, c);
  return t;
}

double theorem1_residual(const Matrix& m, bool require_standardized) {
  if (m.rows() < 2 || m.cols() < 2)
    throw Error::data("theorem1_residual needs at least a 2x2 matrix");
  if (require_standardized && standardization_residual(m) > 1e-8)
    throw Error::numeric("theorem1_residual: matrix is not doubly standardized");
  const Matrix pc = column_correlation(m);            // n x n (column pairs)
  const Matrix pr = column_correlation(transpose(m)); // m x m (row pairs)
  const auto fro = [](const Matrix& a) {
    double s = 0.0;
    const double* v = a.data();
    for (std::size_t i = 0; i < a.size(); ++i) s += v[i] * v[i];
    return std::sqrt(s);
  };
  const double rows = static_cast<double>(m.rows());
  const double cols = static_cast<double>(m.cols());
  return std::fabs(fro(pr) / rows - fro(pc) / cols);
}

}  // namespace afde
