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

#include "afde/afd.hpp"

#include <cmath>
#include <cstring>

#include "afde/error.hpp"
#include "afde/kernels.hpp"

namespace afde {
namespace {

// A side of a layer: rows [base, base+count) of the matrix, optionally
// restricted to sampled offsets within the side.
struct RowBlock {
  const Matrix* m;
  std::size_t base;
  std::size_t count;
  const std::vector<std::uint32_t>* sample;  // nullptr or empty = all rows

  std::size_t n() const {
    return (sample != nullptr && !sample->empty()) ? sample->size() : count;
  }
  const double* row(std::size_t k) const {
    const std::size_t off =
        (sample != nullptr && !sample->empty()) ? (*sample)[k] : k;
    return m->row(base + off);
  }
  std::size_t abs_row(std::size_t k) const {
    const std::size_t off =
        (sample != nullptr && !sample->empty()) ? (*sample)[k] : k;
    return base + off;
  }
};

std::vector<double> column_means(const RowBlock& b, std::size_t d) {
  const auto& k = kernels::active();
  std::vector<double> mean(d, 0.0);
  const std::size_t n = b.n();
  for (std::size_t r = 0; r < n; ++r) k.axpy(mean.data(), 1.0, b.row(r), d);
  k.scale(mean.data(), 1.0 / static_cast<double>(n), d);
  return mean;
}

// Centered copy of the block rows.
Matrix centered(const RowBlock& b, const std::vector<double>& mean, std::size_t d) {
  const auto& k = kernels::active();
  const std::size_t n = b.n();
  Matrix ec(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    double* dst = ec.row(r);
    std::memcpy(dst, b.row(r), d * sizeof(double));
    k.axpy(dst, -1.0, mean.data(), d);
  }
  return ec;
}

// C = Ec^T Ec. Row i accumulates ec[r][i] * ec[r] over rows in order, so the
// result does not depend on the thread partition.
Matrix gram(const Matrix& ec) {
  const auto& k = kernels::active();
  const std::size_t n = ec.rows(), d = ec.cols();
  Matrix cov(d, d);
  const std::int64_t di = static_cast<std::int64_t>(d);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < di; ++i) {
    double* crow = cov.row(static_cast<std::size_t>(i));
    for (std::size_t r = 0; r < n; ++r)
      k.axpy(crow, ec.at(r, static_cast<std::size_t>(i)), ec.row(r), d);
  }
  return cov;
}

double pbar_from_cov(const Matrix& cov) {
  const std::size_t d = cov.rows();
  double sum = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double vi = cov.at(i, i) + kCorrEps;
    for (std::size_t j = 0; j < d; ++j) {
      if (j == i) continue;
      const double vj = cov.at(j, j) + kCorrEps;
      const double c = cov.at(i, j);
      sum += (c * c) / (vi * vj);
    }
  }
  return sum / (static_cast<double>(d) * static_cast<double>(d - 1));
}

void check_dim(std::size_t d) {
  if (d < 2)
    throw Error::config("feature correlation needs at least 2 embedding columns");
}

}  // namespace

Matrix column_correlation(const Matrix& block) {
  check_dim(block.cols());
  RowBlock b{&block, 0, block.rows(), nullptr};
  const std::size_t d = block.cols();
  const std::vector<double> mean = column_means(b, d);
  const Matrix cov = gram(centered(b, mean, d));
  Matrix p(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    p.at(i, i) = 1.0;
    const double vi = cov.at(i, i) + kCorrEps;
    for (std::size_t j = i + 1; j < d; ++j) {
      const double vj = cov.at(j, j) + kCorrEps;
      double r = cov.at(i, j) / std::sqrt(vi * vj);
      if (r > 1.0) r = 1.0;
      if (r < -1.0) r = -1.0;
      p.at(i, j) = r;
      p.at(j, i) = r;
    }
  }
  return p;
}

double mean_feature_correlation(const Matrix& block) {
  check_dim(block.cols());
  RowBlock b{&block, 0, block.rows(), nullptr};
  const std::vector<double> mean = column_means(b, block.cols());
  return pbar_from_cov(gram(centered(b, mean, block.cols())));
}

std::vector<double> adaptive_coefficients(const std::vector<double>& pbar) {
  std::vector<double> lambda(pbar.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pbar.size(); ++i) {
    lambda[i] = 1.0 / (pbar[i] + kCorrEps);
    total += lambda[i];
  }
  for (double& l : lambda) l /= total;
  // Pin the last weight to 1 minus the running sum of the others. The
  // adjustment is below one ulp, and it makes a left-to-right sum of the
  // vector come out as exactly 1.0, which downstream tooling checks.
  if (!lambda.empty()) {
    double prefix = 0.0;
    for (std::size_t i = 0; i + 1 < lambda.size(); ++i) prefix += lambda[i];
    lambda.back() = 1.0 - prefix;
  }
  return lambda;
}

CorrelationReport afd_loss(const LayerStack& stack, bool adaptive,
                           const std::vector<std::uint32_t>* sample_user,
                           const std::vector<std::uint32_t>* sample_item) {
  const std::uint32_t L = stack.depth();
  const std::size_t d = stack.layers[0].cols();
  check_dim(d);
  const std::size_t p = stack.p;
  const std::size_t q = stack.layers[0].rows() - p;

  CorrelationReport rep;
  if (sample_user != nullptr) rep.sample_user = *sample_user;
  if (sample_item != nullptr) rep.sample_item = *sample_item;

  for (std::uint32_t l = 1; l <= L; ++l) {
    const Matrix& e = stack.layers[l];
    RowBlock bu{&e, 0, p, &rep.sample_user};
    RowBlock bi{&e, p, q, &rep.sample_item};
    for (const RowBlock* b : {&bu, &bi}) {
      std::vector<double> mean = column_means(*b, d);
      Matrix cov = gram(centered(*b, mean, d));
      const double pbar = pbar_from_cov(cov);
      if (b == &bu) {
        rep.pbar_user.push_back(pbar);
        rep.mean_user.push_back(std::move(mean));
        rep.cov_user.push_back(std::move(cov));
      } else {
        rep.pbar_item.push_back(pbar);
        rep.mean_item.push_back(std::move(mean));
        rep.cov_item.push_back(std::move(cov));
      }
    }
  }

  if (adaptive) {
    rep.lambda_user = adaptive_coefficients(rep.pbar_user);
    rep.lambda_item = adaptive_coefficients(rep.pbar_item);
  } else {
    rep.lambda_user.assign(L, 1.0 / static_cast<double>(L));
    rep.lambda_item.assign(L, 1.0 / static_cast<double>(L));
    for (std::vector<double>* lam : {&rep.lambda_user, &rep.lambda_item}) {
      // Same last-entry pinning as the adaptive path, for the same reason.
      double prefix = 0.0;
      for (std::size_t i = 0; i + 1 < lam->size(); ++i) prefix += (*lam)[i];
      lam->back() = 1.0 - prefix;
    }
  }

  rep.loss = 0.0;
  for (std::uint32_t l = 0; l < L; ++l) {
    rep.loss += rep.lambda_user[l] * rep.pbar_user[l];
    rep.loss += rep.lambda_item[l] * rep.pbar_item[l];
  }
  return rep;
}

namespace {

// d(pbar)/dC for the guarded penalty; C and the result are symmetric.
Matrix pbar_cov_gradient(const Matrix& cov) {
  const std::size_t d = cov.rows();
  const double kk = 2.0 / (static_cast<double>(d) * static_cast<double>(d - 1));
  Matrix g(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    const double vi = cov.at(i, i) + kCorrEps;
    double diag = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (j == i) continue;
      const double vj = cov.at(j, j) + kCorrEps;
      const double c = cov.at(i, j);
      g.at(i, j) = kk * c / (vi * vj);
      diag += (c * c) / (vi * vj);
    }
    g.at(i, i) = -kk * diag / vi;
  }
  return g;
}

// Adds weight * 2 * Ec * G into the block's rows of out.
void accumulate_block_gradient(const RowBlock& b, const std::vector<double>& mean,
                               const Matrix& g, double weight, Matrix& out) {
  const auto& k = kernels::active();
  const std::size_t d = out.cols();
  const std::size_t n = b.n();
  const std::int64_t ni = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < ni; ++r) {
    const double* src = b.row(static_cast<std::size_t>(r));
    double* dst = out.row(b.abs_row(static_cast<std::size_t>(r)));
    for (std::size_t c = 0; c < d; ++c) {
      const double ec = src[c] - mean[c];
      k.axpy(dst, weight * (2.0 * ec), g.row(c), d);
    }
  }
}

}  // namespace

std::vector<Matrix> afd_backward(const LayerStack& stack,
                                 const CorrelationReport& report) {
  const std::uint32_t L = stack.depth();
  const std::size_t p = stack.p;
  const std::size_t q = stack.layers[0].rows() - p;
  const std::size_t d = stack.layers[0].cols();

  std::vector<Matrix> grads(L + 1);
  for (std::uint32_t l = 1; l <= L; ++l) {
    grads[l].resize(p + q, d);
    const Matrix& e = stack.layers[l];
    RowBlock bu{&e, 0, p, &report.sample_user};
    RowBlock bi{&e, p, q, &report.sample_item};
    accumulate_block_gradient(bu, report.mean_user[l - 1],
                              pbar_cov_gradient(report.cov_user[l - 1]),
                              report.lambda_user[l - 1], grads[l]);
    accumulate_block_gradient(bi, report.mean_item[l - 1],
                              pbar_cov_gradient(report.cov_item[l - 1]),
                              report.lambda_item[l - 1], grads[l]);
  }
  return grads;
}

}  // namespace afde
