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

#include "afde/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>

#include "afde/error.hpp"
#include "afde/kernels.hpp"
#include "afde/metrics.hpp"

namespace afde {

void TrainConfig::validate() const {
  if (d < 2) throw Error::config("d must be at least 2");
  if (layers < 1) throw Error::config("layers must be at least 1");
  if (!(lr > 0.0)) throw Error::config("lr must be positive");
  if (alpha < 0.0) throw Error::config("alpha must be non-negative");
  if (l2_reg < 0.0) throw Error::config("l2_reg must be non-negative");
  if (batch_size == 0) throw Error::config("batch_size must be positive");
  if (max_epochs == 0) throw Error::config("max_epochs must be positive");
  if (patience == 0) throw Error::config("patience must be positive");
  if (eval_k == 0) throw Error::config("eval_k must be positive");
}

BprBatch sample_batch(const InteractionDataset& ds, std::uint32_t batch_size, Rng& rng) {
  if (ds.train.empty()) throw Error::data("sample_batch: train split is empty");
  BprBatch b;
  b.user.resize(batch_size);
  b.pos.resize(batch_size);
  b.neg.resize(batch_size);
  for (std::uint32_t t = 0; t < batch_size; ++t) {
    const auto& [u, i] = ds.train[rng.uniform_int(ds.train.size())];
    const auto& owned = ds.train_items_by_user[u];
    if (owned.size() >= ds.q)
      throw Error::data("sample_batch: user " + std::to_string(u) +
                        " interacts with every item, no negative available");
    std::uint32_t j;
    do {
      j = rng.uniform_u32(ds.q);
    } while (std::binary_search(owned.begin(), owned.end(), j));
    b.user[t] = u;
    b.pos[t] = i;
    b.neg[t] = j;
  }
  return b;
}

namespace {

// -ln sigmoid(x), computed without overflow on either tail.
double softplus_neg(double x) {
  if (x > 0.0) return std::log1p(std::exp(-x));
  return -x + std::log1p(std::exp(x));
}

// sigmoid(-x), the magnitude of d(-ln sigmoid(x))/dx.
double sigmoid_neg(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

}  // namespace

double bpr_loss_and_grad(const Matrix& pooled, std::uint32_t p, const BprBatch& batch,
                         bool bpr_sum, Matrix& grad_pooled) {
  if (batch.size() == 0) {
    grad_pooled.resize(pooled.rows(), pooled.cols());
    return 0.0;
  }
  if (!grad_pooled.same_shape(pooled)) grad_pooled.resize(pooled.rows(), pooled.cols());
  grad_pooled.zero();

  const auto& k = kernels::active();
  const std::size_t d = pooled.cols();
  const double w = bpr_sum ? 1.0 : 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (std::size_t t = 0; t < batch.size(); ++t) {
    const std::size_t u = batch.user[t];
    const std::size_t i = static_cast<std::size_t>(p) + batch.pos[t];
    const std::size_t j = static_cast<std::size_t>(p) + batch.neg[t];
    const double* xu = pooled.row(u);
    const double* xi = pooled.row(i);
    const double* xj = pooled.row(j);
    const double x = k.dot(xu, xi, d) - k.dot(xu, xj, d);
    loss += w * softplus_neg(x);
    const double coef = -w * sigmoid_neg(x);  // dL/d score(u,i); negate for (u,j)
    k.axpy(grad_pooled.row(u), coef, xi, d);
    k.axpy(grad_pooled.row(u), -coef, xj, d);
    k.axpy(grad_pooled.row(i), coef, xu, d);
    k.axpy(grad_pooled.row(j), -coef, xu, d);
  }
  return loss;
}

Matrix backward_through_stack(const Matrix& grad_pooled,
                              const std::vector<Matrix>& grad_afd_layers,
                              const SparseMatrix& adj, std::uint32_t L,
                              Variant variant, Pooling pooling) {
  const std::size_t n = grad_pooled.rows();
  const std::size_t nl = static_cast<std::size_t>(L) + 1;
  const std::size_t d =
      pooling == Pooling::concat ? grad_pooled.cols() / nl : grad_pooled.cols();
  if (pooling == Pooling::concat && grad_pooled.cols() != nl * d)
    throw Error::data("backward_through_stack: pooled width is not (L+1)*d");

  const auto& k = kernels::active();
  // Pooling adjoint for layer l, written into `out`.
  const auto layer_adjoint = [&](std::uint32_t l, Matrix& out) {
    if (out.rows() == n && out.cols() == d) {
      out.zero();
    } else {
      out.resize(n, d);
    }
    if (pooling == Pooling::mean) {
      k.axpy(out.data(), 1.0 / static_cast<double>(nl), grad_pooled.data(), out.size());
    } else {
      for (std::size_t r = 0; r < n; ++r)
        std::memcpy(out.row(r), grad_pooled.row(r) + l * d, d * sizeof(double));
    }
    if (l < grad_afd_layers.size() && !grad_afd_layers[l].empty())
      k.axpy(out.data(), 1.0, grad_afd_layers[l].data(), out.size());
  };

  Matrix g, tmp, adjoint;
  layer_adjoint(L, g);
  for (std::uint32_t l = L; l-- > 0;) {
    spmm_into(adj, g, tmp);  // A_hat is symmetric, so A^T g == A g
    if (variant == Variant::gccf) k.axpy(tmp.data(), 1.0, g.data(), tmp.size());
    layer_adjoint(l, adjoint);
    k.axpy(tmp.data(), 1.0, adjoint.data(), tmp.size());
    std::swap(g, tmp);
  }
  return g;
}

void adam_update(AdamState& state, Matrix& params, const Matrix& grad, double lr,
                 double beta1, double beta2, double eps) {
  if (!grad.same_shape(params))
    throw Error::data("adam_update: gradient shape differs from parameters");
  if (!state.m.same_shape(params)) {
    state.m.resize(params.rows(), params.cols());
    state.v.resize(params.rows(), params.cols());
    state.t = 0;
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  kernels::active().adam_step(params.data(), state.m.data(), state.v.data(),
                              grad.data(), params.size(), lr, beta1, beta2, eps,
                              bc1, bc2);
}

namespace {

bool all_finite(const Matrix& m) {
  const double* a = m.data();
  for (std::size_t i = 0; i < m.size(); ++i)
    if (!std::isfinite(a[i])) return false;
  return true;
}

// Without replacement, `count` of n row offsets; empty result means "all".
std::vector<std::uint32_t> draw_rows(std::uint32_t n, std::uint32_t count, Rng& rng) {
  if (count == 0 || count >= n) return {};
  std::vector<std::uint32_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0u);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t j = i + rng.uniform_u32(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace

TrainResult train(const InteractionDataset& ds, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (ds.train.empty()) throw Error::data("train: dataset has no train pairs");
  for (std::uint32_t u = 0; u < ds.p; ++u) {
    if (ds.train_items_by_user[u].size() >= ds.q)
      throw Error::data("train: user " + std::to_string(u) +
                        " interacts with every item, no negative available");
  }

  const SparseMatrix adj = normalize_symmetric(build_adjacency(ds));
  Rng root(cfg.seed);
  Rng rng_init = root.stream("init");
  Rng rng_sample = root.stream("sample");
  Rng rng_corr = root.stream("corr");

  const std::uint32_t n_rows = ds.p + ds.q;
  Matrix e0 = init_embeddings(n_rows, cfg.d, rng_init);
  AdamState adam;

  const std::size_t steps =
      (ds.train.size() + cfg.batch_size - 1) / cfg.batch_size;
  const auto& k = kernels::active();

  LayerStack stack;
  Matrix pooled, grad_pooled;
  TrainResult result;
  std::uint32_t since_best = 0;

  for (std::uint32_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double bpr_sum = 0.0, afd_sum = 0.0, l2_sum = 0.0;
    CorrelationReport last_report;
    bool have_report = false;

    for (std::size_t step = 0; step < steps; ++step) {
      const BprBatch batch = sample_batch(ds, cfg.batch_size, rng_sample);
      propagate_into(stack, adj, e0, cfg.layers, cfg.variant, ds.p);
      pool_into(stack, cfg.pooling, pooled);

      const double bpr = bpr_loss_and_grad(pooled, ds.p, batch, cfg.bpr_sum, grad_pooled);

      // The penalty is computed every step when it shapes the gradient, and
      // once per epoch (last step) otherwise so the history still has it.
      std::vector<Matrix> afd_grads;
      double afd = 0.0;
      const bool want_report = cfg.alpha > 0.0 || step + 1 == steps;
      if (want_report) {
        const std::vector<std::uint32_t> su = draw_rows(ds.p, cfg.corr_sample, rng_corr);
        const std::vector<std::uint32_t> si = draw_rows(ds.q, cfg.corr_sample, rng_corr);
        last_report = afd_loss(stack, cfg.adaptive_lambda, &su, &si);
        have_report = true;
        afd = last_report.loss;
        if (cfg.alpha > 0.0) {
          afd_grads = afd_backward(stack, last_report);
          for (Matrix& g : afd_grads)
            if (!g.empty()) k.scale(g.data(), cfg.alpha, g.size());
        }
      }

      const double l2 = 0.5 * cfg.l2_reg * k.dot(e0.data(), e0.data(), e0.size());
      if (!std::isfinite(bpr) || !std::isfinite(afd) || !std::isfinite(l2))
        throw Error::numeric("training diverged: non-finite loss at epoch " +
                             std::to_string(epoch));

      Matrix g0 = backward_through_stack(grad_pooled, afd_grads, adj, cfg.layers,
                                         cfg.variant, cfg.pooling);
      if (cfg.l2_reg > 0.0) k.axpy(g0.data(), cfg.l2_reg, e0.data(), g0.size());
      if (!all_finite(g0))
        throw Error::numeric("non-finite gradient at epoch " + std::to_string(epoch));

      adam_update(adam, e0, g0, cfg.lr);
      bpr_sum += bpr;
      afd_sum += afd;
      l2_sum += l2;
    }

    propagate_into(stack, adj, e0, cfg.layers, cfg.variant, ds.p);
    pool_into(stack, cfg.pooling, pooled);
    const MetricsReport valid = evaluate(pooled, ds, Split::valid, cfg.eval_k);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.bpr_loss = bpr_sum / static_cast<double>(steps);
    // The penalty average only covers the steps that computed it.
    rec.afd_loss = cfg.alpha > 0.0 ? afd_sum / static_cast<double>(steps) : afd_sum;
    rec.l2_loss = l2_sum / static_cast<double>(steps);
    rec.total_loss = rec.bpr_loss + cfg.alpha * rec.afd_loss + rec.l2_loss;
    if (have_report) {
      rec.pbar_user = last_report.pbar_user;
      rec.pbar_item = last_report.pbar_item;
      rec.lambda_user = last_report.lambda_user;
      rec.lambda_item = last_report.lambda_item;
    }
    rec.valid_recall = valid.recall;
    rec.valid_ndcg = valid.ndcg;
    rec.valid_map = valid.map;
    if (cfg.log_timing) {
      rec.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

    const bool new_best = result.history.empty() || valid.ndcg > result.best_ndcg;
    if (new_best) {
      result.best_epoch = epoch;
      result.best_ndcg = valid.ndcg;
      result.best_recall = valid.recall;
      result.best_map = valid.map;
      result.best.e0 = e0;
      since_best = 0;
    } else {
      ++since_best;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec, new_best, e0);
    if (since_best >= cfg.patience) break;
  }

  result.best.p = ds.p;
  result.best.q = ds.q;
  result.best.d = cfg.d;
  result.best.L = cfg.layers;
  result.best.variant = cfg.variant;
  return result;
}

}  // namespace afde
