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
#include <functional>
#include <vector>

#include "afde/afd.hpp"
#include "afde/dataset.hpp"
#include "afde/mat.hpp"
#include "afde/model.hpp"
#include "afde/rng.hpp"
#include "afde/sparse.hpp"

namespace afde {

struct TrainConfig {
  std::uint32_t d = 128;
  std::uint32_t layers = 3;
  Variant variant = Variant::lightgcn;
  Pooling pooling = Pooling::mean;
  double alpha = 1e-3;    // weight of the de-correlation penalty
  double l2_reg = 1e-4;   // loss term (l2_reg/2) * ||E(0)||_F^2
  double lr = 1e-3;
  std::uint32_t batch_size = 4096;
  std::uint32_t max_epochs = 300;
  std::uint32_t patience = 10;  // epochs without a new best valid NDCG
  std::uint32_t eval_k = 10;
  std::uint64_t seed = 42;
  std::uint32_t corr_sample = 0;  // rows per side for the penalty; 0 = all
  bool adaptive_lambda = true;    // false: fixed lambda = 1/L
  bool bpr_sum = false;           // reduction over the batch: mean (default) or sum
  bool log_timing = false;        // keep epoch seconds at 0 for reproducible logs

  void validate() const;
};

struct BprBatch {
  std::vector<std::uint32_t> user, pos, neg;
  std::size_t size() const { return user.size(); }
};

// Uniform draw over train pairs; the negative is rejection-sampled until it
// misses the user's train items. Throws if some user has every item in train.
BprBatch sample_batch(const InteractionDataset& ds, std::uint32_t batch_size, Rng& rng);

// loss = -reduction over triples of ln sigmoid(score(u,pos) - score(u,neg)),
// reduction = mean unless bpr_sum. grad_pooled is resized/zeroed and receives
// the sparse gradient rows of the touched users and items.
double bpr_loss_and_grad(const Matrix& pooled, std::uint32_t p, const BprBatch& batch,
                         bool bpr_sum, Matrix& grad_pooled);

// Pulls the pooled gradient (plus optional per-layer penalty gradients, index
// l for layer l, empty matrices meaning zero) back to E(0) by reversing the
// propagation: adjoints flow g(l) = A_hat g(l+1) [+ g(l+1) for gccf] + t(l),
// where t(l) is the pooling adjoint plus the layer's penalty gradient.
Matrix backward_through_stack(const Matrix& grad_pooled,
                              const std::vector<Matrix>& grad_afd_layers,
                              const SparseMatrix& adj, std::uint32_t L,
                              Variant variant, Pooling pooling);

struct AdamState {
  Matrix m, v;
  std::uint64_t t = 0;
};

// Bias-corrected Adam (beta1=0.9, beta2=0.999, eps=1e-8 by default).
void adam_update(AdamState& state, Matrix& params, const Matrix& grad, double lr,
                 double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

struct EpochRecord {
  std::uint32_t epoch = 0;  // 1-based
  double bpr_loss = 0.0;    // epoch means of the per-step values
  double afd_loss = 0.0;
  double l2_loss = 0.0;
  double total_loss = 0.0;  // bpr + alpha * afd + l2
  // Penalty state of the epoch's last step, layers 1..L.
  std::vector<double> pbar_user, pbar_item, lambda_user, lambda_item;
  double valid_recall = 0.0;
  double valid_ndcg = 0.0;
  double valid_map = 0.0;
  double seconds = 0.0;  // 0 unless log_timing
};

struct TrainResult {
  Checkpoint best;  // embeddings at the best-valid-NDCG epoch
  std::uint32_t best_epoch = 0;
  double best_ndcg = 0.0;
  double best_recall = 0.0;
  double best_map = 0.0;
  std::vector<EpochRecord> history;
};

// Called after each epoch; new_best marks a fresh validation best, e0 is the
// current embedding table (so the caller can checkpoint it).
using EpochCallback =
    std::function<void(const EpochRecord&, bool new_best, const Matrix& e0)>;

// Full training run: builds the normalized adjacency, initializes embeddings,
// and runs BPR + weighted de-correlation + L2 with Adam until the validation
// NDCG stops improving for `patience` epochs (or max_epochs).
TrainResult train(const InteractionDataset& ds, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

}  // namespace afde
