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

#include "afde/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <vector>

#include "afde/error.hpp"
#include "afde/rng.hpp"

namespace afde {
namespace {

std::vector<double> draw_latent(Rng& rng, std::size_t n, std::uint32_t k) {
  std::vector<double> out(n * k);
  const double scale = 1.0 / std::sqrt(static_cast<double>(k));
  for (double& v : out) v = rng.normal() * scale;
  return out;
}

}  // namespace

RawInteractions make_synthetic(const SynthConfig& cfg) {
  if (cfg.users == 0 || cfg.items == 0) {
    throw Error::config("synthetic generator needs users > 0 and items > 0");
  }
  if (cfg.latent_dim == 0) {
    throw Error::config("synthetic generator needs latent_dim > 0");
  }
  if (cfg.min_activity == 0) {
    throw Error::config("synthetic generator needs min_activity > 0");
  }

  Rng root(cfg.seed);
  Rng rng_user = root.stream("synth.users");
  Rng rng_item = root.stream("synth.items");
  Rng rng_act = root.stream("synth.activity");
  Rng rng_choice = root.stream("synth.choice");

  const std::uint32_t p = cfg.users;
  const std::uint32_t q = cfg.items;
  const std::uint32_t k = cfg.latent_dim;

  const std::vector<double> user_lat = draw_latent(rng_user, p, k);
  const std::vector<double> item_lat = draw_latent(rng_item, q, k);

  // Long-tail popularity: a random permutation assigns each item a rank, and
  // the log-weight decays polynomially in that rank.
  std::vector<std::uint32_t> rank(q);
  std::iota(rank.begin(), rank.end(), 0);
  rng_item.shuffle(rank);
  std::vector<double> log_pop(q);
  for (std::uint32_t i = 0; i < q; ++i) {
    log_pop[i] = -cfg.popularity_exponent * std::log(static_cast<double>(rank[i]) + 5.0);
  }

  // Every item can appear at most once per user, so activity is capped well
  // below the catalogue size.
  const std::uint32_t max_activity = std::max<std::uint32_t>(1, q / 2);

  RawInteractions raw;
  std::vector<double> score(q);
  std::vector<std::uint32_t> order(q);
  char token[16];
  std::int64_t ts = 0;

  for (std::uint32_t u = 0; u < p; ++u) {
    double extra = -cfg.mean_extra_activity * std::log(1.0 - rng_act.uniform());
    std::uint32_t n_u = cfg.min_activity + static_cast<std::uint32_t>(extra);
    n_u = std::min(n_u, max_activity);

    const double* a = &user_lat[static_cast<std::size_t>(u) * k];
    for (std::uint32_t i = 0; i < q; ++i) {
      const double* b = &item_lat[static_cast<std::size_t>(i) * k];
      double pref = 0.0;
      for (std::uint32_t c = 0; c < k; ++c) pref += a[c] * b[c];
      score[i] = cfg.preference_weight * pref +
                 cfg.popularity_weight * log_pop[i] + rng_choice.gumbel();
    }

    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + n_u, order.end(),
                      [&](std::uint32_t x, std::uint32_t y) {
                        if (score[x] != score[y]) return score[x] > score[y];
                        return x < y;
                      });
    std::sort(order.begin(), order.begin() + n_u);

    std::snprintf(token, sizeof token, "u%05u", u);
    const std::string user_token = token;
    for (std::uint32_t j = 0; j < n_u; ++j) {
      const std::uint32_t i = order[j];
      std::snprintf(token, sizeof token, "i%05u", i);
      const double* b = &item_lat[static_cast<std::size_t>(i) * k];
      double pref = 0.0;
      for (std::uint32_t c = 0; c < k; ++c) pref += a[c] * b[c];
      double rating = std::clamp(std::round(3.0 + 2.0 * pref), 1.0, 5.0);
      raw.records.push_back(RawRecord{user_token, token, rating, ts++});
    }
  }
  return raw;
}

void write_interactions_tsv(const RawInteractions& raw, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (f == nullptr) {
    throw Error::data("cannot open " + path + " for writing");
  }
  for (const RawRecord& r : raw.records) {
    std::fprintf(f, "%s\t%s\t%g\t%lld\n", r.user.c_str(), r.item.c_str(),
                 r.rating, static_cast<long long>(r.ts));
  }
  if (std::fclose(f) != 0) {
    throw Error::data("failed to write " + path);
  }
}

}  // namespace afde
