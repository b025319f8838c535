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

#include "afde/dataset.hpp"

namespace afde {

// Deterministic implicit-feedback generator for experiments without a real
// dataset. Users and items get low-rank latent vectors, items a long-tail
// popularity weight; each user picks its interactions by Gumbel top-k over
// preference + popularity, so the result has learnable structure and a skewed
// item distribution.
struct SynthConfig {
  std::uint32_t users = 800;
  std::uint32_t items = 1000;
  std::uint32_t min_activity = 20;    // interactions per user: min + Exp tail
  double mean_extra_activity = 60.0;
  std::uint32_t latent_dim = 8;
  double popularity_exponent = 0.8;   // item weight ~ rank^-exponent
  double popularity_weight = 1.2;
  double preference_weight = 4.0;
  std::uint64_t seed = 7;
};

RawInteractions make_synthetic(const SynthConfig& cfg);

// `user<TAB>item<TAB>rating<TAB>timestamp` rows, the format cmd_prepare reads.
void write_interactions_tsv(const RawInteractions& raw, const std::string& path);

}  // namespace afde
