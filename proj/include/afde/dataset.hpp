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
#include <utility>
#include <vector>

namespace afde {

// One line of a raw interaction file: user and item tokens plus optional
// rating and timestamp columns. Missing columns default to 0.
struct RawRecord {
  std::string user;
  std::string item;
  double rating = 0.0;
  std::int64_t ts = 0;
};

struct RawInteractions {
  std::vector<RawRecord> records;
};

enum class TsvFormat { bare, header };

// Reads `user<TAB>item[<TAB>rating[<TAB>timestamp]]` lines. Duplicate
// (user, item) pairs collapse to the earliest timestamp (first occurrence on
// ties). Throws a data error naming the 1-based line number on malformed
// input, and on files with no data rows.
RawInteractions load_interactions(const std::string& path, TsvFormat format);

// Iteratively removes users with fewer than min_user_inter interactions and
// items with fewer than min_item_inter until both constraints hold. Throws if
// nothing survives.
RawInteractions filter_k_core(const RawInteractions& raw,
                              std::uint32_t min_user_inter,
                              std::uint32_t min_item_inter);

struct SplitRatios {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

// Indexed dataset: users 0..p-1, items 0..q-1, pairs split into train/valid/
// test. Each split is sorted by (user, item).
struct InteractionDataset {
  std::uint32_t p = 0;
  std::uint32_t q = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> train;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> valid;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> test;
  // Per-user train items, strictly ascending; negative sampling and the
  // evaluation mask both depend on that ordering for binary search.
  std::vector<std::vector<std::uint32_t>> train_items_by_user;
  std::vector<std::string> user_tokens;  // index -> original token
  std::vector<std::string> item_tokens;
  // Bookkeeping from the build, echoed into stats.json by the CLI.
  std::uint32_t dropped_users = 0;
  std::uint32_t moved_to_train = 0;
};

// Shuffles each user's interactions with a stream derived from `seed` and
// splits them per user with floor counts; leftover items go to train first,
// then valid. Users with fewer than 3 interactions are dropped (counted in
// dropped_users). If a surviving user or item would end up absent from train,
// one of its valid/test pairs is moved into train (counted in moved_to_train)
// so every index occurs in at least one train pair.
InteractionDataset build_dataset(const RawInteractions& raw, SplitRatios ratios,
                                 std::uint64_t seed);

// Directory layout: mapping_users.tsv, mapping_items.tsv, train.tsv,
// valid.tsv, test.tsv. Mappings are `token<TAB>index` in index order; splits
// are `user_index<TAB>item_index` in (user, item) order.
void save_dataset(const InteractionDataset& ds, const std::string& dir);
InteractionDataset load_dataset(const std::string& dir);

}  // namespace afde
