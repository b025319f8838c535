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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "afde/dataset.hpp"
#include "afde/error.hpp"
#include "afde/rng.hpp"

using namespace afde;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
  static int counter = 0;
  fs::path dir = fs::temp_directory_path() /
                 ("afde_test_dataset_" + std::to_string(::getpid()) + "_" +
                  std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

fs::path write_tmp(const std::string& content) {
  fs::path p = tmp_dir() / "in.tsv";
  std::ofstream f(p, std::ios::binary);
  f << content;
  return p;
}

// Round-robin interactions: user u interacts with items u, u+1, ..., u+k-1
// (mod q).
RawInteractions grid_raw(std::uint32_t users, std::uint32_t items_per_user,
                         std::uint32_t q) {
  RawInteractions raw;
  std::int64_t ts = 0;
  for (std::uint32_t u = 0; u < users; ++u) {
    for (std::uint32_t j = 0; j < items_per_user; ++j) {
      raw.records.push_back(RawRecord{"u" + std::to_string(u),
                                      "i" + std::to_string((u + j) % q), 1.0, ts++});
    }
  }
  return raw;
}

}  // namespace

TEST_CASE("load_interactions parses optional rating and timestamp columns") {
  fs::path p = write_tmp("alice\tbook\nbob\tfilm\t4.5\ncarol\tsong\t2\t99\n");
  RawInteractions raw = load_interactions(p.string(), TsvFormat::bare);
  REQUIRE(raw.records.size() == 3);
  CHECK(raw.records[0].user == "alice");
  CHECK(raw.records[0].item == "book");
  CHECK(raw.records[0].rating == 0.0);
  CHECK(raw.records[0].ts == 0);
  CHECK(raw.records[1].rating == 4.5);
  CHECK(raw.records[2].ts == 99);
}

TEST_CASE("load_interactions skips the header line in header format") {
  fs::path p = write_tmp("user\titem\trating\tts\nalice\tbook\t1\t2\n");
  RawInteractions raw = load_interactions(p.string(), TsvFormat::header);
  REQUIRE(raw.records.size() == 1);
  CHECK(raw.records[0].user == "alice");
}

TEST_CASE("load_interactions strips carriage returns") {
  fs::path p = write_tmp("alice\tbook\t1\t5\r\nbob\tfilm\r\n");
  RawInteractions raw = load_interactions(p.string(), TsvFormat::bare);
  REQUIRE(raw.records.size() == 2);
  CHECK(raw.records[1].item == "film");
}

TEST_CASE("duplicate pairs collapse to the earliest timestamp") {
  fs::path p = write_tmp(
      "a\tx\t1\t50\n"
      "a\tx\t2\t10\n"
      "a\tx\t3\t10\n"  // tie: first wins
      "a\ty\t4\t7\n");
  RawInteractions raw = load_interactions(p.string(), TsvFormat::bare);
  REQUIRE(raw.records.size() == 2);
  CHECK(raw.records[0].ts == 10);
  CHECK(raw.records[0].rating == 2.0);
  CHECK(raw.records[1].item == "y");
}

TEST_CASE("malformed lines are reported with their line number") {
  fs::path p = write_tmp("a\tx\nonly_one_field\n");
  CHECK_THROWS_WITH_AS(load_interactions(p.string(), TsvFormat::bare),
                       doctest::Contains("line 2"), Error);

  fs::path p2 = write_tmp("a\tx\tnot_a_number\n");
  CHECK_THROWS_WITH_AS(load_interactions(p2.string(), TsvFormat::bare),
                       doctest::Contains("line 1"), Error);

  fs::path p3 = write_tmp("a\tx\t1\t2\t3\textra\n");
  CHECK_THROWS_AS(load_interactions(p3.string(), TsvFormat::bare), Error);
}

TEST_CASE("empty input is an error") {
  fs::path p = write_tmp("");
  CHECK_THROWS_AS(load_interactions(p.string(), TsvFormat::bare), Error);
  fs::path p2 = write_tmp("user\titem\n");
  CHECK_THROWS_AS(load_interactions(p2.string(), TsvFormat::header), Error);
  CHECK_THROWS_AS(load_interactions("/nonexistent/path.tsv", TsvFormat::bare), Error);
}

TEST_CASE("k-core filtering cascades to a fixpoint") {
  RawInteractions raw;
  auto add = [&](const char* u, const char* i) {
    raw.records.push_back(RawRecord{u, i, 0.0, 0});
  };
  // u2 has one interaction; dropping it leaves item c with one, whose removal
  // must also re-check users.
  add("u1", "a");
  add("u1", "b");
  add("u3", "a");
  add("u3", "b");
  add("u3", "c");
  add("u2", "a");

  RawInteractions out = filter_k_core(raw, 2, 2);
  std::set<std::pair<std::string, std::string>> kept;
  for (const RawRecord& r : out.records) kept.insert({r.user, r.item});
  CHECK(kept == std::set<std::pair<std::string, std::string>>{
                    {"u1", "a"}, {"u1", "b"}, {"u3", "a"}, {"u3", "b"}});
}

TEST_CASE("k-core keeps everything at thresholds of one") {
  RawInteractions raw = grid_raw(4, 2, 5);
  CHECK(filter_k_core(raw, 1, 1).records.size() == raw.records.size());
}

TEST_CASE("k-core that removes everything is an error") {
  RawInteractions raw = grid_raw(3, 2, 6);
  CHECK_THROWS_AS(filter_k_core(raw, 100, 100), Error);
}

TEST_CASE("invalid split ratios are rejected") {
  RawInteractions raw = grid_raw(4, 5, 10);
  CHECK_THROWS_AS(build_dataset(raw, SplitRatios{0.5, 0.3, 0.3}, 1), Error);
  CHECK_THROWS_AS(build_dataset(raw, SplitRatios{1.2, -0.1, -0.1}, 1), Error);
  CHECK_NOTHROW(build_dataset(raw, SplitRatios{0.8, 0.1, 0.1}, 1));
}

TEST_CASE("users with fewer than three interactions are dropped and counted") {
  RawInteractions raw;
  auto add = [&](const char* u, const char* i) {
    raw.records.push_back(RawRecord{u, i, 0.0, 0});
  };
  add("keep", "a");
  add("keep", "b");
  add("keep", "c");
  add("keep", "d");
  add("tiny", "a");
  add("tiny", "b");

  InteractionDataset ds = build_dataset(raw, SplitRatios{0.8, 0.1, 0.1}, 3);
  CHECK(ds.p == 1);
  CHECK(ds.dropped_users == 1);
  CHECK(ds.user_tokens[0] == "keep");
}

TEST_CASE("per-user split counts use floors with leftovers to train first") {
  // 10 interactions at 0.6/0.2/0.2 split exactly as 6/2/2; with 5 the floors
  // are 3/1/1.
  RawInteractions raw = grid_raw(6, 10, 30);
  InteractionDataset ds = build_dataset(raw, SplitRatios{0.6, 0.2, 0.2}, 7);
  std::vector<int> train_count(ds.p, 0), valid_count(ds.p, 0), test_count(ds.p, 0);
  for (auto& [u, i] : ds.train) ++train_count[u];
  for (auto& [u, i] : ds.valid) ++valid_count[u];
  for (auto& [u, i] : ds.test) ++test_count[u];
  for (std::uint32_t u = 0; u < ds.p; ++u) {
    // Orphan repair can only move pairs into train.
    CHECK(train_count[u] >= 6);
    CHECK(valid_count[u] <= 2);
    CHECK(test_count[u] <= 2);
    CHECK(train_count[u] + valid_count[u] + test_count[u] == 10);
  }
}

TEST_CASE("splits are sorted and indices are dense") {
  // Items are u+j for u in [0,8) and j in [0,12), so 19 distinct indices.
  RawInteractions raw = grid_raw(8, 12, 20);
  InteractionDataset ds = build_dataset(raw, SplitRatios{0.8, 0.1, 0.1}, 5);
  CHECK(ds.p == 8);
  CHECK(ds.q == 19);
  CHECK(std::is_sorted(ds.train.begin(), ds.train.end()));
  CHECK(std::is_sorted(ds.valid.begin(), ds.valid.end()));
  CHECK(std::is_sorted(ds.test.begin(), ds.test.end()));
  for (auto& [u, i] : ds.train) {
    CHECK(u < ds.p);
    CHECK(i < ds.q);
  }
  REQUIRE(ds.train_items_by_user.size() == ds.p);
  for (const auto& items : ds.train_items_by_user) {
    CHECK(std::is_sorted(items.begin(), items.end()));
  }
  // train_items_by_user mirrors the train pairs.
  std::size_t total = 0;
  for (const auto& items : ds.train_items_by_user) total += items.size();
  CHECK(total == ds.train.size());
}

TEST_CASE("every user and item appears in at least one train pair") {
  Rng rng(99);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    RawInteractions raw;
    const std::uint32_t users = 12, items = 15;
    for (std::uint32_t u = 0; u < users; ++u) {
      const std::uint32_t count = 3 + static_cast<std::uint32_t>(rng.uniform_int(6));
      std::set<std::uint32_t> picked;
      while (picked.size() < count) {
        picked.insert(static_cast<std::uint32_t>(rng.uniform_int(items)));
      }
      for (std::uint32_t i : picked) {
        raw.records.push_back(
            RawRecord{"u" + std::to_string(u), "i" + std::to_string(i), 0.0, 0});
      }
    }
    InteractionDataset ds = build_dataset(raw, SplitRatios{0.6, 0.2, 0.2}, seed);
    std::vector<int> user_train(ds.p, 0), item_train(ds.q, 0);
    for (auto& [u, i] : ds.train) {
      ++user_train[u];
      ++item_train[i];
    }
    for (int c : user_train) CHECK(c > 0);
    for (int c : item_train) CHECK(c > 0);
  }
}

TEST_CASE("splits are reproducible by seed") {
  RawInteractions raw = grid_raw(10, 9, 25);
  InteractionDataset a = build_dataset(raw, SplitRatios{0.8, 0.1, 0.1}, 42);
  InteractionDataset b = build_dataset(raw, SplitRatios{0.8, 0.1, 0.1}, 42);
  CHECK(a.train == b.train);
  CHECK(a.valid == b.valid);
  CHECK(a.test == b.test);

  InteractionDataset c = build_dataset(raw, SplitRatios{0.8, 0.1, 0.1}, 43);
  CHECK(a.train != c.train);
}

TEST_CASE("save and load round-trip the dataset") {
  RawInteractions raw = grid_raw(9, 11, 18);
  InteractionDataset ds = build_dataset(raw, SplitRatios{0.7, 0.2, 0.1}, 13);
  fs::path dir = tmp_dir();
  save_dataset(ds, dir.string());

  InteractionDataset back = load_dataset(dir.string());
  CHECK(back.p == ds.p);
  CHECK(back.q == ds.q);
  CHECK(back.train == ds.train);
  CHECK(back.valid == ds.valid);
  CHECK(back.test == ds.test);
  CHECK(back.train_items_by_user == ds.train_items_by_user);
  CHECK(back.user_tokens == ds.user_tokens);
  CHECK(back.item_tokens == ds.item_tokens);
}

TEST_CASE("save is byte-stable across repeated calls") {
  RawInteractions raw = grid_raw(5, 10, 12);
  InteractionDataset ds = build_dataset(raw, SplitRatios{0.6, 0.2, 0.2}, 2);
  fs::path d1 = tmp_dir(), d2 = tmp_dir();
  save_dataset(ds, d1.string());
  save_dataset(ds, d2.string());
  for (const char* name : {"mapping_users.tsv", "mapping_items.tsv", "train.tsv",
                           "valid.tsv", "test.tsv"}) {
    std::ifstream f1(d1 / name, std::ios::binary), f2(d2 / name, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), {});
    std::string s2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(s1 == s2);
    CHECK(!s1.empty());
  }
}

TEST_CASE("load_dataset rejects out-of-range indices") {
  RawInteractions raw = grid_raw(4, 6, 8);
  InteractionDataset ds = build_dataset(raw, SplitRatios{0.8, 0.1, 0.1}, 1);
  fs::path dir = tmp_dir();
  save_dataset(ds, dir.string());
  {
    std::ofstream f(dir / "train.tsv", std::ios::binary | std::ios::app);
    f << "0\t9999\n";
  }
  CHECK_THROWS_AS(load_dataset(dir.string()), Error);
}

TEST_CASE("load_dataset on a missing directory is a data error") {
  try {
    load_dataset("/no/such/dir");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::data);
  }
}
