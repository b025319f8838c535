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

#include "afde/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "afde/error.hpp"
#include "afde/rng.hpp"

namespace afde {
namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

bool parse_double(std::string_view s, double& out) {
  const char* end = s.data() + s.size();
  auto res = std::from_chars(s.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

bool parse_i64(std::string_view s, std::int64_t& out) {
  const char* end = s.data() + s.size();
  auto res = std::from_chars(s.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

bool parse_u32(std::string_view s, std::uint32_t& out) {
  const char* end = s.data() + s.size();
  auto res = std::from_chars(s.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

Error malformed(const std::string& path, std::size_t line_no, const std::string& why) {
  return Error::data(path + " line " + std::to_string(line_no) + ": " + why);
}

}  // namespace

RawInteractions load_interactions(const std::string& path, TsvFormat format) {
  std::ifstream in(path);
  if (!in) throw Error::data("cannot open " + path);

  RawInteractions raw;
  std::unordered_map<std::string, std::size_t> seen;  // "user\titem" -> record index
  std::string line;
  std::size_t line_no = 0;
  std::size_t data_rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && format == TsvFormat::header) continue;
    if (line.empty()) continue;

    auto fields = split_tabs(line);
    if (fields.size() < 2 || fields.size() > 4)
      throw malformed(path, line_no, "expected 2 to 4 tab-separated fields");
    if (fields[0].empty() || fields[1].empty())
      throw malformed(path, line_no, "empty user or item token");

    RawRecord rec;
    rec.user = std::string(fields[0]);
    rec.item = std::string(fields[1]);
    if (fields.size() >= 3 && !parse_double(fields[2], rec.rating))
      throw malformed(path, line_no, "bad rating value");
    if (fields.size() >= 4 && !parse_i64(fields[3], rec.ts))
      throw malformed(path, line_no, "bad timestamp value");
    ++data_rows;

    std::string key = rec.user + '\t' + rec.item;
    auto it = seen.find(key);
    if (it == seen.end()) {
      seen.emplace(std::move(key), raw.records.size());
      raw.records.push_back(std::move(rec));
    } else if (rec.ts < raw.records[it->second].ts) {
      // Keep the earliest interaction; first occurrence wins ties.
      raw.records[it->second] = std::move(rec);
    }
  }
  if (data_rows == 0) throw Error::data(path + ": no interaction rows");
  return raw;
}

RawInteractions filter_k_core(const RawInteractions& raw,
                              std::uint32_t min_user_inter,
                              std::uint32_t min_item_inter) {
  std::vector<char> keep(raw.records.size(), 1);
  bool changed = true;
  while (changed) {
    changed = false;
    std::unordered_map<std::string, std::uint32_t> udeg, ideg;
    for (std::size_t i = 0; i < raw.records.size(); ++i) {
      if (!keep[i]) continue;
      ++udeg[raw.records[i].user];
      ++ideg[raw.records[i].item];
    }
    for (std::size_t i = 0; i < raw.records.size(); ++i) {
      if (!keep[i]) continue;
      if (udeg[raw.records[i].user] < min_user_inter ||
          ideg[raw.records[i].item] < min_item_inter) {
        keep[i] = 0;
        changed = true;
      }
    }
  }
  RawInteractions out;
  for (std::size_t i = 0; i < raw.records.size(); ++i)
    if (keep[i]) out.records.push_back(raw.records[i]);
  if (out.records.empty())
    throw Error::data("no interactions left after k-core filtering (" +
                      std::to_string(min_user_inter) + ", " +
                      std::to_string(min_item_inter) + ")");
  return out;
}

InteractionDataset build_dataset(const RawInteractions& raw, SplitRatios ratios,
                                 std::uint64_t seed) {
  if (ratios.train < 0.0 || ratios.valid < 0.0 || ratios.test < 0.0 ||
      std::fabs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-9) {
    throw Error::config("split ratios must be non-negative and sum to 1");
  }

  // Group record indices per user, keeping first-appearance order of users.
  std::vector<std::string> user_order;
  std::unordered_map<std::string, std::vector<std::size_t>> by_user;
  for (std::size_t i = 0; i < raw.records.size(); ++i) {
    auto [it, inserted] = by_user.try_emplace(raw.records[i].user);
    if (inserted) user_order.push_back(raw.records[i].user);
    it->second.push_back(i);
  }

  InteractionDataset ds;
  std::unordered_map<std::string, std::uint32_t> item_index;
  Rng rng = Rng(seed).stream("split");

  // 0 = train, 1 = valid, 2 = test per record.
  std::vector<std::uint8_t> bucket(raw.records.size(), 0);
  std::vector<std::uint32_t> user_of(raw.records.size(), 0);
  std::vector<std::size_t> kept_records;

  for (const std::string& utok : user_order) {
    auto& recs = by_user[utok];
    if (recs.size() < 3) {
      ++ds.dropped_users;
      continue;
    }
    const std::uint32_t u = static_cast<std::uint32_t>(ds.user_tokens.size());
    ds.user_tokens.push_back(utok);

    std::vector<std::size_t> order = recs;
    rng.shuffle(order);

    const std::size_t n = order.size();
    std::size_t n_train = static_cast<std::size_t>(ratios.train * static_cast<double>(n));
    std::size_t n_valid = static_cast<std::size_t>(ratios.valid * static_cast<double>(n));
    std::size_t n_test = static_cast<std::size_t>(ratios.test * static_cast<double>(n));
    std::size_t leftover = n - (n_train + n_valid + n_test);
    // Leftover pairs go to train first, then valid, then test.
    while (leftover > 0) {
      ++n_train;
      --leftover;
      if (leftover > 0) { ++n_valid; --leftover; }
      if (leftover > 0) { ++n_test; --leftover; }
    }

    for (std::size_t k = 0; k < n; ++k) {
      std::size_t rec = order[k];
      bucket[rec] = k < n_train ? 0 : (k < n_train + n_valid ? 1 : 2);
      user_of[rec] = u;
      kept_records.push_back(rec);
      const std::string& itok = raw.records[rec].item;
      if (item_index.try_emplace(itok, static_cast<std::uint32_t>(ds.item_tokens.size())).second)
        ds.item_tokens.push_back(itok);
    }
  }
  if (ds.user_tokens.empty()) throw Error::data("no users with at least 3 interactions");

  ds.p = static_cast<std::uint32_t>(ds.user_tokens.size());
  ds.q = static_cast<std::uint32_t>(ds.item_tokens.size());

  std::sort(kept_records.begin(), kept_records.end(),
            [&](std::size_t a, std::size_t b) {
              if (user_of[a] != user_of[b]) return user_of[a] < user_of[b];
              return item_index[raw.records[a].item] < item_index[raw.records[b].item];
            });

  std::vector<std::uint32_t> item_train_count(ds.q, 0);
  std::vector<std::uint32_t> user_train_count(ds.p, 0);
  for (std::size_t rec : kept_records) {
    if (bucket[rec] == 0) {
      ++item_train_count[item_index[raw.records[rec].item]];
      ++user_train_count[user_of[rec]];
    }
  }
  // Re-indexing must leave no user or item outside train: pull one held-out
  // pair back into train for any that would otherwise be orphaned. Scanning
  // valid before test in (user, item) order keeps this deterministic.
  for (int pass = 0; pass < 2; ++pass) {
    const std::uint8_t from = pass == 0 ? 1 : 2;
    for (std::size_t rec : kept_records) {
      if (bucket[rec] != from) continue;
      const std::uint32_t u = user_of[rec];
      const std::uint32_t i = item_index[raw.records[rec].item];
      if (item_train_count[i] == 0 || user_train_count[u] == 0) {
        bucket[rec] = 0;
        ++item_train_count[i];
        ++user_train_count[u];
        ++ds.moved_to_train;
      }
    }
  }

  ds.train_items_by_user.resize(ds.p);
  for (std::size_t rec : kept_records) {
    const std::uint32_t u = user_of[rec];
    const std::uint32_t i = item_index[raw.records[rec].item];
    switch (bucket[rec]) {
      case 0:
        ds.train.emplace_back(u, i);
        ds.train_items_by_user[u].push_back(i);
        break;
      case 1:
        ds.valid.emplace_back(u, i);
        break;
      default:
        ds.test.emplace_back(u, i);
    }
  }
  return ds;
}

namespace {

void write_pairs(const std::string& path,
                 const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error::data("cannot write " + path);
  for (const auto& [u, i] : pairs) out << u << '\t' << i << '\n';
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> read_pairs(
    const std::string& path, std::uint32_t p, std::uint32_t q) {
  std::ifstream in(path);
  if (!in) throw Error::data("cannot open " + path);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    std::uint32_t u, i;
    if (fields.size() != 2 || !parse_u32(fields[0], u) || !parse_u32(fields[1], i))
      throw malformed(path, line_no, "expected user_index<TAB>item_index");
    if (u >= p || i >= q)
      throw malformed(path, line_no, "index out of range");
    pairs.emplace_back(u, i);
  }
  return pairs;
}

std::vector<std::string> read_mapping(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error::data("cannot open " + path);
  std::vector<std::string> tokens;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    std::uint32_t idx;
    if (fields.size() != 2 || fields[0].empty() || !parse_u32(fields[1], idx))
      throw malformed(path, line_no, "expected token<TAB>index");
    if (idx != tokens.size())
      throw malformed(path, line_no, "indices must be dense and in order");
    tokens.emplace_back(fields[0]);
  }
  if (tokens.empty()) throw Error::data(path + ": empty mapping");
  return tokens;
}

}  // namespace

void save_dataset(const InteractionDataset& ds, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  {
    std::ofstream out(base / "mapping_users.tsv", std::ios::binary);
    if (!out) throw Error::data("cannot write " + (base / "mapping_users.tsv").string());
    for (std::size_t i = 0; i < ds.user_tokens.size(); ++i)
      out << ds.user_tokens[i] << '\t' << i << '\n';
  }
  {
    std::ofstream out(base / "mapping_items.tsv", std::ios::binary);
    if (!out) throw Error::data("cannot write " + (base / "mapping_items.tsv").string());
    for (std::size_t i = 0; i < ds.item_tokens.size(); ++i)
      out << ds.item_tokens[i] << '\t' << i << '\n';
  }
  write_pairs((base / "train.tsv").string(), ds.train);
  write_pairs((base / "valid.tsv").string(), ds.valid);
  write_pairs((base / "test.tsv").string(), ds.test);
}

InteractionDataset load_dataset(const std::string& dir) {
  const std::filesystem::path base(dir);
  InteractionDataset ds;
  ds.user_tokens = read_mapping((base / "mapping_users.tsv").string());
  ds.item_tokens = read_mapping((base / "mapping_items.tsv").string());
  ds.p = static_cast<std::uint32_t>(ds.user_tokens.size());
  ds.q = static_cast<std::uint32_t>(ds.item_tokens.size());
  ds.train = read_pairs((base / "train.tsv").string(), ds.p, ds.q);
  ds.valid = read_pairs((base / "valid.tsv").string(), ds.p, ds.q);
  ds.test = read_pairs((base / "test.tsv").string(), ds.p, ds.q);
  if (ds.train.empty()) throw Error::data(dir + ": train split is empty");
  ds.train_items_by_user.resize(ds.p);
  for (const auto& [u, i] : ds.train) ds.train_items_by_user[u].push_back(i);
  for (auto& items : ds.train_items_by_user) std::sort(items.begin(), items.end());
  return ds;
}

}  // namespace afde
