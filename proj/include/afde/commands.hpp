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
#include <map>
#include <set>
#include <string>
#include <vector>

namespace afde {

// Flat `key = value` config files: '#' starts a comment, blank lines are
// skipped, duplicate keys are rejected. Values stay strings until a binder
// parses them.
std::map<std::string, std::string> parse_config_file(const std::string& path);

// Maps config-file keys onto typed option fields. The CLI registers one
// binding per flag; apply() then fills every key the user did not pass
// explicitly, so flags always win over the file.
class OptionBinder {
 public:
  void bind_u32(const std::string& key, std::uint32_t* v);
  void bind_i32(const std::string& key, std::int32_t* v);
  void bind_u64(const std::string& key, std::uint64_t* v);
  void bind_double(const std::string& key, double* v);
  void bind_bool(const std::string& key, bool* v);
  void bind_string(const std::string& key, std::string* v);
  void bind_doubles(const std::string& key, std::vector<double>* v);
  void bind_u32s(const std::string& key, std::vector<std::uint32_t>* v);

  // Applies file values for keys not in `overridden`. Unknown keys throw a
  // config error, as do unparsable values.
  void apply(const std::map<std::string, std::string>& file_values,
             const std::set<std::string>& overridden) const;

 private:
  std::map<std::string, std::function<void(const std::string&)>> setters_;
};

// Every command creates its output directory, never touches its inputs, and
// drops a config.resolved.json describing the exact settings it ran with.

struct PrepareOpts {
  std::string input;
  std::string out;
  std::string format = "bare";  // bare | header
  std::uint32_t min_user_inter = 15;
  std::uint32_t min_item_inter = 15;
  double ratio_train = 0.8;
  double ratio_valid = 0.1;
  double ratio_test = 0.1;
  std::uint64_t seed = 42;
};

// Load, k-core filter, split, save; writes stats.json with the corpus shape.
void cmd_prepare(const PrepareOpts& opts);

struct TrainOpts {
  std::string data;
  std::string out;
  std::string label = "run";
  std::string variant = "lightgcn";  // lightgcn | gccf
  std::string pooling = "auto";      // auto | mean | concat
  bool strict_pooling = true;
  std::uint32_t d = 128;
  std::uint32_t layers = 3;
  double alpha = 1e-3;
  double l2_reg = 1e-4;
  double lr = 1e-3;
  std::uint32_t batch_size = 4096;
  std::uint32_t max_epochs = 300;
  std::uint32_t patience = 10;
  std::uint32_t eval_k = 10;
  std::uint64_t seed = 42;
  std::uint32_t corr_sample = 0;
  bool adaptive_lambda = true;
  std::string bpr_reduction = "mean";  // mean | sum
  bool log_timing = false;
};

// Trains on a prepared dataset; writes history.jsonl (one record per epoch),
// checkpoint.bin at every new validation best, and valid_metrics.json.
void cmd_train(const TrainOpts& opts);

struct EvaluateOpts {
  std::string checkpoint;
  std::string data;
  std::string out;
  std::vector<std::uint32_t> k = {10};
  std::string split = "test";   // valid | test
  std::string pooling = "auto";
};

// Re-propagates the checkpoint and writes metrics.csv / metrics.json with one
// row per requested k.
void cmd_evaluate(const EvaluateOpts& opts);

struct DiagnoseOpts {
  std::string checkpoint;
  std::string data;
  std::string out;
  std::int32_t layers = -1;  // -1: use the checkpoint's depth
  std::uint32_t corr_sample = 0;  // rows per group; 0 = all
  std::uint32_t smv_sample = 0;
  std::uint64_t seed = 42;
  std::string pooling = "auto";
};

// Per-layer correlation and smoothness of the re-propagated stack
// (diagnostics.csv, layers 0..L) plus theorem1.json for the pooled matrix.
void cmd_diagnose(const DiagnoseOpts& opts);

struct SweepOpts {
  std::string data;
  std::string out;
  std::vector<double> alphas;             // empty -> {alpha}
  std::vector<std::uint32_t> layer_grid;  // empty -> {layers}
  double alpha = 1e-3;
  std::uint32_t layers = 3;
  std::string variant = "lightgcn";
  std::string pooling = "auto";
  bool strict_pooling = true;
  std::uint32_t d = 128;
  double l2_reg = 1e-4;
  double lr = 1e-3;
  std::uint32_t batch_size = 4096;
  std::uint32_t max_epochs = 300;
  std::uint32_t patience = 10;
  std::uint32_t eval_k = 10;
  std::uint64_t seed = 42;
  std::uint32_t corr_sample = 0;
  bool adaptive_lambda = true;
  std::string bpr_reduction = "mean";
  bool log_timing = false;
};

// Trains and test-evaluates every (alpha, L) grid point sequentially into
// run_a<alpha>_L<layers>/ subdirectories and aggregates summary.csv. A failed
// run becomes a nan row and the sweep continues.
void cmd_sweep(const SweepOpts& opts);

}  // namespace afde
