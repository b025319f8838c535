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

#include "afde/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include <json.hpp>

#include "afde/afd.hpp"
#include "afde/dataset.hpp"
#include "afde/error.hpp"
#include "afde/metrics.hpp"
#include "afde/model.hpp"
#include "afde/rng.hpp"
#include "afde/sparse.hpp"
#include "afde/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace afde {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double_value(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error::config("config key '" + key + "': cannot parse '" + s + "' as a number");
  }
}

std::uint64_t parse_u64_value(const std::string& key, const std::string& s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw Error::config("config key '" + key + "': cannot parse '" + s +
                        "' as an unsigned integer");
  }
  return v;
}

std::int64_t parse_i64_value(const std::string& key, const std::string& s) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw Error::config("config key '" + key + "': cannot parse '" + s +
                        "' as an integer");
  }
  return v;
}

bool parse_bool_value(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw Error::config("config key '" + key + "': cannot parse '" + s + "' as a bool");
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(s);
  while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
  return out;
}

// Shortest round-trip decimal text for doubles; CSV and JSON therefore agree
// bit for bit on every value.
std::string fmt_num(double x) {
  if (!std::isfinite(x)) return "nan";
  return json(x).dump();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error::data("cannot open " + path + " for writing");
  f << content;
  f.flush();
  if (!f) throw Error::data("failed to write " + path);
}

void require_path(const std::string& value, const char* flag) {
  if (value.empty()) {
    throw Error::config(std::string("missing required option --") + flag);
  }
}

TsvFormat format_from_string(const std::string& s) {
  if (s == "bare") return TsvFormat::bare;
  if (s == "header") return TsvFormat::header;
  throw Error::config("format must be bare or header (got '" + s + "')");
}

Split split_from_string(const std::string& s) {
  if (s == "valid") return Split::valid;
  if (s == "test") return Split::test;
  throw Error::config("split must be valid or test (got '" + s + "')");
}

bool reduction_is_sum(const std::string& s) {
  if (s == "mean") return false;
  if (s == "sum") return true;
  throw Error::config("bpr_reduction must be mean or sum (got '" + s + "')");
}

Pooling resolve_pooling(const std::string& s, Variant v, bool strict) {
  if (s == "auto") return default_pooling(v);
  Pooling p;
  if (s == "mean") {
    p = Pooling::mean;
  } else if (s == "concat") {
    p = Pooling::concat;
  } else {
    throw Error::config("pooling must be auto, mean, or concat (got '" + s + "')");
  }
  if (strict && p != default_pooling(v)) {
    throw Error::config(std::string("pooling ") + to_string(p) +
                        " contradicts the " + to_string(v) +
                        " default; set strict_pooling=false to override");
  }
  return p;
}

TrainConfig train_config_from(const TrainOpts& o) {
  TrainConfig cfg;
  cfg.d = o.d;
  cfg.layers = o.layers;
  cfg.variant = variant_from_string(o.variant);
  cfg.pooling = resolve_pooling(o.pooling, cfg.variant, o.strict_pooling);
  cfg.alpha = o.alpha;
  cfg.l2_reg = o.l2_reg;
  cfg.lr = o.lr;
  cfg.batch_size = o.batch_size;
  cfg.max_epochs = o.max_epochs;
  cfg.patience = o.patience;
  cfg.eval_k = o.eval_k;
  cfg.seed = o.seed;
  cfg.corr_sample = o.corr_sample;
  cfg.adaptive_lambda = o.adaptive_lambda;
  cfg.bpr_sum = reduction_is_sum(o.bpr_reduction);
  cfg.log_timing = o.log_timing;
  return cfg;
}

json train_config_json(const TrainConfig& cfg, const std::string& data,
                       const std::string& out, const std::string& label) {
  return json{{"adaptive_lambda", cfg.adaptive_lambda},
              {"alpha", cfg.alpha},
              {"batch_size", cfg.batch_size},
              {"bpr_reduction", cfg.bpr_sum ? "sum" : "mean"},
              {"corr_sample", cfg.corr_sample},
              {"d", cfg.d},
              {"data", data},
              {"eval_k", cfg.eval_k},
              {"l2_reg", cfg.l2_reg},
              {"label", label},
              {"layers", cfg.layers},
              {"log_timing", cfg.log_timing},
              {"lr", cfg.lr},
              {"max_epochs", cfg.max_epochs},
              {"out", out},
              {"patience", cfg.patience},
              {"pooling", to_string(cfg.pooling)},
              {"seed", cfg.seed},
              {"variant", to_string(cfg.variant)}};
}

json epoch_json(const EpochRecord& r) {
  return json{{"epoch", r.epoch},
              {"bpr_loss", r.bpr_loss},
              {"afd_loss", r.afd_loss},
              {"l2_loss", r.l2_loss},
              {"total_loss", r.total_loss},
              {"pbar_user", r.pbar_user},
              {"pbar_item", r.pbar_item},
              {"lambda_user", r.lambda_user},
              {"lambda_item", r.lambda_item},
              {"valid_recall", r.valid_recall},
              {"valid_ndcg", r.valid_ndcg},
              {"valid_map", r.valid_map},
              {"seconds", r.seconds}};
}

// Trains into `dir`, streaming history.jsonl and checkpointing every new
// validation best; finishes with valid_metrics.json.
TrainResult run_training(const InteractionDataset& ds, const TrainConfig& cfg,
                         const std::string& dir) {
  const std::string hist_path = dir + "/history.jsonl";
  std::ofstream hist(hist_path, std::ios::binary | std::ios::trunc);
  if (!hist) throw Error::data("cannot open " + hist_path + " for writing");

  TrainResult res =
      train(ds, cfg, [&](const EpochRecord& r, bool new_best, const Matrix& e0) {
        hist << epoch_json(r).dump() << '\n';
        hist.flush();
        if (new_best) {
          Checkpoint ck;
          ck.e0 = e0;
          ck.p = ds.p;
          ck.q = ds.q;
          ck.d = cfg.d;
          ck.L = cfg.layers;
          ck.variant = cfg.variant;
          save_checkpoint(dir + "/checkpoint.bin", ck);
        }
      });
  if (!hist) throw Error::data("failed to write " + hist_path);
  hist.close();

  json vm{{"best_epoch", res.best_epoch},
          {"epochs_trained", res.history.size()},
          {"k", cfg.eval_k},
          {"valid_map", res.best_map},
          {"valid_ndcg", res.best_ndcg},
          {"valid_recall", res.best_recall}};
  write_file(dir + "/valid_metrics.json", vm.dump(2) + "\n");
  return res;
}

void check_compat(const Checkpoint& ck, const InteractionDataset& ds,
                  const std::string& ck_path) {
  if (ck.p != ds.p || ck.q != ds.q) {
    throw Error::data("checkpoint " + ck_path + " does not fit the dataset: " +
                      "checkpoint has p=" + std::to_string(ck.p) +
                      " q=" + std::to_string(ck.q) + " d=" + std::to_string(ck.d) +
                      ", dataset has p=" + std::to_string(ds.p) +
                      " q=" + std::to_string(ds.q));
  }
}

// `sample` row indices from [lo, hi), ascending; 0 or an over-large sample
// means the whole range.
std::vector<std::uint32_t> pick_rows(std::uint32_t lo, std::uint32_t hi,
                                     std::uint32_t sample, Rng& rng) {
  const std::uint32_t span = hi - lo;
  std::vector<std::uint32_t> ids(span);
  std::iota(ids.begin(), ids.end(), lo);
  if (sample == 0 || sample >= span) return ids;
  for (std::uint32_t i = 0; i < sample; ++i) {
    std::uint32_t j = i + static_cast<std::uint32_t>(rng.uniform_int(span - i));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(sample);
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error::config("cannot open config file " + path);
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (std::size_t hash = line.find('#'); hash != std::string::npos) {
      line.resize(hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error::config(path + ":" + std::to_string(lineno) +
                          ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw Error::config(path + ":" + std::to_string(lineno) + ": empty key");
    }
    if (!out.emplace(key, value).second) {
      throw Error::config(path + ":" + std::to_string(lineno) +
                          ": duplicate key '" + key + "'");
    }
  }
  return out;
}

void OptionBinder::bind_u32(const std::string& key, std::uint32_t* v) {
  setters_[key] = [key, v](const std::string& s) {
    std::uint64_t x = parse_u64_value(key, s);
    if (x > 0xffffffffULL) {
      throw Error::config("config key '" + key + "': value out of range");
    }
    *v = static_cast<std::uint32_t>(x);
  };
}

void OptionBinder::bind_i32(const std::string& key, std::int32_t* v) {
  setters_[key] = [key, v](const std::string& s) {
    std::int64_t x = parse_i64_value(key, s);
    if (x < INT32_MIN || x > INT32_MAX) {
      throw Error::config("config key '" + key + "': value out of range");
    }
    *v = static_cast<std::int32_t>(x);
  };
}

void OptionBinder::bind_u64(const std::string& key, std::uint64_t* v) {
  setters_[key] = [key, v](const std::string& s) { *v = parse_u64_value(key, s); };
}

void OptionBinder::bind_double(const std::string& key, double* v) {
  setters_[key] = [key, v](const std::string& s) { *v = parse_double_value(key, s); };
}

void OptionBinder::bind_bool(const std::string& key, bool* v) {
  setters_[key] = [key, v](const std::string& s) { *v = parse_bool_value(key, s); };
}

void OptionBinder::bind_string(const std::string& key, std::string* v) {
  setters_[key] = [key, v](const std::string& s) { *v = s; };
}

void OptionBinder::bind_doubles(const std::string& key, std::vector<double>* v) {
  setters_[key] = [key, v](const std::string& s) {
    std::vector<double> out;
    for (const std::string& part : split_commas(s)) {
      out.push_back(parse_double_value(key, part));
    }
    *v = std::move(out);
  };
}

void OptionBinder::bind_u32s(const std::string& key, std::vector<std::uint32_t>* v) {
  setters_[key] = [key, v](const std::string& s) {
    std::vector<std::uint32_t> out;
    for (const std::string& part : split_commas(s)) {
      std::uint64_t x = parse_u64_value(key, part);
      if (x > 0xffffffffULL) {
        throw Error::config("config key '" + key + "': value out of range");
      }
      out.push_back(static_cast<std::uint32_t>(x));
    }
    *v = std::move(out);
  };
}

void OptionBinder::apply(const std::map<std::string, std::string>& file_values,
                         const std::set<std::string>& overridden) const {
  for (const auto& [key, value] : file_values) {
    auto it = setters_.find(key);
    if (it == setters_.end()) {
      throw Error::config("unknown config key '" + key + "'");
    }
    if (overridden.count(key) != 0) continue;  // flags win
    it->second(value);
  }
}

void cmd_prepare(const PrepareOpts& opts) {
  require_path(opts.input, "input");
  require_path(opts.out, "out");
  TsvFormat fmt = format_from_string(opts.format);
  SplitRatios ratios{opts.ratio_train, opts.ratio_valid, opts.ratio_test};

  RawInteractions raw = load_interactions(opts.input, fmt);
  RawInteractions filtered =
      filter_k_core(raw, opts.min_user_inter, opts.min_item_inter);
  InteractionDataset ds = build_dataset(filtered, ratios, opts.seed);

  fs::create_directories(opts.out);
  save_dataset(ds, opts.out);

  const std::uint64_t total = ds.train.size() + ds.valid.size() + ds.test.size();
  const double cells = static_cast<double>(ds.p) * static_cast<double>(ds.q);
  json stats{{"density", cells > 0 ? static_cast<double>(total) / cells : 0.0},
             {"dropped_users", ds.dropped_users},
             {"items", ds.q},
             {"moved_to_train", ds.moved_to_train},
             {"test", ds.test.size()},
             {"total", total},
             {"train", ds.train.size()},
             {"users", ds.p},
             {"valid", ds.valid.size()}};
  write_file(opts.out + "/stats.json", stats.dump(2) + "\n");

  json resolved{{"format", opts.format},
                {"input", opts.input},
                {"min_item_inter", opts.min_item_inter},
                {"min_user_inter", opts.min_user_inter},
                {"out", opts.out},
                {"ratio_test", opts.ratio_test},
                {"ratio_train", opts.ratio_train},
                {"ratio_valid", opts.ratio_valid},
                {"seed", opts.seed}};
  write_file(opts.out + "/config.resolved.json", resolved.dump(2) + "\n");
}

void cmd_train(const TrainOpts& opts) {
  require_path(opts.data, "data");
  require_path(opts.out, "out");
  TrainConfig cfg = train_config_from(opts);
  cfg.validate();

  InteractionDataset ds = load_dataset(opts.data);
  fs::create_directories(opts.out);
  write_file(opts.out + "/config.resolved.json",
             train_config_json(cfg, opts.data, opts.out, opts.label).dump(2) + "\n");
  run_training(ds, cfg, opts.out);
}

void cmd_evaluate(const EvaluateOpts& opts) {
  require_path(opts.checkpoint, "checkpoint");
  require_path(opts.data, "data");
  require_path(opts.out, "out");
  if (opts.k.empty()) throw Error::config("need at least one --k value");
  for (std::uint32_t k : opts.k) {
    if (k == 0) throw Error::config("--k values must be positive");
  }
  Split split = split_from_string(opts.split);

  Checkpoint ck = load_checkpoint(opts.checkpoint);
  InteractionDataset ds = load_dataset(opts.data);
  check_compat(ck, ds, opts.checkpoint);
  Pooling pooling = resolve_pooling(opts.pooling, ck.variant, false);

  SparseMatrix adj = normalize_symmetric(build_adjacency(ds));
  LayerStack stack = propagate(adj, ck.e0, ck.L, ck.variant, ds.p);
  Matrix pooled = pool(stack, pooling);

  std::string csv = "k,recall,ndcg,map,users\n";
  json rows = json::array();
  for (std::uint32_t k : opts.k) {
    MetricsReport r = evaluate(pooled, ds, split, k);
    csv += std::to_string(r.k) + "," + fmt_num(r.recall) + "," + fmt_num(r.ndcg) +
           "," + fmt_num(r.map) + "," + std::to_string(r.users_evaluated) + "\n";
    rows.push_back(json{{"k", r.k},
                        {"map", r.map},
                        {"ndcg", r.ndcg},
                        {"recall", r.recall},
                        {"users", r.users_evaluated}});
  }

  fs::create_directories(opts.out);
  write_file(opts.out + "/metrics.csv", csv);
  json metrics{{"results", rows}, {"split", opts.split}};
  write_file(opts.out + "/metrics.json", metrics.dump(2) + "\n");

  json resolved{{"checkpoint", opts.checkpoint}, {"data", opts.data},
                {"k", opts.k},                   {"out", opts.out},
                {"pooling", to_string(pooling)}, {"split", opts.split}};
  write_file(opts.out + "/config.resolved.json", resolved.dump(2) + "\n");
}

void cmd_diagnose(const DiagnoseOpts& opts) {
  require_path(opts.checkpoint, "checkpoint");
  require_path(opts.data, "data");
  require_path(opts.out, "out");

  Checkpoint ck = load_checkpoint(opts.checkpoint);
  InteractionDataset ds = load_dataset(opts.data);
  check_compat(ck, ds, opts.checkpoint);
  const std::uint32_t L =
      opts.layers < 0 ? ck.L : static_cast<std::uint32_t>(opts.layers);
  Pooling pooling = resolve_pooling(opts.pooling, ck.variant, false);

  SparseMatrix adj = normalize_symmetric(build_adjacency(ds));
  LayerStack stack = propagate(adj, ck.e0, L, ck.variant, ds.p);

  const std::uint32_t p = ds.p;
  const std::uint32_t n = ds.p + ds.q;
  Rng root(opts.seed);
  Rng rng_corr = root.stream("diag.corr");
  Rng rng_smv = root.stream("diag.smv");
  const auto cu = pick_rows(0, p, opts.corr_sample, rng_corr);
  const auto ci = pick_rows(p, n, opts.corr_sample, rng_corr);
  const auto ca = pick_rows(0, n, opts.corr_sample, rng_corr);
  const auto su = pick_rows(0, p, opts.smv_sample, rng_smv);
  const auto si = pick_rows(p, n, opts.smv_sample, rng_smv);
  const auto sa = pick_rows(0, n, opts.smv_sample, rng_smv);

  std::string csv = "layer,corr_user,corr_item,corr_all,smv_user,smv_item,smv_all\n";
  for (std::uint32_t l = 0; l <= L; ++l) {
    const Matrix& m = stack.layers[l];
    csv += std::to_string(l) + "," + fmt_num(corr_metric(m, cu)) + "," +
           fmt_num(corr_metric(m, ci)) + "," + fmt_num(corr_metric(m, ca)) + "," +
           fmt_num(smv_metric(m, su)) + "," + fmt_num(smv_metric(m, si)) + "," +
           fmt_num(smv_metric(m, sa)) + "\n";
  }

  fs::create_directories(opts.out);
  write_file(opts.out + "/diagnostics.csv", csv);

  json th;
  try {
    Matrix pooled = pool(stack, pooling);
    StandardizeResult sr = double_standardize(pooled, 1e-10, 500);
    double resid = theorem1_residual(sr.m, false);
    th = json{{"converged", sr.converged},
              {"identity_residual", resid},
              {"iterations", sr.iters},
              {"standardization_residual", sr.residual}};
  } catch (const Error& e) {
    th = json{{"error", e.what()}};
  }
  write_file(opts.out + "/theorem1.json", th.dump(2) + "\n");

  json resolved{{"checkpoint", opts.checkpoint},
                {"corr_sample", opts.corr_sample},
                {"data", opts.data},
                {"layers", L},
                {"out", opts.out},
                {"pooling", to_string(pooling)},
                {"seed", opts.seed},
                {"smv_sample", opts.smv_sample}};
  write_file(opts.out + "/config.resolved.json", resolved.dump(2) + "\n");
}

void cmd_sweep(const SweepOpts& opts) {
  require_path(opts.data, "data");
  require_path(opts.out, "out");
  const std::vector<double> alphas =
      opts.alphas.empty() ? std::vector<double>{opts.alpha} : opts.alphas;
  const std::vector<std::uint32_t> layer_grid =
      opts.layer_grid.empty() ? std::vector<std::uint32_t>{opts.layers}
                              : opts.layer_grid;

  TrainOpts base;
  base.variant = opts.variant;
  base.pooling = opts.pooling;
  base.strict_pooling = opts.strict_pooling;
  base.d = opts.d;
  base.l2_reg = opts.l2_reg;
  base.lr = opts.lr;
  base.batch_size = opts.batch_size;
  base.max_epochs = opts.max_epochs;
  base.patience = opts.patience;
  base.eval_k = opts.eval_k;
  base.seed = opts.seed;
  base.corr_sample = opts.corr_sample;
  base.adaptive_lambda = opts.adaptive_lambda;
  base.bpr_reduction = opts.bpr_reduction;
  base.log_timing = opts.log_timing;

  InteractionDataset ds = load_dataset(opts.data);
  SparseMatrix adj = normalize_symmetric(build_adjacency(ds));
  fs::create_directories(opts.out);

  {
    TrainOpts probe = base;
    probe.alpha = alphas.front();
    probe.layers = layer_grid.front();
    TrainConfig cfg = train_config_from(probe);
    json resolved = train_config_json(cfg, opts.data, opts.out, "sweep");
    resolved.erase("alpha");
    resolved.erase("layers");
    resolved.erase("label");
    resolved["alphas"] = alphas;
    resolved["layer_grid"] = layer_grid;
    write_file(opts.out + "/config.resolved.json", resolved.dump(2) + "\n");
  }

  std::string csv = "alpha,L,recall,ndcg,map,epochs_to_best,final_corr\n";
  for (double alpha : alphas) {
    for (std::uint32_t L : layer_grid) {
      char abuf[32];
      std::snprintf(abuf, sizeof abuf, "%g", alpha);
      const std::string run_dir =
          opts.out + "/run_a" + abuf + "_L" + std::to_string(L);
      const std::string row_head = std::string(abuf) + "," + std::to_string(L);
      try {
        TrainOpts run = base;
        run.alpha = alpha;
        run.layers = L;
        TrainConfig cfg = train_config_from(run);
        cfg.validate();
        fs::create_directories(run_dir);
        write_file(run_dir + "/config.resolved.json",
                   train_config_json(cfg, opts.data, run_dir, "sweep").dump(2) + "\n");
        TrainResult res = run_training(ds, cfg, run_dir);

        LayerStack stack = propagate(adj, res.best.e0, L, cfg.variant, ds.p);
        Matrix pooled = pool(stack, cfg.pooling);
        MetricsReport tm = evaluate(pooled, ds, Split::test, cfg.eval_k);
        double final_corr = corr_metric(pooled);
        csv += row_head + "," + fmt_num(tm.recall) + "," + fmt_num(tm.ndcg) + "," +
               fmt_num(tm.map) + "," + std::to_string(res.best_epoch) + "," +
               fmt_num(final_corr) + "\n";
      } catch (const Error& e) {
        std::fprintf(stderr, "sweep: run alpha=%s L=%u failed: %s\n", abuf, L,
                     e.what());
        csv += row_head + ",nan,nan,nan,nan,nan\n";
      }
    }
  }
  write_file(opts.out + "/summary.csv", csv);
}

}  // namespace afde
