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

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "afde/commands.hpp"
#include "afde/dataset.hpp"
#include "afde/error.hpp"
#include "afde/metrics.hpp"
#include "afde/model.hpp"
#include "afde/sparse.hpp"
#include "afde/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path tmp_dir() {
  static int counter = 0;
  fs::path dir = fs::temp_directory_path() /
                 ("afde_test_commands_" + std::to_string(::getpid()) + "_" +
                  std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path write_tmp_file(const std::string& name, const std::string& content) {
  fs::path p = tmp_dir() / name;
  std::ofstream f(p, std::ios::binary);
  f << content;
  return p;
}

// One small prepared corpus shared by the command tests (they only read it).
const fs::path& prepared_data() {
  static const fs::path dir = [] {
    const fs::path base = tmp_dir();
    afde::SynthConfig sc;
    sc.users = 120;
    sc.items = 150;
    sc.min_activity = 10;
    sc.mean_extra_activity = 15.0;
    sc.seed = 5;
    afde::write_interactions_tsv(afde::make_synthetic(sc),
                                 (base / "raw.tsv").string());

    afde::PrepareOpts p;
    p.input = (base / "raw.tsv").string();
    p.out = (base / "data").string();
    p.min_user_inter = 5;
    p.min_item_inter = 5;
    afde::cmd_prepare(p);
    return base / "data";
  }();
  return dir;
}

afde::TrainOpts small_train(const fs::path& out) {
  afde::TrainOpts t;
  t.data = prepared_data().string();
  t.out = out.string();
  t.d = 8;
  t.layers = 2;
  t.alpha = 1e-2;
  t.lr = 1e-2;
  t.batch_size = 256;
  t.max_epochs = 4;
  t.patience = 100;
  t.eval_k = 5;
  t.seed = 3;
  return t;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("config files parse into key-value maps") {
  const fs::path p = write_tmp_file("good.conf",
                                    "# a comment\n"
                                    "\n"
                                    "alpha = 0.5\n"
                                    "  layers=3  \n"
                                    "label = run = one\n"
                                    "pooling = mean # inline comments drop\n");
  const auto kv = afde::parse_config_file(p.string());
  REQUIRE(kv.size() == 4);
  CHECK(kv.at("alpha") == "0.5");
  CHECK(kv.at("layers") == "3");
  // Only the first '=' splits; the rest belongs to the value.
  CHECK(kv.at("label") == "run = one");
  CHECK(kv.at("pooling") == "mean");

  const fs::path dup = write_tmp_file("dup.conf", "a = 1\na = 2\n");
  CHECK_THROWS_AS(afde::parse_config_file(dup.string()), afde::Error);

  const fs::path bare = write_tmp_file("bare.conf", "just-a-token\n");
  CHECK_THROWS_AS(afde::parse_config_file(bare.string()), afde::Error);

  CHECK_THROWS_AS(afde::parse_config_file("/nonexistent/nothing.conf"), afde::Error);
}

TEST_CASE("option binder fills fields and rejects bad input") {
  std::uint32_t u = 0;
  double d = 0.0;
  bool flag = false;
  std::string s;
  std::vector<double> ds;
  std::vector<std::uint32_t> us;

  afde::OptionBinder binder;
  binder.bind_u32("count", &u);
  binder.bind_double("rate", &d);
  binder.bind_bool("enabled", &flag);
  binder.bind_string("name", &s);
  binder.bind_doubles("alphas", &ds);
  binder.bind_u32s("grid", &us);

  binder.apply({{"count", "42"},
                {"rate", "2.5e-3"},
                {"enabled", "true"},
                {"name", "hello"},
                {"alphas", "0.1, 0.2,0.3"},
                {"grid", "1,2,4"}},
               {});
  CHECK(u == 42);
  CHECK(d == 2.5e-3);
  CHECK(flag == true);
  CHECK(s == "hello");
  CHECK(ds == std::vector<double>{0.1, 0.2, 0.3});
  CHECK(us == std::vector<std::uint32_t>{1, 2, 4});

  // Keys the user already passed on the command line stay untouched.
  binder.apply({{"count", "7"}, {"name", "other"}}, {"count"});
  CHECK(u == 42);
  CHECK(s == "other");

  CHECK_THROWS_AS(binder.apply({{"bogus", "1"}}, {}), afde::Error);
  CHECK_THROWS_AS(binder.apply({{"count", "abc"}}, {}), afde::Error);
  CHECK_THROWS_AS(binder.apply({{"count", "-3"}}, {}), afde::Error);
  CHECK_THROWS_AS(binder.apply({{"enabled", "maybe"}}, {}), afde::Error);
  CHECK_THROWS_AS(binder.apply({{"rate", "fast"}}, {}), afde::Error);

  for (const char* accepted : {"1", "yes", "on"}) {
    flag = false;
    binder.apply({{"enabled", accepted}}, {});
    CHECK(flag == true);
  }
  for (const char* rejected_true : {"0", "no", "off", "false"}) {
    binder.apply({{"enabled", rejected_true}}, {});
    CHECK(flag == false);
  }
}

TEST_CASE("prepare writes a reproducible dataset with stats") {
  const fs::path base = tmp_dir();
  afde::SynthConfig sc;
  sc.users = 80;
  sc.items = 90;
  sc.min_activity = 8;
  sc.mean_extra_activity = 10.0;
  sc.seed = 9;
  afde::write_interactions_tsv(afde::make_synthetic(sc), (base / "raw.tsv").string());

  afde::PrepareOpts p;
  p.input = (base / "raw.tsv").string();
  p.out = (base / "out1").string();
  p.min_user_inter = 4;
  p.min_item_inter = 4;
  afde::cmd_prepare(p);

  for (const char* name : {"train.tsv", "valid.tsv", "test.tsv", "mapping_users.tsv",
                           "mapping_items.tsv", "stats.json", "config.resolved.json"}) {
    CHECK(fs::exists(base / "out1" / name));
  }

  const json stats = json::parse(slurp(base / "out1" / "stats.json"));
  CHECK(stats.at("users").get<std::uint32_t>() > 0);
  CHECK(stats.at("items").get<std::uint32_t>() > 0);
  CHECK(stats.at("train").get<std::size_t>() > 0);
  CHECK(stats.at("total").get<std::size_t>() ==
        stats.at("train").get<std::size_t>() + stats.at("valid").get<std::size_t>() +
            stats.at("test").get<std::size_t>());
  CHECK(stats.at("density").get<double>() > 0.0);
  CHECK(stats.at("density").get<double>() < 1.0);

  // The dataset loads back and is internally consistent.
  const afde::InteractionDataset ds = afde::load_dataset((base / "out1").string());
  CHECK(ds.p == stats.at("users").get<std::uint32_t>());
  CHECK(ds.q == stats.at("items").get<std::uint32_t>());
  CHECK(ds.train.size() == stats.at("train").get<std::size_t>());

  // Byte-for-byte reproducible.
  p.out = (base / "out2").string();
  afde::cmd_prepare(p);
  for (const char* name : {"train.tsv", "valid.tsv", "test.tsv", "stats.json"}) {
    CHECK(slurp(base / "out1" / name) == slurp(base / "out2" / name));
  }

  afde::PrepareOpts bad = p;
  bad.out = (base / "out3").string();
  bad.ratio_train = 0.9;
  bad.ratio_valid = 0.3;
  CHECK_THROWS_AS(afde::cmd_prepare(bad), afde::Error);

  afde::PrepareOpts missing = p;
  missing.input = (base / "nope.tsv").string();
  missing.out = (base / "out4").string();
  CHECK_THROWS_AS(afde::cmd_prepare(missing), afde::Error);
}

TEST_CASE("train writes history, checkpoint, and validation metrics") {
  const fs::path base = tmp_dir();
  const afde::TrainOpts t = small_train(base / "run1");
  afde::cmd_train(t);

  const json resolved = json::parse(slurp(base / "run1" / "config.resolved.json"));
  CHECK(resolved.at("pooling") == "mean");  // lightgcn default via "auto"
  CHECK(resolved.at("d") == 8);

  const auto lines = lines_of(slurp(base / "run1" / "history.jsonl"));
  REQUIRE(lines.size() == 4);
  for (std::size_t e = 0; e < lines.size(); ++e) {
    const json rec = json::parse(lines[e]);
    CHECK(rec.at("epoch") == e + 1);
    for (const char* key : {"bpr_loss", "afd_loss", "l2_loss", "total_loss",
                            "valid_recall", "valid_ndcg", "valid_map", "seconds"}) {
      CHECK(rec.at(key).is_number());
    }
    CHECK(rec.at("seconds") == 0.0);
    CHECK(rec.at("lambda_user").size() == 2);
    CHECK(rec.at("pbar_item").size() == 2);
    double sum = 0.0;
    for (const auto& l : rec.at("lambda_user")) sum += l.get<double>();
    CHECK(sum == 1.0);
  }

  const json vm = json::parse(slurp(base / "run1" / "valid_metrics.json"));
  CHECK(vm.at("epochs_trained") == 4);
  CHECK(vm.at("k") == 5);
  const std::uint32_t best_epoch = vm.at("best_epoch").get<std::uint32_t>();
  REQUIRE(best_epoch >= 1);
  REQUIRE(best_epoch <= 4);
  const json best_rec = json::parse(lines[best_epoch - 1]);
  CHECK(best_rec.at("valid_ndcg").get<double>() == vm.at("valid_ndcg").get<double>());

  // The checkpoint matches the dataset and run shape.
  const afde::Checkpoint ck =
      afde::load_checkpoint((base / "run1" / "checkpoint.bin").string());
  const afde::InteractionDataset ds = afde::load_dataset(t.data);
  CHECK(ck.p == ds.p);
  CHECK(ck.q == ds.q);
  CHECK(ck.d == 8);
  CHECK(ck.L == 2);

  // Reruns are byte-identical.
  afde::TrainOpts t2 = small_train(base / "run2");
  afde::cmd_train(t2);
  CHECK(slurp(base / "run1" / "history.jsonl") == slurp(base / "run2" / "history.jsonl"));
  CHECK(slurp(base / "run1" / "checkpoint.bin") ==
        slurp(base / "run2" / "checkpoint.bin"));
  CHECK(slurp(base / "run1" / "valid_metrics.json") ==
        slurp(base / "run2" / "valid_metrics.json"));
}

TEST_CASE("evaluate reproduces the training-time validation metrics") {
  const fs::path base = tmp_dir();
  afde::cmd_train(small_train(base / "run"));

  afde::EvaluateOpts e;
  e.checkpoint = (base / "run" / "checkpoint.bin").string();
  e.data = prepared_data().string();
  e.out = (base / "eval").string();
  e.k = {5};
  e.split = "valid";
  afde::cmd_evaluate(e);

  const json metrics = json::parse(slurp(base / "eval" / "metrics.json"));
  CHECK(metrics.at("split") == "valid");
  REQUIRE(metrics.at("results").size() == 1);
  const json row = metrics.at("results")[0];

  const json vm = json::parse(slurp(base / "run" / "valid_metrics.json"));
  CHECK(row.at("ndcg").get<double>() == vm.at("valid_ndcg").get<double>());
  CHECK(row.at("recall").get<double>() == vm.at("valid_recall").get<double>());
  CHECK(row.at("map").get<double>() == vm.at("valid_map").get<double>());

  // CSV mirrors the JSON, with one row per k in the order requested.
  afde::EvaluateOpts multi = e;
  multi.out = (base / "eval2").string();
  multi.k = {3, 5, 8};
  multi.split = "test";
  afde::cmd_evaluate(multi);
  const auto lines = lines_of(slurp(base / "eval2" / "metrics.csv"));
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == "k,recall,ndcg,map,users");
  CHECK(lines[1].substr(0, 2) == "3,");
  CHECK(lines[2].substr(0, 2) == "5,");
  CHECK(lines[3].substr(0, 2) == "8,");

  afde::EvaluateOpts bad = e;
  bad.out = (base / "eval3").string();
  bad.k = {};
  CHECK_THROWS_AS(afde::cmd_evaluate(bad), afde::Error);
  bad.k = {0};
  CHECK_THROWS_AS(afde::cmd_evaluate(bad), afde::Error);
  bad.k = {5};
  bad.split = "training";
  CHECK_THROWS_AS(afde::cmd_evaluate(bad), afde::Error);
}

TEST_CASE("diagnose reports per-layer correlation and dispersion") {
  const fs::path base = tmp_dir();
  afde::cmd_train(small_train(base / "run"));

  afde::DiagnoseOpts d;
  d.checkpoint = (base / "run" / "checkpoint.bin").string();
  d.data = prepared_data().string();
  d.out = (base / "diag").string();
  afde::cmd_diagnose(d);

  const auto lines = lines_of(slurp(base / "diag" / "diagnostics.csv"));
  REQUIRE(lines.size() == 4);  // header + layers 0..2
  CHECK(lines[0] == "layer,corr_user,corr_item,corr_all,smv_user,smv_item,smv_all");

  // Reproduce one cell: corr_user of layer 1, full rows (no sampling).
  const afde::Checkpoint ck = afde::load_checkpoint(d.checkpoint);
  const afde::InteractionDataset ds = afde::load_dataset(d.data);
  const afde::SparseMatrix adj = afde::normalize_symmetric(afde::build_adjacency(ds));
  const afde::LayerStack stack = afde::propagate(adj, ck.e0, ck.L, ck.variant, ds.p);
  std::vector<std::uint32_t> user_rows(ds.p);
  for (std::uint32_t u = 0; u < ds.p; ++u) user_rows[u] = u;
  const double want_corr = afde::corr_metric(stack.layers[1], user_rows);

  std::istringstream row(lines[2]);
  std::string cell;
  std::getline(row, cell, ',');
  CHECK(cell == "1");
  std::getline(row, cell, ',');
  CHECK(std::stod(cell) == want_corr);

  const json th = json::parse(slurp(base / "diag" / "theorem1.json"));
  REQUIRE(th.contains("converged"));
  CHECK(th.at("converged") == true);
  CHECK(th.at("identity_residual").get<double>() < 1e-8);
  CHECK(th.at("standardization_residual").get<double>() < 1e-10);

  // Depth override re-propagates to the requested depth.
  afde::DiagnoseOpts deeper = d;
  deeper.out = (base / "diag4").string();
  deeper.layers = 4;
  afde::cmd_diagnose(deeper);
  CHECK(lines_of(slurp(base / "diag4" / "diagnostics.csv")).size() == 6);

  // Row sampling stays deterministic for a fixed seed.
  afde::DiagnoseOpts sampled = d;
  sampled.out = (base / "diag_s1").string();
  sampled.corr_sample = 20;
  sampled.smv_sample = 15;
  afde::cmd_diagnose(sampled);
  sampled.out = (base / "diag_s2").string();
  afde::cmd_diagnose(sampled);
  CHECK(slurp(base / "diag_s1" / "diagnostics.csv") ==
        slurp(base / "diag_s2" / "diagnostics.csv"));
}

TEST_CASE("pooling resolution respects the variant defaults") {
  const fs::path base = tmp_dir();

  afde::TrainOpts gccf = small_train(base / "gccf");
  gccf.variant = "gccf";
  gccf.max_epochs = 2;
  afde::cmd_train(gccf);
  const json resolved = json::parse(slurp(base / "gccf" / "config.resolved.json"));
  CHECK(resolved.at("pooling") == "concat");
  CHECK(resolved.at("variant") == "gccf");

  // Contradicting the variant default is an error unless explicitly waived.
  afde::TrainOpts strict = small_train(base / "strict");
  strict.variant = "gccf";
  strict.pooling = "mean";
  try {
    afde::cmd_train(strict);
    FAIL("expected a config error");
  } catch (const afde::Error& e) {
    CHECK(e.kind() == afde::ErrorKind::config);
    CHECK(std::string(e.what()).find("strict_pooling") != std::string::npos);
  }

  afde::TrainOpts waived = small_train(base / "waived");
  waived.variant = "gccf";
  waived.pooling = "mean";
  waived.strict_pooling = false;
  waived.max_epochs = 2;
  afde::cmd_train(waived);
  const json wj = json::parse(slurp(base / "waived" / "config.resolved.json"));
  CHECK(wj.at("pooling") == "mean");

  // Evaluate on a concat-pooled checkpoint through "auto".
  afde::EvaluateOpts e;
  e.checkpoint = (base / "gccf" / "checkpoint.bin").string();
  e.data = prepared_data().string();
  e.out = (base / "gccf_eval").string();
  e.k = {5};
  afde::cmd_evaluate(e);
  const json ej = json::parse(slurp(base / "gccf_eval" / "config.resolved.json"));
  CHECK(ej.at("pooling") == "concat");
}

TEST_CASE("evaluate rejects a checkpoint from a different corpus") {
  const fs::path base = tmp_dir();

  // Second corpus with a different shape.
  afde::SynthConfig sc;
  sc.users = 60;
  sc.items = 70;
  sc.min_activity = 8;
  sc.mean_extra_activity = 8.0;
  sc.seed = 77;
  afde::write_interactions_tsv(afde::make_synthetic(sc), (base / "raw.tsv").string());
  afde::PrepareOpts p;
  p.input = (base / "raw.tsv").string();
  p.out = (base / "other").string();
  p.min_user_inter = 4;
  p.min_item_inter = 4;
  afde::cmd_prepare(p);

  afde::cmd_train(small_train(base / "run"));

  afde::EvaluateOpts e;
  e.checkpoint = (base / "run" / "checkpoint.bin").string();
  e.data = (base / "other").string();
  e.out = (base / "eval").string();
  e.k = {5};
  try {
    afde::cmd_evaluate(e);
    FAIL("expected a data error");
  } catch (const afde::Error& err) {
    CHECK(err.kind() == afde::ErrorKind::data);
    CHECK(std::string(err.what()).find("does not fit") != std::string::npos);
  }
}

TEST_CASE("sweep covers the grid and survives failing runs") {
  const fs::path base = tmp_dir();

  afde::SweepOpts s;
  s.data = prepared_data().string();
  s.out = (base / "sweep").string();
  s.alphas = {0.0, 0.05};
  s.layer_grid = {1, 2};
  s.d = 8;
  s.lr = 1e-2;
  s.batch_size = 256;
  s.max_epochs = 2;
  s.patience = 100;
  s.eval_k = 5;
  s.seed = 3;
  afde::cmd_sweep(s);

  const auto lines = lines_of(slurp(base / "sweep" / "summary.csv"));
  REQUIRE(lines.size() == 5);
  CHECK(lines[0] == "alpha,L,recall,ndcg,map,epochs_to_best,final_corr");
  for (const char* dir : {"run_a0_L1", "run_a0_L2", "run_a0.05_L1", "run_a0.05_L2"}) {
    CAPTURE(dir);
    CHECK(fs::exists(base / "sweep" / dir / "history.jsonl"));
    CHECK(fs::exists(base / "sweep" / dir / "checkpoint.bin"));
    CHECK(fs::exists(base / "sweep" / dir / "config.resolved.json"));
  }

  // A grid point that cannot train leaves a nan row but the sweep finishes.
  afde::SweepOpts bad = s;
  bad.out = (base / "sweep_bad").string();
  bad.alphas = {0.05};
  bad.layer_grid = {0, 1};  // zero layers is invalid
  afde::cmd_sweep(bad);
  const auto bad_lines = lines_of(slurp(base / "sweep_bad" / "summary.csv"));
  REQUIRE(bad_lines.size() == 3);
  CHECK(bad_lines[1].find("nan") != std::string::npos);
  CHECK(bad_lines[2].find("nan") == std::string::npos);
}
