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

#include <cstdio>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "afde/commands.hpp"
#include "afde/error.hpp"
#include "afde/kernels.hpp"

namespace {

// Ties a subcommand's flags to config-file keys. After parsing, file values
// fill in every key whose flag the user did not pass, so flags beat the file.
struct ConfigMerge {
  std::string path;
  afde::OptionBinder binder;
  std::vector<std::pair<std::string, CLI::Option*>> tracked;

  void add_config_flag(CLI::App* cmd) {
    cmd->add_option("--config", path, "flat key = value config file");
  }

  void track(const std::string& key, CLI::Option* opt) {
    tracked.emplace_back(key, opt);
  }

  void merge() const {
    if (path.empty()) return;
    std::set<std::string> overridden;
    for (const auto& [key, opt] : tracked) {
      if (opt->count() > 0) overridden.insert(key);
    }
    binder.apply(afde::parse_config_file(path), overridden);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph collaborative filtering with adaptive feature de-correlation"};
  app.require_subcommand(1);

  std::string kernels = "auto";
  app.add_option("--kernels", kernels, "compute backend: auto, scalar, or avx2")
      ->capture_default_str();

  afde::PrepareOpts prep;
  ConfigMerge prep_cfg;
  CLI::App* prepare = app.add_subcommand(
      "prepare", "filter and split a raw interaction file into a dataset directory");
  prep_cfg.add_config_flag(prepare);
  prep_cfg.track("input", prepare->add_option("--input", prep.input,
                                              "raw interaction TSV"));
  prep_cfg.track("out", prepare->add_option("--out", prep.out, "output directory"));
  prep_cfg.track("format", prepare->add_option("--format", prep.format,
                                               "bare or header")
                               ->capture_default_str());
  prep_cfg.track("min_user_inter",
                 prepare->add_option("--min-user-inter", prep.min_user_inter,
                                     "k-core threshold for users")
                     ->capture_default_str());
  prep_cfg.track("min_item_inter",
                 prepare->add_option("--min-item-inter", prep.min_item_inter,
                                     "k-core threshold for items")
                     ->capture_default_str());
  prep_cfg.track("ratio_train", prepare->add_option("--ratio-train", prep.ratio_train)
                                    ->capture_default_str());
  prep_cfg.track("ratio_valid", prepare->add_option("--ratio-valid", prep.ratio_valid)
                                    ->capture_default_str());
  prep_cfg.track("ratio_test", prepare->add_option("--ratio-test", prep.ratio_test)
                                   ->capture_default_str());
  prep_cfg.track("seed", prepare->add_option("--seed", prep.seed)
                             ->capture_default_str());
  prep_cfg.binder.bind_string("input", &prep.input);
  prep_cfg.binder.bind_string("out", &prep.out);
  prep_cfg.binder.bind_string("format", &prep.format);
  prep_cfg.binder.bind_u32("min_user_inter", &prep.min_user_inter);
  prep_cfg.binder.bind_u32("min_item_inter", &prep.min_item_inter);
  prep_cfg.binder.bind_double("ratio_train", &prep.ratio_train);
  prep_cfg.binder.bind_double("ratio_valid", &prep.ratio_valid);
  prep_cfg.binder.bind_double("ratio_test", &prep.ratio_test);
  prep_cfg.binder.bind_u64("seed", &prep.seed);

  afde::TrainOpts tr;
  ConfigMerge tr_cfg;
  CLI::App* train = app.add_subcommand("train", "train on a prepared dataset");
  tr_cfg.add_config_flag(train);
  auto track_train_common = [&](auto& opts, ConfigMerge& cfg, CLI::App* cmd) {
    cfg.track("variant", cmd->add_option("--variant", opts.variant,
                                         "lightgcn or gccf")
                             ->capture_default_str());
    cfg.track("pooling", cmd->add_option("--pooling", opts.pooling,
                                         "auto, mean, or concat")
                             ->capture_default_str());
    cfg.track("strict_pooling",
              cmd->add_flag("--strict-pooling,!--no-strict-pooling",
                            opts.strict_pooling,
                            "reject pooling choices that contradict the variant"));
    cfg.track("d", cmd->add_option("--d", opts.d, "embedding dimension")
                       ->capture_default_str());
    cfg.track("l2_reg", cmd->add_option("--l2-reg", opts.l2_reg)
                            ->capture_default_str());
    cfg.track("lr", cmd->add_option("--lr", opts.lr)->capture_default_str());
    cfg.track("batch_size", cmd->add_option("--batch-size", opts.batch_size)
                                ->capture_default_str());
    cfg.track("max_epochs", cmd->add_option("--max-epochs", opts.max_epochs)
                                ->capture_default_str());
    cfg.track("patience", cmd->add_option("--patience", opts.patience,
                                          "early-stop patience in epochs")
                              ->capture_default_str());
    cfg.track("eval_k", cmd->add_option("--eval-k", opts.eval_k)
                            ->capture_default_str());
    cfg.track("seed", cmd->add_option("--seed", opts.seed)->capture_default_str());
    cfg.track("corr_sample",
              cmd->add_option("--corr-sample", opts.corr_sample,
                              "rows per side for the penalty; 0 = all")
                  ->capture_default_str());
    cfg.track("adaptive_lambda",
              cmd->add_flag("--adaptive-lambda,!--fixed-lambda",
                            opts.adaptive_lambda,
                            "adaptive layer weights (off: fixed 1/L)"));
    cfg.track("bpr_reduction",
              cmd->add_option("--bpr-reduction", opts.bpr_reduction,
                              "mean or sum")
                  ->capture_default_str());
    cfg.track("log_timing", cmd->add_flag("--log-timing,!--no-log-timing",
                                          opts.log_timing,
                                          "record epoch wall time in history"));
    cfg.binder.bind_string("variant", &opts.variant);
    cfg.binder.bind_string("pooling", &opts.pooling);
    cfg.binder.bind_bool("strict_pooling", &opts.strict_pooling);
    cfg.binder.bind_u32("d", &opts.d);
    cfg.binder.bind_double("l2_reg", &opts.l2_reg);
    cfg.binder.bind_double("lr", &opts.lr);
    cfg.binder.bind_u32("batch_size", &opts.batch_size);
    cfg.binder.bind_u32("max_epochs", &opts.max_epochs);
    cfg.binder.bind_u32("patience", &opts.patience);
    cfg.binder.bind_u32("eval_k", &opts.eval_k);
    cfg.binder.bind_u64("seed", &opts.seed);
    cfg.binder.bind_u32("corr_sample", &opts.corr_sample);
    cfg.binder.bind_bool("adaptive_lambda", &opts.adaptive_lambda);
    cfg.binder.bind_string("bpr_reduction", &opts.bpr_reduction);
    cfg.binder.bind_bool("log_timing", &opts.log_timing);
  };
  tr_cfg.track("data", train->add_option("--data", tr.data, "prepared dataset dir"));
  tr_cfg.track("out", train->add_option("--out", tr.out, "output directory"));
  tr_cfg.track("label", train->add_option("--label", tr.label,
                                          "free-form run label")
                            ->capture_default_str());
  tr_cfg.track("layers", train->add_option("--layers", tr.layers,
                                           "propagation depth L")
                             ->capture_default_str());
  tr_cfg.track("alpha", train->add_option("--alpha", tr.alpha,
                                          "de-correlation weight")
                            ->capture_default_str());
  tr_cfg.binder.bind_string("data", &tr.data);
  tr_cfg.binder.bind_string("out", &tr.out);
  tr_cfg.binder.bind_string("label", &tr.label);
  tr_cfg.binder.bind_u32("layers", &tr.layers);
  tr_cfg.binder.bind_double("alpha", &tr.alpha);
  track_train_common(tr, tr_cfg, train);

  afde::EvaluateOpts ev;
  ConfigMerge ev_cfg;
  CLI::App* evaluate = app.add_subcommand("evaluate", "rank and score a checkpoint");
  ev_cfg.add_config_flag(evaluate);
  ev_cfg.track("checkpoint", evaluate->add_option("--checkpoint", ev.checkpoint));
  ev_cfg.track("data", evaluate->add_option("--data", ev.data));
  ev_cfg.track("out", evaluate->add_option("--out", ev.out));
  ev_cfg.track("k", evaluate->add_option("--k", ev.k, "cutoffs, comma separated")
                       ->delimiter(',')
                       ->capture_default_str());
  ev_cfg.track("split", evaluate->add_option("--split", ev.split,
                                             "valid or test")
                            ->capture_default_str());
  ev_cfg.track("pooling", evaluate->add_option("--pooling", ev.pooling)
                              ->capture_default_str());
  ev_cfg.binder.bind_string("checkpoint", &ev.checkpoint);
  ev_cfg.binder.bind_string("data", &ev.data);
  ev_cfg.binder.bind_string("out", &ev.out);
  ev_cfg.binder.bind_u32s("k", &ev.k);
  ev_cfg.binder.bind_string("split", &ev.split);
  ev_cfg.binder.bind_string("pooling", &ev.pooling);

  afde::DiagnoseOpts dg;
  ConfigMerge dg_cfg;
  CLI::App* diagnose = app.add_subcommand(
      "diagnose", "per-layer correlation and smoothness of a checkpoint");
  dg_cfg.add_config_flag(diagnose);
  dg_cfg.track("checkpoint", diagnose->add_option("--checkpoint", dg.checkpoint));
  dg_cfg.track("data", diagnose->add_option("--data", dg.data));
  dg_cfg.track("out", diagnose->add_option("--out", dg.out));
  dg_cfg.track("layers", diagnose->add_option("--layers", dg.layers,
                                              "depth to re-propagate; -1 = checkpoint's")
                             ->capture_default_str());
  dg_cfg.track("corr_sample", diagnose->add_option("--corr-sample", dg.corr_sample)
                                  ->capture_default_str());
  dg_cfg.track("smv_sample", diagnose->add_option("--smv-sample", dg.smv_sample)
                                 ->capture_default_str());
  dg_cfg.track("seed", diagnose->add_option("--seed", dg.seed)
                           ->capture_default_str());
  dg_cfg.track("pooling", diagnose->add_option("--pooling", dg.pooling)
                              ->capture_default_str());
  dg_cfg.binder.bind_string("checkpoint", &dg.checkpoint);
  dg_cfg.binder.bind_string("data", &dg.data);
  dg_cfg.binder.bind_string("out", &dg.out);
  dg_cfg.binder.bind_i32("layers", &dg.layers);
  dg_cfg.binder.bind_u32("corr_sample", &dg.corr_sample);
  dg_cfg.binder.bind_u32("smv_sample", &dg.smv_sample);
  dg_cfg.binder.bind_u64("seed", &dg.seed);
  dg_cfg.binder.bind_string("pooling", &dg.pooling);

  afde::SweepOpts sw;
  ConfigMerge sw_cfg;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "train and evaluate a grid of alpha and layer-count settings");
  sw_cfg.add_config_flag(sweep);
  sw_cfg.track("data", sweep->add_option("--data", sw.data));
  sw_cfg.track("out", sweep->add_option("--out", sw.out));
  sw_cfg.track("alphas", sweep->add_option("--alphas", sw.alphas,
                                           "grid values, comma separated")
                             ->delimiter(','));
  sw_cfg.track("layer_grid", sweep->add_option("--layer-grid", sw.layer_grid,
                                               "grid values, comma separated")
                                 ->delimiter(','));
  sw_cfg.track("alpha", sweep->add_option("--alpha", sw.alpha,
                                          "fallback when --alphas is empty")
                            ->capture_default_str());
  sw_cfg.track("layers", sweep->add_option("--layers", sw.layers,
                                           "fallback when --layer-grid is empty")
                             ->capture_default_str());
  sw_cfg.binder.bind_string("data", &sw.data);
  sw_cfg.binder.bind_string("out", &sw.out);
  sw_cfg.binder.bind_doubles("alphas", &sw.alphas);
  sw_cfg.binder.bind_u32s("layer_grid", &sw.layer_grid);
  sw_cfg.binder.bind_double("alpha", &sw.alpha);
  sw_cfg.binder.bind_u32("layers", &sw.layers);
  track_train_common(sw, sw_cfg, sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (kernels != "auto") {
      afde::kernels::Backend b;
      if (kernels == "scalar") {
        b = afde::kernels::Backend::scalar;
      } else if (kernels == "avx2") {
        b = afde::kernels::Backend::avx2;
      } else {
        throw afde::Error::config("--kernels must be auto, scalar, or avx2 (got '" +
                                  kernels + "')");
      }
      if (!afde::kernels::set_backend(b)) {
        throw afde::Error::config("kernel backend '" + kernels +
                                  "' is not available on this host");
      }
    }

    if (prepare->parsed()) {
      prep_cfg.merge();
      afde::cmd_prepare(prep);
    } else if (train->parsed()) {
      tr_cfg.merge();
      afde::cmd_train(tr);
    } else if (evaluate->parsed()) {
      ev_cfg.merge();
      afde::cmd_evaluate(ev);
    } else if (diagnose->parsed()) {
      dg_cfg.merge();
      afde::cmd_diagnose(dg);
    } else if (sweep->parsed()) {
      sw_cfg.merge();
      afde::cmd_sweep(sw);
    }
    return 0;
  } catch (const afde::Error& e) {
    std::fprintf(stderr, "afde: error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "afde: internal error: %s\n", e.what());
    return 3;
  }
}
