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
#include <string>

#include <CLI11.hpp>

#include "afde/error.hpp"
#include "afde/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"deterministic synthetic interaction generator"};

  afde::SynthConfig cfg;
  std::string out;
  app.add_option("--out", out, "output TSV path")->required();
  app.add_option("--users", cfg.users)->capture_default_str();
  app.add_option("--items", cfg.items)->capture_default_str();
  app.add_option("--min-activity", cfg.min_activity,
                 "minimum interactions per user")
      ->capture_default_str();
  app.add_option("--mean-extra-activity", cfg.mean_extra_activity,
                 "mean of the exponential activity tail")
      ->capture_default_str();
  app.add_option("--latent-dim", cfg.latent_dim)->capture_default_str();
  app.add_option("--popularity-exponent", cfg.popularity_exponent)
      ->capture_default_str();
  app.add_option("--popularity-weight", cfg.popularity_weight)
      ->capture_default_str();
  app.add_option("--preference-weight", cfg.preference_weight)
      ->capture_default_str();
  app.add_option("--seed", cfg.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    afde::RawInteractions raw = afde::make_synthetic(cfg);
    afde::write_interactions_tsv(raw, out);
    std::fprintf(stderr, "wrote %zu interactions to %s\n", raw.records.size(),
                 out.c_str());
    return 0;
  } catch (const afde::Error& e) {
    std::fprintf(stderr, "afde-synth: error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "afde-synth: internal error: %s\n", e.what());
    return 3;
  }
}
