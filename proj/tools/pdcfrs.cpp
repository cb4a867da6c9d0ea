// Copyright 2026 The PDC-FRS Authors.
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

// Command-line driver: run, sweep and synth subcommands.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pdcfrs/config.hpp"
#include "pdcfrs/harness.hpp"
#include "pdcfrs/synthetic.hpp"

namespace {

// Flags shared by `run` and `sweep`; each one overrides the config file.
struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> epsilon;
  std::optional<pdcfrs::Index> alpha;
  std::optional<double> beta;
  std::optional<double> lambda;
  std::optional<double> tau;
  std::optional<pdcfrs::Index> rounds;
  std::optional<pdcfrs::Index> threads;
  bool no_aug = false;
  bool no_item_cl = false;
  bool no_user_cl = false;
  std::optional<std::string> out;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "JSON config file; omitted keys take defaults");
    app->add_option("--seed", seed, "master seed");
    app->add_option("--epsilon", epsilon, "privacy budget per item");
    app->add_option("--alpha", alpha, "augmented items per client");
    app->add_option("--beta", beta, "item-side contrastive strength");
    app->add_option("--lambda", lambda, "user-side contrastive strength");
    app->add_option("--tau", tau, "contrastive temperature");
    app->add_option("--rounds", rounds, "global rounds");
    app->add_option("--threads", threads, "clients trained concurrently");
    app->add_flag("--no-aug", no_aug, "disable augmentation");
    app->add_flag("--no-item-cl", no_item_cl, "disable item-side contrastive loss");
    app->add_flag("--no-user-cl", no_user_cl, "disable user-side contrastive loss");
    app->add_option("--out", out, "output directory");
  }

  pdcfrs::ExperimentConfig resolve() const {
    pdcfrs::ExperimentConfig c = config.empty() ? pdcfrs::ExperimentConfig{}
                                                : pdcfrs::load_config(config);
    if (seed) c.seed = *seed;
    if (epsilon) c.epsilon = *epsilon;
    if (alpha) c.alpha = *alpha;
    if (beta) c.beta = *beta;
    if (lambda) c.lambda = *lambda;
    if (tau) c.tau = *tau;
    if (rounds) c.rounds = *rounds;
    if (threads) c.threads = *threads;
    if (no_aug) c.augmentation = false;
    if (no_item_cl) c.item_cl = false;
    if (no_user_cl) c.user_cl = false;
    if (out) c.out = *out;
    pdcfrs::validate(c);
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy-preserving federated recommendation with data contribution"};
  app.require_subcommand(1);

  Overrides run_flags;
  auto* run = app.add_subcommand("run", "train and evaluate one configuration");
  run_flags.attach(run);

  Overrides sweep_flags;
  std::string param;
  std::vector<std::string> values;
  std::uint64_t seed_stride = 1;
  auto* sweep = app.add_subcommand("sweep", "one run per value of a hyperparameter");
  sweep_flags.attach(sweep);
  sweep->add_option("--param", param, "epsilon, alpha, beta, lambda or tau")->required();
  sweep->add_option("--values", values, "comma-separated values")->required()->delimiter(',');
  sweep->add_option("--seed-stride", seed_stride, "seed offset between consecutive values");

  pdcfrs::SyntheticOptions synth_opts;
  std::string synth_out = "data/synthetic";
  auto* synth = app.add_subcommand("synth", "write the synthetic corpus as MovieLens-style files");
  synth->add_option("--users", synth_opts.users, "number of users");
  synth->add_option("--items", synth_opts.items, "number of items");
  synth->add_option("--clusters", synth_opts.clusters, "planted item clusters");
  synth->add_option("--seed", synth_opts.seed, "generator seed");
  synth->add_option("--out", synth_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto cfg = run_flags.resolve();
      pdcfrs::run(cfg, &std::cout);
      std::cout << "wrote " << cfg.out << "/{metrics.csv,summary.json,config.json,model.ckpt}\n";
    } else if (*sweep) {
      auto cfg = sweep_flags.resolve();
      auto rows = pdcfrs::sweep(cfg, param, values, seed_stride, &std::cerr);
      std::printf("%-10s %-8s %-12s %-12s\n", param.c_str(), "seed", "recall", "ndcg");
      bool all_ok = true;
      for (const auto& r : rows) {
        if (r.ok) {
          std::printf("%-10s %-8llu %-12.6f %-12.6f\n", r.value.c_str(),
                      static_cast<unsigned long long>(r.seed), r.recall, r.ndcg);
        } else {
          std::printf("%-10s %-8llu failed: %s\n", r.value.c_str(),
                      static_cast<unsigned long long>(r.seed), r.error.c_str());
          all_ok = false;
        }
      }
      return all_ok ? 0 : 1;
    } else if (*synth) {
      pdcfrs::write_synthetic(pdcfrs::generate_synthetic(synth_opts), synth_out);
      std::cout << "wrote " << synth_out << "/{ratings.dat,movies.dat,vectors.txt}\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
