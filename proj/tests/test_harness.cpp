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

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pdcfrs/checkpoint.hpp"
#include "pdcfrs/config.hpp"
#include "pdcfrs/harness.hpp"

namespace pdcfrs {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("pdcfrs_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

ExperimentConfig tiny_run(const fs::path& out) {
  ExperimentConfig c;
  c.synthetic_users = 40;
  c.synthetic_items = 60;
  c.synthetic_clusters = 4;
  c.dim = 8;
  c.hidden = {8, 4};
  c.rounds = 2;
  c.batch_size = 16;
  c.local_epochs = 2;
  c.aux_epochs = 1;
  c.alpha = 5;
  c.out = out.string();
  return c;
}

// ---------------------------------------------------------------------------
// Config

TEST(Config, EmptyObjectGivesDefaults) {
  auto c = config_from_json(nlohmann::json::object());
  EXPECT_EQ(c.epsilon, 5.0);
  EXPECT_EQ(c.alpha, 30);
  EXPECT_EQ(c.beta, 0.5);
  EXPECT_EQ(c.lambda, 0.5);
  EXPECT_EQ(c.rounds, 20);
  EXPECT_EQ(c.lr, 0.001);
  EXPECT_EQ(c.batch_size, 256);
  EXPECT_EQ(c.local_epochs, 5);
  EXPECT_EQ(c.k, 20);
  EXPECT_EQ(c.dim, 32);
  EXPECT_EQ(c.hidden, (std::vector<Index>{32, 16, 8}));
  EXPECT_EQ(c, ExperimentConfig{});
}

TEST(Config, NegativeEpsilonNamesKey) {
  try {
    config_from_json({{"epsilon", -1}});
    FAIL() << "expected a config error";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "epsilon");
  }
}

TEST(Config, UnknownKeyRejected) {
  try {
    config_from_json({{"epsilonn", 1}});
    FAIL() << "expected a config error";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "epsilonn");
  }
}

TEST(Config, WrongTypeNamesKey) {
  try {
    config_from_json({{"alpha", "many"}});
    FAIL() << "expected a config error";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "alpha");
  }
}

TEST(Config, RangeChecks) {
  EXPECT_THROW(config_from_json({{"tau", 0}}), ConfigError);
  EXPECT_THROW(config_from_json({{"train_frac", 1.0}}), ConfigError);
  EXPECT_THROW(config_from_json({{"hidden", nlohmann::json::array()}}), ConfigError);
  EXPECT_THROW(config_from_json({{"weighting", "median"}}), ConfigError);
  EXPECT_THROW(config_from_json({{"delta", 0}}), ConfigError);
  EXPECT_NO_THROW(config_from_json({{"delta", nullptr}, {"epsilon", 0}}));
}

TEST(Config, EchoRoundTrips) {
  ExperimentConfig c;
  c.epsilon = 0.1 + 0.2;
  c.delta = 1.0 / 3.0;
  c.min_rating = 4.0;
  c.hidden = {7, 3};
  c.seed = 18446744073709551615ull;
  c.augmentation = false;
  c.out = "some/dir";
  EXPECT_EQ(config_from_json(to_json(c)), c);
  EXPECT_EQ(config_from_json(nlohmann::json::parse(to_json(c).dump())), c);
}

TEST(Config, FileLoadAndOverride) {
  auto dir = scratch("config");
  fs::create_directories(dir);
  std::ofstream(dir / "c.json") << R"({"alpha": 30, "beta": 0.1})";
  auto c = load_config(dir / "c.json");
  EXPECT_EQ(c.alpha, 30);
  EXPECT_EQ(c.beta, 0.1);
  c.alpha = 10;  // a command-line flag is applied after the file
  validate(c);
  EXPECT_EQ(c.alpha, 10);
  EXPECT_THROW(load_config(dir / "missing.json"), Error);
  std::ofstream(dir / "bad.json") << "{";
  EXPECT_THROW(load_config(dir / "bad.json"), Error);
  fs::remove_all(dir);
}

TEST(Config, MapsOntoProtocol) {
  ExperimentConfig c;
  c.item_cl = false;
  c.weighting = "size";
  auto p = protocol_config(c);
  EXPECT_EQ(p.clients_per_batch, 256);
  EXPECT_EQ(p.effective_loss().beta, 0.0);
  EXPECT_EQ(p.effective_loss().lambda, 0.5);
  EXPECT_EQ(p.weighting, Weighting::kBySize);
  EXPECT_EQ(variant_label(feature_flags(c)), "PDC-FRS");
}

// ---------------------------------------------------------------------------
// Checkpoint

TEST(Checkpoint, BitExactRoundTrip) {
  auto p = oracle::random_model(5, 7, 4, {6, 3}, 2);
  p.items(0, 0) = -0.0;
  p.items(1, 1) = 1e-310;  // subnormal
  p.mlp.activation = Activation::kTanh;
  std::stringstream s;
  save_checkpoint(s, p);
  auto q = load_checkpoint(s);
  EXPECT_EQ(q, p);
  EXPECT_TRUE(std::signbit(q.items(0, 0)));
}

TEST(Checkpoint, RejectsCorruptInput) {
  std::stringstream bad("NOTACKPT");
  EXPECT_THROW(load_checkpoint(bad), Error);
  auto p = oracle::random_model(2, 3, 2, {2}, 1);
  std::stringstream s;
  save_checkpoint(s, p);
  std::string bytes = s.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(load_checkpoint(truncated), Error);
}

// ---------------------------------------------------------------------------
// Runs and sweeps

TEST(Run, WritesOutputsAndIsReproducible) {
  auto dir = scratch("run");
  auto cfg = tiny_run(dir / "a");
  auto s = run(cfg);
  EXPECT_EQ(s.variant, "PDC-FRS");
  for (const char* f : {"metrics.csv", "summary.json", "config.json", "model.ckpt"}) {
    EXPECT_TRUE(fs::exists(dir / "a" / f)) << f;
  }
  auto cfg2 = cfg;
  cfg2.out = (dir / "b").string();
  run(cfg2);
  EXPECT_EQ(slurp(dir / "a" / "metrics.csv"), slurp(dir / "b" / "metrics.csv"));
  EXPECT_EQ(slurp(dir / "a" / "model.ckpt"), slurp(dir / "b" / "model.ckpt"));

  // The echoed config reloads to the same config.
  auto echoed = load_config(dir / "a" / "config.json");
  EXPECT_EQ(echoed, cfg);

  // Three lines: header, round 0, round 1, round 2.
  std::istringstream csv(slurp(dir / "a" / "metrics.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(csv, line)) ++lines;
  EXPECT_EQ(lines, 4);
  fs::remove_all(dir);
}

TEST(Run, BaselineLabel) {
  auto dir = scratch("baseline");
  auto cfg = tiny_run(dir);
  cfg.augmentation = cfg.item_cl = cfg.user_cl = false;
  EXPECT_EQ(run(cfg).variant, "FedNCF");
  auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(summary["variant"], "FedNCF");
  fs::remove_all(dir);
}

TEST(Run, MissingDatasetNamesPath) {
  ExperimentConfig cfg;
  cfg.ratings = "/nonexistent/ml-1m/ratings.dat";
  try {
    load_workload(cfg);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/ml-1m/ratings.dat"), std::string::npos);
  }
}

TEST(Run, ReadsFilesWrittenBySynth) {
  auto dir = scratch("files");
  SyntheticOptions o;
  o.users = 40;
  o.items = 60;
  o.clusters = 4;
  write_synthetic(generate_synthetic(o), dir / "data");
  auto cfg = tiny_run(dir / "out");
  cfg.ratings = (dir / "data" / "ratings.dat").string();
  cfg.movies = (dir / "data" / "movies.dat").string();
  cfg.vectors = (dir / "data" / "vectors.txt").string();
  auto from_files = load_workload(cfg);
  cfg.ratings.clear();
  auto built_in = load_workload(cfg);
  EXPECT_EQ(from_files.dataset.num_users, built_in.dataset.num_users);
  EXPECT_EQ(from_files.dataset.train_positives, built_in.dataset.train_positives);
  for (Index i = 0; i < 10; ++i) {
    EXPECT_NEAR(from_files.similarity.similarity(i, 0), built_in.similarity.similarity(i, 0), 1e-12);
  }
  fs::remove_all(dir);
}

TEST(Sweep, OneRowPerValue) {
  auto dir = scratch("sweep");
  auto cfg = tiny_run(dir);
  cfg.rounds = 1;
  auto rows = sweep(cfg, "alpha", {"0", "5", "10"});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[2].seed, cfg.seed + 2);
  for (const auto& r : rows) EXPECT_TRUE(r.ok) << r.error;
  EXPECT_TRUE(fs::exists(dir / "sweep.csv"));
  EXPECT_TRUE(fs::exists(dir / "alpha=5" / "metrics.csv"));
  fs::remove_all(dir);
}

TEST(Sweep, SingleValueEqualsRun) {
  auto dir = scratch("sweep1");
  auto cfg = tiny_run(dir / "sweep");
  cfg.rounds = 1;
  auto rows = sweep(cfg, "epsilon", {"5"});
  auto single = cfg;
  single.out = (dir / "single").string();
  auto s = run(single);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].recall, s.final_round.recall_at_k);
  EXPECT_EQ(slurp(dir / "sweep" / "epsilon=5" / "metrics.csv"), slurp(dir / "single" / "metrics.csv"));
  fs::remove_all(dir);
}

TEST(Sweep, RejectsUnknownParamAndBadValues) {
  auto cfg = tiny_run(scratch("sweep_bad"));
  EXPECT_THROW(sweep(cfg, "gamma", {"1"}), ConfigError);
  EXPECT_THROW(sweep(cfg, "tau", {"0"}), ConfigError);
  EXPECT_THROW(sweep(cfg, "alpha", {"1.5"}), ConfigError);
}

}  // namespace
}  // namespace pdcfrs
