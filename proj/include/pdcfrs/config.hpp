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

// Experiment configuration: a flat JSON object whose keys mirror the
// fields of ExperimentConfig. Missing keys take the defaults below; unknown
// keys are rejected.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pdcfrs/common.hpp"
#include "pdcfrs/data.hpp"
#include "pdcfrs/federated.hpp"
#include "pdcfrs/privacy.hpp"
#include "pdcfrs/synthetic.hpp"

namespace pdcfrs {

struct ExperimentConfig {
  // Data. An empty `ratings` path selects the built-in synthetic corpus.
  std::string ratings;
  std::string movies;
  std::string vectors;
  std::string similarity;  // optional item x item CSV, replaces title vectors
  std::string separator = "::";
  std::optional<double> min_rating;
  Index neg_ratio = 4;
  double train_frac = 0.8;
  bool resample_negatives = false;
  Index synthetic_users = 600;
  Index synthetic_items = 800;
  Index synthetic_clusters = 10;
  std::uint64_t synthetic_seed = 7;

  std::uint64_t seed = 1;

  // Model.
  Index dim = 32;
  std::vector<Index> hidden = {32, 16, 8};
  std::string activation = "relu";

  // Protocol.
  Index rounds = 20;
  Index batch_size = 256;  // clients per aggregation
  Index local_epochs = 5;
  Index local_batch_size = 0;
  double lr = 0.001;
  Index aux_epochs = 5;
  Index aux_batch_size = 256;
  Index item_cl_steps = 1;
  std::string weighting = "uniform";
  Index threads = 1;

  // Privacy and the two contrastive terms.
  double epsilon = 5.0;
  std::optional<double> delta;
  Index alpha = 30;
  double beta = 0.5;
  double lambda = 0.5;
  double tau = 0.2;
  bool augmentation = true;
  bool item_cl = true;
  bool user_cl = true;

  // Evaluation and output.
  Index k = 20;
  std::string out = "out";
  bool record_wall_time = false;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& field) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    field = it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(key, std::string("wrong type: ") + e.what());
  }
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, std::optional<T>& field) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if (it->is_null()) {
    field.reset();
    return;
  }
  T v{};
  read_key(j, key, v);
  field = v;
}

// Every key the loader understands, paired with how to read it.
using KeyReader = std::function<void(const nlohmann::json&, ExperimentConfig&)>;

inline const std::map<std::string, KeyReader>& config_keys() {
#define PDCFRS_KEY(name) \
  {#name, [](const nlohmann::json& j, ExperimentConfig& c) { read_key(j, #name, c.name); }}
  static const std::map<std::string, KeyReader> keys = {
      PDCFRS_KEY(ratings),          PDCFRS_KEY(movies),
      PDCFRS_KEY(vectors),          PDCFRS_KEY(similarity),
      PDCFRS_KEY(separator),        PDCFRS_KEY(min_rating),
      PDCFRS_KEY(neg_ratio),        PDCFRS_KEY(train_frac),
      PDCFRS_KEY(resample_negatives), PDCFRS_KEY(synthetic_users),
      PDCFRS_KEY(synthetic_items),  PDCFRS_KEY(synthetic_clusters),
      PDCFRS_KEY(synthetic_seed),   PDCFRS_KEY(seed),             PDCFRS_KEY(dim),
      PDCFRS_KEY(hidden),           PDCFRS_KEY(activation),
      PDCFRS_KEY(rounds),           PDCFRS_KEY(batch_size),
      PDCFRS_KEY(local_epochs),     PDCFRS_KEY(local_batch_size),
      PDCFRS_KEY(lr),               PDCFRS_KEY(aux_epochs),
      PDCFRS_KEY(aux_batch_size),   PDCFRS_KEY(item_cl_steps),
      PDCFRS_KEY(weighting),        PDCFRS_KEY(threads),
      PDCFRS_KEY(epsilon),          PDCFRS_KEY(delta),
      PDCFRS_KEY(alpha),            PDCFRS_KEY(beta),
      PDCFRS_KEY(lambda),           PDCFRS_KEY(tau),
      PDCFRS_KEY(augmentation),     PDCFRS_KEY(item_cl),
      PDCFRS_KEY(user_cl),          PDCFRS_KEY(k),
      PDCFRS_KEY(out),              PDCFRS_KEY(record_wall_time),
  };
#undef PDCFRS_KEY
  return keys;
}

}  // namespace detail

/// Throws ConfigError naming the first out-of-range key.
inline void validate(const ExperimentConfig& c) {
  auto require = [](bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigError(key, what);
  };
  require(!c.separator.empty(), "separator", "must not be empty");
  require(c.neg_ratio >= 0, "neg_ratio", "must be >= 0");
  require(c.train_frac > 0.0 && c.train_frac < 1.0, "train_frac", "must be in (0, 1)");
  require(c.synthetic_users >= 1, "synthetic_users", "must be >= 1");
  require(c.synthetic_items >= 2, "synthetic_items", "must be >= 2");
  require(c.synthetic_clusters >= 1 && c.synthetic_clusters <= c.synthetic_items,
          "synthetic_clusters", "must be in [1, synthetic_items]");
  require(c.dim >= 1, "dim", "must be >= 1");
  require(!c.hidden.empty(), "hidden", "needs at least one layer");
  for (Index h : c.hidden) require(h >= 1, "hidden", "layer widths must be >= 1");
  require(c.activation == "relu" || c.activation == "tanh" || c.activation == "identity",
          "activation", "must be relu, tanh or identity");
  require(c.rounds >= 0, "rounds", "must be >= 0");
  require(c.batch_size >= 1, "batch_size", "must be >= 1");
  require(c.local_epochs >= 1, "local_epochs", "must be >= 1");
  require(c.local_batch_size >= 0, "local_batch_size", "must be >= 0");
  require(c.lr > 0.0 && std::isfinite(c.lr), "lr", "must be > 0");
  require(c.aux_epochs >= 1, "aux_epochs", "must be >= 1");
  require(c.aux_batch_size >= 0, "aux_batch_size", "must be >= 0");
  require(c.item_cl_steps >= 0, "item_cl_steps", "must be >= 0");
  require(c.weighting == "uniform" || c.weighting == "size", "weighting",
          "must be uniform or size");
  require(c.threads >= 1, "threads", "must be >= 1");
  require(c.epsilon >= 0.0 && std::isfinite(c.epsilon), "epsilon", "must be >= 0");
  require(!c.delta || (*c.delta > 0.0 && std::isfinite(*c.delta)), "delta", "must be > 0");
  require(c.alpha >= 0, "alpha", "must be >= 0");
  require(c.beta >= 0.0 && std::isfinite(c.beta), "beta", "must be >= 0");
  require(c.lambda >= 0.0 && std::isfinite(c.lambda), "lambda", "must be >= 0");
  require(c.tau > 0.0 && std::isfinite(c.tau), "tau", "must be > 0");
  require(c.k >= 1, "k", "must be >= 1");
  require(!c.out.empty(), "out", "must not be empty");
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
  const auto& keys = detail::config_keys();
  ExperimentConfig c;
  for (const auto& [key, _] : j.items()) {
    auto it = keys.find(key);
    if (it == keys.end()) throw ConfigError(key, "unknown key");
    it->second(j, c);
  }
  validate(c);
  return c;
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j = {
      {"ratings", c.ratings},
      {"movies", c.movies},
      {"vectors", c.vectors},
      {"similarity", c.similarity},
      {"separator", c.separator},
      {"min_rating", nullptr},
      {"neg_ratio", c.neg_ratio},
      {"train_frac", c.train_frac},
      {"resample_negatives", c.resample_negatives},
      {"synthetic_users", c.synthetic_users},
      {"synthetic_items", c.synthetic_items},
      {"synthetic_clusters", c.synthetic_clusters},
      {"synthetic_seed", c.synthetic_seed},
      {"seed", c.seed},
      {"dim", c.dim},
      {"hidden", c.hidden},
      {"activation", c.activation},
      {"rounds", c.rounds},
      {"batch_size", c.batch_size},
      {"local_epochs", c.local_epochs},
      {"local_batch_size", c.local_batch_size},
      {"lr", c.lr},
      {"aux_epochs", c.aux_epochs},
      {"aux_batch_size", c.aux_batch_size},
      {"item_cl_steps", c.item_cl_steps},
      {"weighting", c.weighting},
      {"threads", c.threads},
      {"epsilon", c.epsilon},
      {"delta", nullptr},
      {"alpha", c.alpha},
      {"beta", c.beta},
      {"lambda", c.lambda},
      {"tau", c.tau},
      {"augmentation", c.augmentation},
      {"item_cl", c.item_cl},
      {"user_cl", c.user_cl},
      {"k", c.k},
      {"out", c.out},
      {"record_wall_time", c.record_wall_time},
  };
  if (c.min_rating) j["min_rating"] = *c.min_rating;
  if (c.delta) j["delta"] = *c.delta;
  return j;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("config '" + path.string() + "': " + e.what());
  }
  return config_from_json(j);
}

inline FeatureFlags feature_flags(const ExperimentConfig& c) {
  return {c.augmentation, c.item_cl, c.user_cl};
}

inline ProtocolConfig protocol_config(const ExperimentConfig& c) {
  ProtocolConfig p;
  p.dims.dim = c.dim;
  p.dims.hidden = c.hidden;
  p.dims.activation = parse_activation(c.activation);
  p.adam.lr = c.lr;
  p.local_epochs = c.local_epochs;
  p.local_batch_size = c.local_batch_size;
  p.clients_per_batch = c.batch_size;
  p.aux_epochs = c.aux_epochs;
  p.aux_batch_size = c.aux_batch_size;
  p.item_cl_steps = c.item_cl_steps;
  p.alpha = c.alpha;
  p.aux_neg_ratio = c.neg_ratio;
  p.loss = {c.tau, c.beta, c.lambda};
  p.flags = feature_flags(c);
  p.weighting = c.weighting == "size" ? Weighting::kBySize : Weighting::kUniform;
  p.resample_negatives = c.resample_negatives;
  p.dataset_neg_ratio = c.neg_ratio;
  p.threads = c.threads;
  return p;
}

inline PrivacyConfig privacy_config(const ExperimentConfig& c) {
  return {c.epsilon, c.delta, c.seed};
}

inline DatasetOptions dataset_options(const ExperimentConfig& c) {
  DatasetOptions o;
  o.neg_ratio = c.neg_ratio;
  o.train_frac = c.train_frac;
  if (c.min_rating) o.min_rating = *c.min_rating;
  o.seed = c.seed;
  return o;
}

inline SyntheticOptions synthetic_options(const ExperimentConfig& c) {
  SyntheticOptions o;
  o.users = c.synthetic_users;
  o.items = c.synthetic_items;
  o.clusters = c.synthetic_clusters;
  o.seed = c.synthetic_seed;
  return o;
}

}  // namespace pdcfrs
