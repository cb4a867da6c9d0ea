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

// Experiment orchestration: load data, run the protocol, write results.
//
// A run writes under its output directory:
//   metrics.csv   one row per evaluation, round 0 being the untrained model
//   summary.json  final metrics and the config
//   config.json   the config echo, loadable as a config file
//   model.ckpt    final parameters

#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pdcfrs/checkpoint.hpp"
#include "pdcfrs/config.hpp"
#include "pdcfrs/data.hpp"
#include "pdcfrs/federated.hpp"
#include "pdcfrs/metrics.hpp"
#include "pdcfrs/privacy.hpp"
#include "pdcfrs/synthetic.hpp"

namespace pdcfrs {

struct Workload {
  InteractionDataset dataset;
  SimilarityModel similarity;
  std::string source;  // "synthetic" or the ratings path
};

inline Workload load_workload(const ExperimentConfig& cfg) {
  Workload w;
  const DatasetOptions opts = dataset_options(cfg);
  if (cfg.ratings.empty()) {
    SyntheticData data = generate_synthetic(synthetic_options(cfg));
    w.dataset = build_dataset(data.ratings, opts);
    w.similarity = SimilarityModel::from_titles(make_catalog(w.dataset, data.titles), data.words);
    w.source = "synthetic";
    return w;
  }
  auto ratings = parse_ratings(cfg.ratings, cfg.separator);
  w.dataset = build_dataset(ratings, opts);
  w.source = cfg.ratings;
  if (!cfg.similarity.empty()) {
    w.similarity = SimilarityModel::from_matrix(load_similarity_csv(cfg.similarity, w.dataset));
  } else if (!cfg.movies.empty() && !cfg.vectors.empty()) {
    auto titles = parse_movies(cfg.movies, cfg.separator);
    w.similarity = SimilarityModel::from_titles(make_catalog(w.dataset, titles),
                                                load_word_vectors(cfg.vectors));
  } else {
    throw ConfigError("similarity", "set either 'similarity' or both 'movies' and 'vectors'");
  }
  return w;
}

inline ExperimentResult run_workload(const ExperimentConfig& cfg, const Workload& w,
                                     ChannelObserver* observer = nullptr) {
  validate(cfg);
  return run_experiment(w.dataset, w.similarity, privacy_config(cfg), protocol_config(cfg),
                        cfg.rounds, cfg.k, cfg.seed, observer);
}

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace detail

/// Wall time is written as 0 unless requested so that reruns produce
/// identical files.
inline void write_metrics_csv(std::ostream& out, const std::vector<RoundMetrics>& rounds,
                              bool wall_time = false) {
  Index k = rounds.empty() ? 20 : rounds.front().k;
  out << "round,recall@" << k << ",ndcg@" << k
      << ",users_evaluated,mean_client_loss,aux_loss,wall_ms\n";
  for (const auto& m : rounds) {
    out << m.round << ',' << detail::fmt(m.recall_at_k) << ',' << detail::fmt(m.ndcg_at_k) << ','
        << m.users_evaluated << ',' << detail::fmt(m.mean_client_loss) << ','
        << detail::fmt(m.aux_loss) << ',' << detail::fmt(wall_time ? m.wall_ms : 0.0) << '\n';
  }
}

struct RunSummary {
  std::string variant;
  RoundMetrics final_round;
  std::vector<RoundMetrics> rounds;
};

inline nlohmann::json summary_json(const ExperimentConfig& cfg, const RunSummary& s) {
  return {
      {"variant", s.variant},
      {"rounds", s.final_round.round},
      {"k", s.final_round.k},
      {"recall", s.final_round.recall_at_k},
      {"ndcg", s.final_round.ndcg_at_k},
      {"users_evaluated", s.final_round.users_evaluated},
      {"config", to_json(cfg)},
  };
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write '" + path.string() + "'");
}

/// Runs one experiment and writes its outputs under `cfg.out`.
inline RunSummary run(const ExperimentConfig& cfg, const Workload& w, std::ostream* log = nullptr) {
  validate(cfg);
  const std::filesystem::path dir(cfg.out);
  std::filesystem::create_directories(dir);
  ExperimentResult r = run_workload(cfg, w);

  RunSummary s{variant_label(feature_flags(cfg)), r.rounds.back(), r.rounds};
  std::ostringstream csv;
  write_metrics_csv(csv, r.rounds, cfg.record_wall_time);
  write_text(dir / "metrics.csv", csv.str());
  write_text(dir / "summary.json", summary_json(cfg, s).dump(2) + "\n");
  write_text(dir / "config.json", to_json(cfg).dump(2) + "\n");
  save_checkpoint(dir / "model.ckpt", r.final_model);
  if (log) {
    *log << s.variant << " rounds=" << s.final_round.round << " recall@" << s.final_round.k << '='
         << detail::fmt(s.final_round.recall_at_k) << " ndcg@" << s.final_round.k << '='
         << detail::fmt(s.final_round.ndcg_at_k) << '\n';
  }
  return s;
}

inline RunSummary run(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
  return run(cfg, load_workload(cfg), log);
}

// ---------------------------------------------------------------------------
// Sweeps.

inline const std::vector<std::string>& sweep_params() {
  static const std::vector<std::string> names = {"epsilon", "alpha", "beta", "lambda", "tau"};
  return names;
}

/// Copy of `cfg` with `param` set from its text form, validated.
inline ExperimentConfig with_param(ExperimentConfig cfg, const std::string& param,
                                   const std::string& value) {
  auto number = detail::parse_number<double>(value);
  if (!number) throw ConfigError(param, "'" + value + "' is not a number");
  if (param == "epsilon") {
    cfg.epsilon = *number;
  } else if (param == "alpha") {
    auto n = detail::parse_number<Index>(value);
    if (!n) throw ConfigError(param, "'" + value + "' is not an integer");
    cfg.alpha = *n;
  } else if (param == "beta") {
    cfg.beta = *number;
  } else if (param == "lambda") {
    cfg.lambda = *number;
  } else if (param == "tau") {
    cfg.tau = *number;
  } else {
    throw ConfigError(param, "cannot sweep; use epsilon, alpha, beta, lambda or tau");
  }
  validate(cfg);
  return cfg;
}

struct SweepRow {
  std::string value;
  std::uint64_t seed = 0;
  bool ok = false;
  double recall = 0.0;
  double ndcg = 0.0;
  std::string error;
};

/// One run per value; run i uses seed cfg.seed + i * seed_stride and writes
/// under `<out>/<param>=<value>`. A failing run is recorded and the sweep
/// continues. The table is also written to `<out>/sweep.csv`.
inline std::vector<SweepRow> sweep(const ExperimentConfig& cfg, const std::string& param,
                                   const std::vector<std::string>& values,
                                   std::uint64_t seed_stride = 1, std::ostream* log = nullptr) {
  validate(cfg);
  if (values.empty()) throw ConfigError(param, "no sweep values given");
  for (const auto& v : values) with_param(cfg, param, v);

  const Workload w = load_workload(cfg);
  const std::filesystem::path dir(cfg.out);
  std::filesystem::create_directories(dir);
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < values.size(); ++i) {
    SweepRow row;
    row.value = values[i];
    ExperimentConfig c = with_param(cfg, param, values[i]);
    c.seed = cfg.seed + static_cast<std::uint64_t>(i) * seed_stride;
    c.out = (dir / (param + "=" + values[i])).string();
    row.seed = c.seed;
    try {
      RunSummary s = run(c, w, log);
      row.ok = true;
      row.recall = s.final_round.recall_at_k;
      row.ndcg = s.final_round.ndcg_at_k;
    } catch (const std::exception& e) {
      row.error = e.what();
      std::replace_if(row.error.begin(), row.error.end(),
                      [](char ch) { return ch == ',' || ch == '\n'; }, ';');
      if (log) *log << param << '=' << values[i] << " failed: " << e.what() << '\n';
    }
    rows.push_back(std::move(row));
  }

  std::ostringstream csv;
  csv << param << ",seed,recall@" << cfg.k << ",ndcg@" << cfg.k << ",error\n";
  for (const auto& r : rows) {
    csv << r.value << ',' << r.seed << ',' << (r.ok ? detail::fmt(r.recall) : "") << ','
        << (r.ok ? detail::fmt(r.ndcg) : "") << ',' << r.error << '\n';
  }
  write_text(dir / "sweep.csv", csv.str());
  return rows;
}

}  // namespace pdcfrs
