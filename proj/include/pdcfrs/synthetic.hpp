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

// Offline stand-in for a MovieLens-style corpus. Items belong to planted
// clusters; titles are drawn from per-cluster topic words whose vectors sit
// near a cluster centre, so title similarity recovers the clusters. User
// activity follows a power law and users favour a few clusters.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "pdcfrs/common.hpp"
#include "pdcfrs/data.hpp"
#include "pdcfrs/rng.hpp"

namespace pdcfrs {

struct SyntheticOptions {
  Index users = 600;
  Index items = 800;
  Index clusters = 10;
  Index min_interactions = 12;
  Index max_interactions = 200;
  double activity_exponent = 2.5;  // Pareto tail of per-user activity
  Index favourite_clusters = 1;
  double preference = 0.9;        // chance an interaction hits a favourite
  double popularity_exponent = 0.8;
  Index word_dim = 16;
  Index topic_words = 8;           // per cluster
  Index noise_words = 0;
  Index title_topic_words = 2;
  double word_noise = 0.1;
  std::uint64_t seed = 7;

  friend bool operator==(const SyntheticOptions&, const SyntheticOptions&) = default;
};

struct SyntheticData {
  std::vector<RawRating> ratings;
  std::unordered_map<std::string, std::string> titles;  // raw item id -> title
  WordVectorTable words;
  std::vector<Index> item_cluster;
};

inline SyntheticData generate_synthetic(const SyntheticOptions& o) {
  if (o.users <= 0 || o.items <= 0 || o.clusters <= 0 || o.clusters > o.items ||
      o.min_interactions <= 0 || o.max_interactions < o.min_interactions || o.word_dim <= 0 ||
      o.topic_words <= 0 || o.favourite_clusters <= 0) {
    throw Error("synthetic: invalid options");
  }
  Rng rng = make_rng(o.seed, Stream::kSynthetic);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  SyntheticData out;

  // Words. Vectors are non-negative, so similarities fall in [0, 1]; each
  // cluster's topic words sit around its own axis.
  out.words.dim = o.word_dim;
  auto positive_unit = [&] {
    Vector v(o.word_dim);
    for (Index k = 0; k < o.word_dim; ++k) v[k] = std::abs(normal(rng));
    return Vector(v / v.norm());
  };
  for (Index c = 0; c < o.clusters; ++c) {
    Vector centre = Vector::Zero(o.word_dim);
    centre[c % o.word_dim] = 1.0;
    for (Index w = 0; w < o.topic_words; ++w) {
      Vector v = centre + o.word_noise * positive_unit();
      out.words.vectors["c" + std::to_string(c) + "w" + std::to_string(w)] = v;
    }
  }
  for (Index w = 0; w < o.noise_words; ++w) out.words.vectors["n" + std::to_string(w)] = positive_unit();

  // Items: cluster assignment is round-robin so clusters are balanced;
  // popularity rank within a cluster follows insertion order.
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(o.clusters));
  out.item_cluster.resize(static_cast<std::size_t>(o.items));
  std::uniform_int_distribution<Index> topic(0, o.topic_words - 1);
  std::uniform_int_distribution<Index> noise(0, std::max<Index>(o.noise_words - 1, 0));
  std::uniform_int_distribution<int> year(1950, 2000);
  for (Index i = 0; i < o.items; ++i) {
    Index c = i % o.clusters;
    out.item_cluster[i] = c;
    members[c].push_back(i);
    std::string title;
    for (Index t = 0; t < o.title_topic_words; ++t) {
      title += "C" + std::to_string(c) + "W" + std::to_string(topic(rng)) + " ";
    }
    if (o.noise_words > 0) title += "N" + std::to_string(noise(rng)) + " ";
    title += "(" + std::to_string(year(rng)) + ")";
    out.titles[std::to_string(i + 1)] = title;
  }
  std::vector<std::discrete_distribution<Index>> within;
  for (const auto& m : members) {
    std::vector<double> w;
    for (std::size_t r = 0; r < m.size(); ++r) {
      w.push_back(1.0 / std::pow(static_cast<double>(r + 1), o.popularity_exponent));
    }
    within.emplace_back(w.begin(), w.end());
  }

  // Users.
  std::uniform_int_distribution<Index> any_cluster(0, o.clusters - 1);
  std::uniform_int_distribution<int> stars(1, 5);
  std::int64_t clock = 978300000;
  for (Index u = 0; u < o.users; ++u) {
    double draw = std::pow(1.0 - unif(rng), -1.0 / (o.activity_exponent - 1.0));
    Index n = std::min<Index>(o.max_interactions,
                              static_cast<Index>(std::floor(o.min_interactions * draw)));
    n = std::min(n, o.items);
    std::vector<Index> favs;
    for (Index f = 0; f < o.favourite_clusters; ++f) favs.push_back(any_cluster(rng));
    std::uniform_int_distribution<std::size_t> pick_fav(0, favs.size() - 1);
    std::unordered_set<Index> seen;
    Index attempts = 0;
    while (static_cast<Index>(seen.size()) < n && attempts < 50 * n) {
      ++attempts;
      Index c = unif(rng) < o.preference ? favs[pick_fav(rng)] : any_cluster(rng);
      Index item = members[c][within[c](rng)];
      if (!seen.insert(item).second) continue;
      out.ratings.push_back({std::to_string(u + 1), std::to_string(item + 1),
                             static_cast<double>(stars(rng)), clock++});
    }
  }
  return out;
}

/// Writes `ratings.dat`, `movies.dat` and `vectors.txt` under `dir` in the
/// same formats the loaders read.
inline void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream r(dir / "ratings.dat");
  for (const auto& x : data.ratings) {
    r << x.user_id << "::" << x.item_id << "::" << static_cast<int>(x.rating) << "::"
      << x.timestamp.value_or(0) << '\n';
  }
  std::ofstream m(dir / "movies.dat");
  std::vector<std::pair<Index, std::string>> titles;
  for (const auto& [id, t] : data.titles) titles.emplace_back(std::stoll(id), t);
  std::sort(titles.begin(), titles.end());
  for (const auto& [id, t] : titles) {
    m << id << "::" << t << "::C" << data.item_cluster[static_cast<std::size_t>(id - 1)] << '\n';
  }
  std::ofstream v(dir / "vectors.txt");
  std::vector<std::string> tokens;
  for (const auto& [tok, _] : data.words.vectors) tokens.push_back(tok);
  std::sort(tokens.begin(), tokens.end());
  v.precision(17);
  for (const auto& tok : tokens) {
    v << tok;
    const auto& vec = data.words.vectors.at(tok);
    for (Index k = 0; k < vec.size(); ++k) v << ' ' << vec[k];
    v << '\n';
  }
  if (!r || !m || !v) throw Error("synthetic: failed writing to " + dir.string());
}

}  // namespace pdcfrs
