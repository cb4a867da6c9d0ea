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

// Rating-file ingestion, implicit-feedback dataset construction, item titles
// and word vectors.

#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <iterator>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pdcfrs/common.hpp"
#include "pdcfrs/rng.hpp"

namespace pdcfrs {

struct RawRating {
  std::string user_id;
  std::string item_id;
  double rating = 0.0;
  std::optional<std::int64_t> timestamp;

  friend bool operator==(const RawRating&, const RawRating&) = default;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> out;
  if (sep.empty()) {
    out.push_back(line);
    return out;
  }
  std::size_t pos = 0;
  while (true) {
    std::size_t next = line.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + sep.size();
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  s = trim(s);
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return value;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return in;
}

}  // namespace detail

/// Parses `user<sep>item<sep>rating[<sep>timestamp]` lines. Blank lines are
/// skipped; anything else that does not match is an error naming the line.
inline std::vector<RawRating> parse_ratings(std::istream& in, std::string_view separator = "::",
                                            const std::string& source = "<stream>") {
  std::vector<RawRating> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split(line, separator);
    if (fields.size() != 3 && fields.size() != 4) {
      throw ParseError(source, line_no, "expected 3 or 4 fields, got " +
                                            std::to_string(fields.size()));
    }
    RawRating r;
    r.user_id = std::string(detail::trim(fields[0]));
    r.item_id = std::string(detail::trim(fields[1]));
    if (r.user_id.empty() || r.item_id.empty()) {
      throw ParseError(source, line_no, "empty user or item id");
    }
    auto rating = detail::parse_number<double>(fields[2]);
    if (!rating || !std::isfinite(*rating)) {
      throw ParseError(source, line_no, "non-numeric rating '" + std::string(fields[2]) + "'");
    }
    r.rating = *rating;
    if (fields.size() == 4) {
      auto ts = detail::parse_number<std::int64_t>(fields[3]);
      if (!ts) {
        throw ParseError(source, line_no, "non-integer timestamp '" + std::string(fields[3]) + "'");
      }
      r.timestamp = *ts;
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<RawRating> parse_ratings(const std::string& path, std::string_view separator = "::") {
  auto in = detail::open_input(path);
  return parse_ratings(in, separator, path);
}

struct DatasetOptions {
  Index neg_ratio = 4;
  double train_frac = 0.8;
  // Ratings strictly below this are dropped before conversion to implicit
  // feedback. The default keeps every rated item.
  double min_rating = -std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
};

/// Implicit-feedback dataset with a per-user train/test split. Train triples
/// are grouped by user; `train_of(u)` returns that user's slice.
struct InteractionDataset {
  Index num_users = 0;
  Index num_items = 0;
  std::vector<std::string> user_ids;  // index -> raw id
  std::vector<std::string> item_ids;
  std::unordered_map<std::string, Index> user_index;
  std::unordered_map<std::string, Index> item_index;

  std::vector<Triple> train;
  std::vector<std::size_t> train_offsets;  // size num_users + 1
  std::vector<std::vector<Index>> train_positives;  // sorted, per user
  std::vector<std::vector<Index>> test_positives;   // sorted, per user

  // Raw users dropped because nothing survived filtering and dedup.
  Index excluded_users = 0;

  std::span<const Triple> train_of(Index user) const {
    return std::span<const Triple>(train).subspan(
        train_offsets[user], train_offsets[user + 1] - train_offsets[user]);
  }

  bool operator==(const InteractionDataset& o) const {
    return num_users == o.num_users && num_items == o.num_items && user_ids == o.user_ids &&
           item_ids == o.item_ids && train == o.train && train_offsets == o.train_offsets &&
           train_positives == o.train_positives && test_positives == o.test_positives &&
           excluded_users == o.excluded_users;
  }
};

namespace detail {

// Uniform sample without replacement of `count` items from everything the
// user has not interacted with. `interacted` must be sorted.
inline std::vector<Index> sample_negatives(Index num_items, const std::vector<Index>& interacted,
                                           Index count, Rng& rng) {
  std::vector<Index> pool;
  pool.reserve(static_cast<std::size_t>(num_items) - interacted.size());
  auto it = interacted.begin();
  for (Index i = 0; i < num_items; ++i) {
    if (it != interacted.end() && *it == i) {
      ++it;
      continue;
    }
    pool.push_back(i);
  }
  if (count >= static_cast<Index>(pool.size())) return pool;
  std::vector<Index> out;
  out.reserve(count);
  std::sample(pool.begin(), pool.end(), std::back_inserter(out), count, rng);
  return out;
}

inline void append_user_triples(InteractionDataset& ds, Index user,
                                const std::vector<Index>& positives,
                                const std::vector<Index>& negatives) {
  for (Index item : positives) ds.train.push_back({user, item, 1.0});
  for (Index item : negatives) ds.train.push_back({user, item, 0.0});
}

inline std::vector<Index> all_interactions(const InteractionDataset& ds, Index user) {
  std::vector<Index> all = ds.train_positives[user];
  all.insert(all.end(), ds.test_positives[user].begin(), ds.test_positives[user].end());
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace detail

/// Builds the implicit-feedback dataset: contiguous indices in order of first
/// appearance, dedup keeping the first occurrence, a per-user random split
/// and `neg_ratio` negatives per train positive drawn from the items the user
/// never touched. Pure function of its arguments.
inline InteractionDataset build_dataset(std::span<const RawRating> ratings,
                                        const DatasetOptions& opts) {
  if (opts.neg_ratio < 0) throw Error("neg_ratio must be >= 0");
  if (!(opts.train_frac > 0.0 && opts.train_frac < 1.0)) {
    throw Error("train_frac must lie in (0, 1)");
  }
  if (ratings.empty()) throw Error("no ratings to build a dataset from");

  InteractionDataset ds;
  std::unordered_set<std::string> raw_users;
  std::vector<std::vector<Index>> interactions;
  std::vector<std::unordered_set<Index>> seen;

  for (const auto& r : ratings) {
    raw_users.insert(r.user_id);
    if (r.rating < opts.min_rating) continue;
    auto [uit, new_user] = ds.user_index.try_emplace(r.user_id, ds.num_users);
    if (new_user) {
      ds.user_ids.push_back(r.user_id);
      interactions.emplace_back();
      seen.emplace_back();
      ++ds.num_users;
    }
    auto [iit, new_item] = ds.item_index.try_emplace(r.item_id, ds.num_items);
    if (new_item) {
      ds.item_ids.push_back(r.item_id);
      ++ds.num_items;
    }
    Index u = uit->second;
    Index i = iit->second;
    if (seen[u].insert(i).second) interactions[u].push_back(i);
  }
  ds.excluded_users = static_cast<Index>(raw_users.size()) - ds.num_users;
  if (ds.num_users == 0) throw Error("every user was excluded by the rating filter");

  ds.train_positives.resize(ds.num_users);
  ds.test_positives.resize(ds.num_users);
  ds.train_offsets.assign(1, 0);
  for (Index u = 0; u < ds.num_users; ++u) {
    Rng rng = make_rng(opts.seed, Stream::kSplit, static_cast<std::uint64_t>(u));
    std::vector<Index> items = interactions[u];
    std::shuffle(items.begin(), items.end(), rng);
    const auto n = static_cast<Index>(items.size());
    Index n_train = n;
    if (n >= 2) {
      n_train = std::llround(opts.train_frac * static_cast<double>(n));
      n_train = std::clamp<Index>(n_train, 1, n - 1);
    }
    std::vector<Index> train(items.begin(), items.begin() + n_train);
    std::vector<Index> test(items.begin() + n_train, items.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    ds.train_positives[u] = train;
    ds.test_positives[u] = test;

    std::vector<Index> interacted = interactions[u];
    std::sort(interacted.begin(), interacted.end());
    auto negatives = detail::sample_negatives(ds.num_items, interacted, opts.neg_ratio * n_train, rng);
    detail::append_user_triples(ds, u, train, negatives);
    ds.train_offsets.push_back(ds.train.size());
  }
  return ds;
}

/// Redraws every user's train negatives from a fresh stream keyed by `epoch`.
/// Positives, splits and the negative count per user are unchanged.
inline void resample_negatives(InteractionDataset& ds, Index neg_ratio, std::uint64_t seed,
                               std::uint64_t epoch) {
  std::vector<Triple> train;
  train.reserve(ds.train.size());
  std::vector<std::size_t> offsets{0};
  for (Index u = 0; u < ds.num_users; ++u) {
    Rng rng = make_rng(seed, Stream::kResample, static_cast<std::uint64_t>(u), epoch);
    const auto& pos = ds.train_positives[u];
    auto negatives = detail::sample_negatives(ds.num_items, detail::all_interactions(ds, u),
                                              neg_ratio * static_cast<Index>(pos.size()), rng);
    for (Index item : pos) train.push_back({u, item, 1.0});
    for (Index item : negatives) train.push_back({u, item, 0.0});
    offsets.push_back(train.size());
  }
  ds.train = std::move(train);
  ds.train_offsets = std::move(offsets);
}

// ---------------------------------------------------------------------------
// Titles and word vectors

/// Lowercased alphanumeric tokens with a trailing "(1995)"-style year removed.
inline std::vector<std::string> tokenize_title(std::string_view title) {
  title = detail::trim(title);
  if (title.size() >= 6 && title.back() == ')') {
    auto open = title.rfind('(');
    if (open != std::string_view::npos && title.size() - open == 6) {
      auto year = title.substr(open + 1, 4);
      if (std::all_of(year.begin(), year.end(), [](unsigned char c) { return std::isdigit(c); })) {
        title = detail::trim(title.substr(0, open));
      }
    }
  }
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : title) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

/// Reads MovieLens `movies.dat` (`MovieID::Title::Genres`) into raw id -> title.
inline std::unordered_map<std::string, std::string> parse_movies(
    std::istream& in, std::string_view separator = "::", const std::string& source = "<stream>") {
  std::unordered_map<std::string, std::string> titles;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split(line, separator);
    if (fields.size() < 2) throw ParseError(source, line_no, "expected id and title");
    titles.emplace(std::string(detail::trim(fields[0])), std::string(fields[1]));
  }
  return titles;
}

inline std::unordered_map<std::string, std::string> parse_movies(const std::string& path,
                                                                 std::string_view separator = "::") {
  auto in = detail::open_input(path);
  return parse_movies(in, separator, path);
}

/// Title tokens per item index. Items without a known title get no tokens.
struct ItemCatalog {
  std::vector<std::vector<std::string>> titles;
};

inline ItemCatalog make_catalog(const InteractionDataset& ds,
                                const std::unordered_map<std::string, std::string>& titles) {
  ItemCatalog cat;
  cat.titles.resize(ds.num_items);
  for (Index i = 0; i < ds.num_items; ++i) {
    if (auto it = titles.find(ds.item_ids[i]); it != titles.end()) {
      cat.titles[i] = tokenize_title(it->second);
    }
  }
  return cat;
}

struct WordVectorTable {
  Index dim = 0;
  std::unordered_map<std::string, Vector> vectors;

  const Vector* find(const std::string& token) const {
    auto it = vectors.find(token);
    return it == vectors.end() ? nullptr : &it->second;
  }
  std::size_t size() const { return vectors.size(); }
};

/// GloVe-style text: `token v1 v2 ... vd` per line, whitespace separated.
inline WordVectorTable load_word_vectors(std::istream& in, const std::string& source = "<stream>") {
  WordVectorTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string token;
    if (!(ss >> token)) continue;
    std::vector<double> values;
    std::string field;
    while (ss >> field) {
      auto v = detail::parse_number<double>(field);
      if (!v) throw ParseError(source, line_no, "bad value '" + field + "' for token '" + token + "'");
      values.push_back(*v);
    }
    if (values.empty()) throw ParseError(source, line_no, "token '" + token + "' has no values");
    if (table.dim == 0) {
      table.dim = static_cast<Index>(values.size());
    } else if (static_cast<Index>(values.size()) != table.dim) {
      throw ParseError(source, line_no,
                       "token '" + token + "' has dimension " + std::to_string(values.size()) +
                           ", expected " + std::to_string(table.dim));
    }
    table.vectors[token] = Eigen::Map<const Vector>(values.data(), table.dim);
  }
  return table;
}

inline WordVectorTable load_word_vectors(const std::string& path) {
  auto in = detail::open_input(path);
  return load_word_vectors(in, path);
}

/// Square similarity matrix CSV: a header row of item ids (first cell
/// ignored), then one row per item id. Items absent from the file get 0
/// similarity to everything else and 1 to themselves.
inline Matrix load_similarity_csv(std::istream& in, const InteractionDataset& ds,
                                  const std::string& source = "<stream>") {
  Matrix sim = Matrix::Identity(ds.num_items, ds.num_items);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::optional<Index>> columns;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split(line, ",");
    if (columns.empty()) {
      for (std::size_t c = 1; c < fields.size(); ++c) {
        auto it = ds.item_index.find(std::string(detail::trim(fields[c])));
        columns.push_back(it == ds.item_index.end() ? std::nullopt : std::optional(it->second));
      }
      if (columns.empty()) throw ParseError(source, line_no, "empty header row");
      continue;
    }
    if (fields.size() != columns.size() + 1) {
      throw ParseError(source, line_no, "row width does not match header");
    }
    auto rit = ds.item_index.find(std::string(detail::trim(fields[0])));
    for (std::size_t c = 0; c < columns.size(); ++c) {
      auto v = detail::parse_number<double>(fields[c + 1]);
      if (!v || !(*v >= -1.0 && *v <= 1.0)) {
        throw ParseError(source, line_no, "similarity value '" + std::string(fields[c + 1]) +
                                              "' is not a number in [-1, 1]");
      }
      if (rit != ds.item_index.end() && columns[c]) sim(rit->second, *columns[c]) = *v;
    }
  }
  return sim;
}

inline Matrix load_similarity_csv(const std::string& path, const InteractionDataset& ds) {
  auto in = detail::open_input(path);
  return load_similarity_csv(in, ds, path);
}

}  // namespace pdcfrs
