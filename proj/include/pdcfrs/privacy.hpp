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

// Exponential-mechanism perturbation of a user's interacted item set.
//
// Each interacted item v_i is replaced independently by v_j with probability
//
//   Pr[v_i -> v_j] = exp(eps * sim(v_i, v_j) / (2 * delta))
//                    / sum_k exp(eps * sim(v_i, v_k) / (2 * delta))
//
// where sim is a fixed item-to-item similarity and delta bounds its spread.

#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pdcfrs/common.hpp"
#include "pdcfrs/data.hpp"
#include "pdcfrs/rng.hpp"

namespace pdcfrs {

/// Item-to-item similarity, either from mean title word vectors or from a
/// precomputed matrix. Immutable after construction.
class SimilarityModel {
 public:
  /// Mean of the word vectors of each title's known tokens, L2-normalized.
  /// Items with no known token have no vector.
  static SimilarityModel from_titles(const ItemCatalog& catalog, const WordVectorTable& words) {
    SimilarityModel m;
    const auto n = static_cast<Index>(catalog.titles.size());
    m.num_items_ = n;
    m.unit_ = Matrix::Zero(n, std::max<Index>(words.dim, 1));
    m.has_vector_.assign(static_cast<std::size_t>(n), false);
    for (Index i = 0; i < n; ++i) {
      Vector sum = Vector::Zero(words.dim);
      int count = 0;
      for (const auto& tok : catalog.titles[i]) {
        if (const Vector* v = words.find(tok)) {
          sum += *v;
          ++count;
        }
      }
      if (count == 0) continue;
      sum /= count;
      double norm = sum.norm();
      if (norm == 0.0) continue;
      m.unit_.row(i) = (sum / norm).transpose();
      m.has_vector_[i] = true;
    }
    return m;
  }

  /// Stored values are used as-is. Every entry must lie in [-1, 1].
  static SimilarityModel from_matrix(Matrix sim) {
    if (sim.rows() != sim.cols()) throw Error("similarity matrix must be square");
    if (!((sim.array() >= -1.0) && (sim.array() <= 1.0)).all()) {
      throw Error("similarity matrix has values outside [-1, 1]");
    }
    SimilarityModel m;
    m.num_items_ = sim.rows();
    m.matrix_ = std::move(sim);
    return m;
  }

  Index num_items() const { return num_items_; }
  bool precomputed() const { return matrix_.has_value(); }

  std::optional<Vector> item_vector(Index item) const {
    if (precomputed()) throw Error("item_vector needs the title-vector backend");
    if (!has_vector_[item]) return std::nullopt;
    return Vector(unit_.row(item).transpose());
  }

  double similarity(Index i, Index j) const {
    if (i < 0 || j < 0 || i >= num_items_ || j >= num_items_) {
      throw Error("similarity: item index out of range");
    }
    if (precomputed()) return (*matrix_)(i, j);
    if (i == j) return 1.0;
    if (!has_vector_[i] || !has_vector_[j]) return 0.0;
    return std::clamp(unit_.row(i).dot(unit_.row(j)), -1.0, 1.0);
  }

  /// similarity(source, j) for every j.
  Vector row(Index source) const {
    if (source < 0 || source >= num_items_) throw Error("similarity: item index out of range");
    if (precomputed()) return matrix_->row(source).transpose();
    Vector r = Vector::Zero(num_items_);
    if (has_vector_[source]) {
      r = (unit_ * unit_.row(source).transpose()).cwiseMax(-1.0).cwiseMin(1.0);
      for (Index j = 0; j < num_items_; ++j) {
        if (!has_vector_[j]) r[j] = 0.0;
      }
    }
    r[source] = 1.0;
    return r;
  }

  /// Observed (min, max) similarity over all ordered pairs, diagonal included.
  std::pair<double, double> range() const {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (Index i = 0; i < num_items_; ++i) {
      Vector r = row(i);
      lo = std::min(lo, r.minCoeff());
      hi = std::max(hi, r.maxCoeff());
    }
    return {lo, hi};
  }

 private:
  Index num_items_ = 0;
  Matrix unit_;
  std::vector<bool> has_vector_;
  std::optional<Matrix> matrix_;
};

struct PrivacyConfig {
  double epsilon = 5.0;
  // Sensitivity; unset means "use the observed similarity range".
  std::optional<double> delta;
  std::uint64_t seed = 0;

  friend bool operator==(const PrivacyConfig&, const PrivacyConfig&) = default;
};

/// max sim - min sim, or 1 when every similarity is equal.
inline double similarity_sensitivity(const SimilarityModel& sim) {
  auto [lo, hi] = sim.range();
  double spread = hi - lo;
  return spread > 0.0 ? spread : 1.0;
}

inline double resolve_delta(const SimilarityModel& sim, const PrivacyConfig& cfg) {
  if (!(cfg.epsilon >= 0.0) || !std::isfinite(cfg.epsilon)) throw Error("epsilon must be >= 0");
  if (cfg.delta) {
    if (!(*cfg.delta > 0.0)) throw Error("sensitivity delta must be > 0");
    return *cfg.delta;
  }
  return similarity_sensitivity(sim);
}

namespace detail {

// log Pr[source -> j] for every j.
inline Vector replacement_log_probs(const Vector& sims, double epsilon, double delta) {
  Vector logits = sims * (epsilon / (2.0 * delta));
  double mx = logits.maxCoeff();
  double lse = mx + std::log((logits.array() - mx).exp().sum());
  return (logits.array() - lse).matrix();
}

}  // namespace detail

inline Vector replacement_distribution(const SimilarityModel& sim, double epsilon, double delta,
                                       Index source) {
  if (sim.num_items() == 0) throw Error("replacement_distribution: empty catalog");
  Vector logits = sim.row(source) * (epsilon / (2.0 * delta));
  double mx = logits.maxCoeff();
  Vector p = (logits.array() - mx).exp().matrix();
  return p / p.sum();
}

inline Vector replacement_distribution(const SimilarityModel& sim, const PrivacyConfig& cfg,
                                       Index source) {
  return replacement_distribution(sim, cfg.epsilon, resolve_delta(sim, cfg), source);
}

/// Samples replacements from per-source cumulative distributions, built once
/// for the whole catalog.
class ExponentialMechanism {
 public:
  ExponentialMechanism(const SimilarityModel& sim, const PrivacyConfig& cfg)
      : epsilon_(cfg.epsilon), delta_(resolve_delta(sim, cfg)), n_(sim.num_items()) {
    cdf_.resize(n_, n_);
    for (Index s = 0; s < n_; ++s) {
      Vector p = replacement_distribution(sim, epsilon_, delta_, s);
      double acc = 0.0;
      for (Index j = 0; j < n_; ++j) {
        acc += p[j];
        cdf_(s, j) = acc;
      }
    }
  }

  double epsilon() const { return epsilon_; }
  double delta() const { return delta_; }
  Index num_items() const { return n_; }

  Index sample(Index source, Rng& rng) const {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double* row = cdf_.data() + source * n_;
    double u = unif(rng) * row[n_ - 1];
    auto it = std::upper_bound(row, row + n_, u);
    return std::min<Index>(it - row, n_ - 1);
  }

 private:
  double epsilon_;
  double delta_;
  Index n_;
  Matrix cdf_;
};

/// What a client uploads once: its interacted items after perturbation.
struct PerturbedContribution {
  Index user = 0;
  std::vector<Index> items;  // multiset, one output per input item

  friend bool operator==(const PerturbedContribution&, const PerturbedContribution&) = default;
};

/// Replaces each item independently. The stream is keyed by (seed, user)
/// so users can be perturbed in any order or in parallel.
inline PerturbedContribution perturb_user_set(const ExponentialMechanism& mech, Index user,
                                              std::span<const Index> positives, std::uint64_t seed) {
  Rng rng = make_rng(seed, Stream::kPerturb, static_cast<std::uint64_t>(user));
  PerturbedContribution out{user, {}};
  out.items.reserve(positives.size());
  for (Index item : positives) out.items.push_back(mech.sample(item, rng));
  return out;
}

/// Largest log(Pr[A(x1) = y] / Pr[A(x2) = y]) over all inputs x1, x2 and
/// outputs y, by exhaustive enumeration. Meant for small catalogs.
inline double verify_ldp_bound(const SimilarityModel& sim, double epsilon, double delta) {
  const Index n = sim.num_items();
  if (n <= 1) return 0.0;
  Matrix logp(n, n);
  for (Index x = 0; x < n; ++x) {
    logp.row(x) = detail::replacement_log_probs(sim.row(x), epsilon, delta).transpose();
  }
  double worst = 0.0;
  for (Index y = 0; y < n; ++y) {
    worst = std::max(worst, logp.col(y).maxCoeff() - logp.col(y).minCoeff());
  }
  return worst;
}

inline double verify_ldp_bound(const SimilarityModel& sim, const PrivacyConfig& cfg) {
  return verify_ldp_bound(sim, cfg.epsilon, resolve_delta(sim, cfg));
}

// ---------------------------------------------------------------------------
// Contribution dump: `user_id<TAB>item_id,item_id,...`, one line per user.

inline void write_contributions(std::ostream& out, const InteractionDataset& ds,
                                std::span<const PerturbedContribution> contributions) {
  for (const auto& c : contributions) {
    out << ds.user_ids[c.user] << '\t';
    for (std::size_t k = 0; k < c.items.size(); ++k) {
      if (k) out << ',';
      out << ds.item_ids[c.items[k]];
    }
    out << '\n';
  }
}

inline std::vector<PerturbedContribution> read_contributions(std::istream& in,
                                                             const InteractionDataset& ds,
                                                             const std::string& source = "<stream>") {
  std::vector<PerturbedContribution> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(source, line_no, "missing tab separator");
    auto uit = ds.user_index.find(line.substr(0, tab));
    if (uit == ds.user_index.end()) throw ParseError(source, line_no, "unknown user id");
    PerturbedContribution c{uit->second, {}};
    std::string_view rest(line);
    rest.remove_prefix(tab + 1);
    if (!rest.empty()) {
      for (auto id : detail::split(rest, ",")) {
        auto iit = ds.item_index.find(std::string(id));
        if (iit == ds.item_index.end()) {
          throw ParseError(source, line_no, "unknown item id '" + std::string(id) + "'");
        }
        c.items.push_back(iit->second);
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace pdcfrs
