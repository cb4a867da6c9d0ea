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

// Full-candidate top-K evaluation. Every item outside the user's own train
// positives is a candidate.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "pdcfrs/common.hpp"
#include "pdcfrs/data.hpp"
#include "pdcfrs/model.hpp"

namespace pdcfrs {

struct RoundMetrics {
  Index round = 0;
  double recall_at_k = 0.0;
  double ndcg_at_k = 0.0;
  Index k = 20;
  Index users_evaluated = 0;
  double mean_client_loss = 0.0;
  double aux_loss = 0.0;
  double wall_ms = 0.0;
};

/// Top-k items by score among those not in `excluded` (sorted). Ties go to
/// the lower item index. Returns fewer than k when there are fewer
/// candidates.
inline std::vector<Index> topk_from_scores(const Vector& scores, std::span<const Index> excluded,
                                           Index k) {
  if (k < 1) throw Error("k must be >= 1");
  std::vector<Index> cand;
  cand.reserve(static_cast<std::size_t>(scores.size()));
  auto ex = excluded.begin();
  for (Index i = 0; i < scores.size(); ++i) {
    while (ex != excluded.end() && *ex < i) ++ex;
    if (ex != excluded.end() && *ex == i) continue;
    cand.push_back(i);
  }
  auto better = [&](Index a, Index b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  };
  auto take = std::min<std::size_t>(static_cast<std::size_t>(k), cand.size());
  std::partial_sort(cand.begin(), cand.begin() + take, cand.end(), better);
  cand.resize(take);
  return cand;
}

inline std::vector<Index> topk_candidates(const ModelParams& p, Index user,
                                          std::span<const Index> train_positives, Index k) {
  ItemScorer scorer(p.items, p.mlp);
  return topk_from_scores(scorer.logits(p.users.row(user)), train_positives, k);
}

inline double recall_at_k(std::span<const Index> ranked, std::span<const Index> test_positives,
                          Index k) {
  if (test_positives.empty()) throw Error("recall_at_k: no test positives");
  auto n = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(k));
  std::size_t hits = 0;
  for (std::size_t p = 0; p < n; ++p) {
    if (std::binary_search(test_positives.begin(), test_positives.end(), ranked[p])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(test_positives.size());
}

/// Binary-relevance NDCG with a 1/log2(p + 1) discount. The ideal ranking
/// places min(|test|, k) hits first.
inline double ndcg_at_k(std::span<const Index> ranked, std::span<const Index> test_positives,
                        Index k) {
  if (test_positives.empty()) throw Error("ndcg_at_k: no test positives");
  auto n = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(k));
  double dcg = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    if (std::binary_search(test_positives.begin(), test_positives.end(), ranked[p])) {
      dcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
    }
  }
  double idcg = 0.0;
  auto ideal = std::min<std::size_t>(test_positives.size(), static_cast<std::size_t>(k));
  for (std::size_t p = 0; p < ideal; ++p) idcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
  return dcg / idcg;
}

/// Macro-averaged Recall@k and NDCG@k over users with at least one test
/// positive, summed in user order.
inline RoundMetrics evaluate_all(const ModelParams& p, const InteractionDataset& ds, Index k) {
  ItemScorer scorer(p.items, p.mlp);
  RoundMetrics m;
  m.k = k;
  double recall = 0.0;
  double ndcg = 0.0;
  for (Index u = 0; u < ds.num_users; ++u) {
    const auto& test = ds.test_positives[u];
    if (test.empty()) continue;
    auto ranked = topk_from_scores(scorer.logits(p.users.row(u)), ds.train_positives[u], k);
    recall += recall_at_k(ranked, test, k);
    ndcg += ndcg_at_k(ranked, test, k);
    ++m.users_evaluated;
  }
  if (m.users_evaluated == 0) throw Error("evaluate_all: no user has test positives");
  m.recall_at_k = recall / static_cast<double>(m.users_evaluated);
  m.ndcg_at_k = ndcg / static_cast<double>(m.users_evaluated);
  return m;
}

}  // namespace pdcfrs
