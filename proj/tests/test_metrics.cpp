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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pdcfrs/metrics.hpp"

namespace pdcfrs {
namespace {

std::vector<Index> topk(std::vector<double> scores, std::vector<Index> excluded, Index k) {
  Vector s = Eigen::Map<Vector>(scores.data(), static_cast<Index>(scores.size()));
  return topk_from_scores(s, excluded, k);
}

TEST(TopK, FewerCandidatesThanK) {
  EXPECT_EQ(topk({0.1, 0.2, 0.3}, {1}, 20), (std::vector<Index>{2, 0}));
}

TEST(TopK, TiesGoToLowerIndex) {
  EXPECT_EQ(topk({0.1, 0.9, 0.9}, {}, 2), (std::vector<Index>{1, 2}));
}

TEST(TopK, MatchesFullSortOnRandomInstances) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<Index> pick(0, 9);
    std::vector<double> scores(50);
    for (auto& x : scores) x = static_cast<double>(pick(rng));  // many ties
    std::vector<Index> excluded;
    for (Index i = 0; i < 50; ++i) {
      if (pick(rng) < 2) excluded.push_back(i);
    }
    Index k = 1 + trial % 10;
    EXPECT_EQ(topk(scores, excluded, k), oracle::rank_all(scores, excluded, k));
  }
}

TEST(TopK, RejectsNonPositiveK) { EXPECT_THROW(topk({1.0}, {}, 0), Error); }

TEST(Recall, Cases) {
  std::vector<Index> ranked = {4, 2, 7};
  EXPECT_EQ(recall_at_k(ranked, std::vector<Index>{2, 4}, 3), 1.0);
  EXPECT_EQ(recall_at_k(ranked, std::vector<Index>{1, 5}, 3), 0.0);
  EXPECT_EQ(recall_at_k(ranked, std::vector<Index>{2, 9}, 3), 0.5);
  EXPECT_THROW(recall_at_k(ranked, std::vector<Index>{}, 3), Error);
}

TEST(Ndcg, Cases) {
  std::vector<Index> ranked = {4, 2, 7};
  EXPECT_EQ(ndcg_at_k(ranked, std::vector<Index>{4}, 3), 1.0);
  EXPECT_NEAR(ndcg_at_k(ranked, std::vector<Index>{7}, 3), 1.0 / std::log2(4.0), 1e-15);
  EXPECT_NEAR(ndcg_at_k(ranked, std::vector<Index>{7}, 3), 0.5, 1e-15);
  EXPECT_EQ(ndcg_at_k(ranked, std::vector<Index>{9}, 3), 0.0);
}

TEST(Metrics, MatchBruteForceOnRandomInstances) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<Index> size(5, 50);
    Index n = size(rng);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> scores(static_cast<std::size_t>(n));
    for (auto& x : scores) x = std::round(u(rng) * 20.0);
    std::vector<Index> excluded, test;
    for (Index i = 0; i < n; ++i) {
      double r = u(rng);
      if (r < 0.15) excluded.push_back(i);
      else if (r < 0.35) test.push_back(i);
    }
    if (test.empty()) test.push_back(excluded.empty() ? 0 : n - 1);
    test.erase(std::remove_if(test.begin(), test.end(),
                              [&](Index i) { return std::count(excluded.begin(), excluded.end(), i); }),
               test.end());
    if (test.empty()) continue;
    Index k = 1 + trial % 10;
    auto ranked = topk(scores, excluded, k);
    auto ref = oracle::rank_all(scores, excluded, k);
    EXPECT_NEAR(recall_at_k(ranked, test, k), oracle::recall(ref, test), 1e-12);
    EXPECT_NEAR(ndcg_at_k(ranked, test, k), oracle::ndcg(ref, test, k), 1e-12);
  }
}

InteractionDataset tiny_dataset() {
  std::vector<RawRating> r;
  for (int u = 0; u < 4; ++u) {
    for (int i = 0; i < 6; ++i) r.push_back({std::to_string(u), std::to_string((u + i) % 12), 5, {}});
  }
  r.push_back({"lonely", "0", 5, {}});
  return build_dataset(r, DatasetOptions{});
}

TEST(EvaluateAll, PerfectModelScoresOne) {
  auto ds = tiny_dataset();
  // Hidden unit k is relu(u_k + v_k - 1) with one-hot items, so the logit
  // is 1 exactly when item k is marked in the user vector.
  const Index n = ds.num_items;
  ModelParams p;
  p.users = Matrix::Zero(ds.num_users, n);
  p.items = Matrix::Identity(n, n);
  for (Index u = 0; u < ds.num_users; ++u) {
    for (Index i : ds.test_positives[u]) p.users(u, i) = 1.0;
  }
  Matrix w(n, 2 * n);
  w << Matrix::Identity(n, n), Matrix::Identity(n, n);
  p.mlp.layers.push_back({w, Vector::Constant(n, -1.0)});
  p.mlp.head = Vector::Ones(n);
  auto m = evaluate_all(p, ds, 20);
  EXPECT_EQ(m.recall_at_k, 1.0);
  EXPECT_EQ(m.ndcg_at_k, 1.0);
}

TEST(EvaluateAll, SkipsUsersWithoutTestItems) {
  auto ds = tiny_dataset();
  ModelDims dims;
  dims.dim = 4;
  auto p = init_params(ds.num_users, ds.num_items, dims, 3);
  auto m = evaluate_all(p, ds, 20);
  Index with_test = 0;
  for (const auto& t : ds.test_positives) with_test += !t.empty();
  EXPECT_EQ(m.users_evaluated, with_test);
  EXPECT_LT(m.users_evaluated, ds.num_users);
}

TEST(EvaluateAll, MacroAverageOfPerUserMetrics) {
  auto ds = tiny_dataset();
  auto p = oracle::random_model(ds.num_users, ds.num_items, 3, {4}, 8);
  auto m = evaluate_all(p, ds, 3);
  double r = 0.0, n = 0.0;
  Index count = 0;
  for (Index u = 0; u < ds.num_users; ++u) {
    if (ds.test_positives[u].empty()) continue;
    std::vector<double> s(static_cast<std::size_t>(ds.num_items));
    for (Index i = 0; i < ds.num_items; ++i) s[i] = oracle::logit(p, u, i);
    auto ref = oracle::rank_all(s, ds.train_positives[u], 3);
    r += oracle::recall(ref, ds.test_positives[u]);
    n += oracle::ndcg(ref, ds.test_positives[u], 3);
    ++count;
  }
  EXPECT_NEAR(m.recall_at_k, r / count, 1e-12);
  EXPECT_NEAR(m.ndcg_at_k, n / count, 1e-12);
}

TEST(EvaluateAll, RandomModelNearChance) {
  // 300 users, 1000 items, 50 interactions each: a random ranking finds
  // about 20 / |candidates| of the test items.
  std::vector<RawRating> r;
  std::mt19937_64 rng(2);
  for (int u = 0; u < 300; ++u) {
    std::vector<int> items(1000);
    std::iota(items.begin(), items.end(), 0);
    std::shuffle(items.begin(), items.end(), rng);
    for (int k = 0; k < 50; ++k) r.push_back({std::to_string(u), std::to_string(items[k]), 5, {}});
  }
  DatasetOptions opts;
  opts.neg_ratio = 0;
  auto ds = build_dataset(r, opts);
  ModelDims dims;
  dims.dim = 8;
  dims.hidden = {8};
  auto p = init_params(ds.num_users, ds.num_items, dims, 4);
  p.users = oracle::random_matrix(ds.num_users, 8, 5);
  p.items = oracle::random_matrix(ds.num_items, 8, 6);
  auto m = evaluate_all(p, ds, 20);
  const double chance = 20.0 / (ds.num_items - 40.0);
  EXPECT_NEAR(m.recall_at_k, chance, 0.01);
}

}  // namespace
}  // namespace pdcfrs
