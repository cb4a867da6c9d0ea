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

#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pdcfrs/adam.hpp"
#include "pdcfrs/contrastive.hpp"

namespace pdcfrs {
namespace {

TEST(InfoNce, IdenticalOrthonormalViews) {
  Matrix a = Matrix::Identity(2, 2);
  const double e = std::exp(1.0);
  EXPECT_NEAR(info_nce(a, a, 1.0), 2.0 * -std::log(e / (e + 1.0)), 1e-14);
  EXPECT_NEAR(info_nce(a, a, 1.0), 0.6265, 1e-4);
}

TEST(InfoNce, SwappedOrthonormalViews) {
  Matrix a = Matrix::Identity(2, 2);
  Matrix b(2, 2);
  b << 0, 1, 1, 0;
  const double e = std::exp(1.0);
  EXPECT_NEAR(info_nce(a, b, 1.0), 2.0 * -std::log(1.0 / (1.0 + e)), 1e-14);
  EXPECT_NEAR(info_nce(a, b, 1.0), 2.0 * 1.3133, 1e-4);
}

TEST(InfoNce, MatchesScalarReference) {
  Matrix a = oracle::random_matrix(6, 5, 1);
  Matrix b = oracle::random_matrix(6, 5, 2);
  EXPECT_NEAR(info_nce(a, b, 0.2), oracle::info_nce(a, b, 0.2), 1e-10);
}

TEST(InfoNce, InvariantUnderJointRowPermutation) {
  Matrix a = oracle::random_matrix(5, 4, 3);
  Matrix b = oracle::random_matrix(5, 4, 4);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
  perm.indices() << 3, 0, 4, 1, 2;
  Matrix pa = perm * a, pb = perm * b;
  EXPECT_NEAR(info_nce(a, b, 0.5), info_nce(pa, pb, 0.5), 1e-12);
}

TEST(InfoNce, RejectsDegenerateInput) {
  EXPECT_THROW(info_nce(Matrix::Ones(1, 3), Matrix::Ones(1, 3), 0.2), Error);
  EXPECT_THROW(info_nce(Matrix::Ones(2, 3), Matrix::Ones(2, 3), 0.0), Error);
  EXPECT_THROW(info_nce(Matrix::Zero(2, 3), Matrix::Ones(2, 3), 0.2), Error);
  EXPECT_THROW(info_nce(Matrix::Ones(2, 3), Matrix::Ones(3, 3), 0.2), Error);
}

TEST(ItemCl, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed : {5u, 6u, 7u}) {
    Matrix v = oracle::random_matrix(5, 4, seed);
    Matrix aux = oracle::random_matrix(5, 4, seed + 100);
    LossConfig cfg{0.3, 0.7, 0.0};
    Matrix g = grad_item_cl(v, aux, cfg);
    double err = oracle::max_relative_error(
        v, g, [&] { return cfg.beta * oracle::info_nce(v, aux, cfg.tau); });
    EXPECT_LT(err, 1e-4) << "seed " << seed;
  }
}

TEST(ItemCl, ZeroStrengthGivesZeroGradient) {
  Matrix v = oracle::random_matrix(4, 3, 1);
  Matrix aux = oracle::random_matrix(4, 3, 2);
  EXPECT_EQ(grad_item_cl(v, aux, {0.2, 0.0, 0.5}).norm(), 0.0);
}

TEST(ItemCl, GradientRowsFollowJointPermutation) {
  Matrix v = oracle::random_matrix(5, 3, 8);
  Matrix aux = oracle::random_matrix(5, 3, 9);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
  perm.indices() << 2, 4, 0, 1, 3;
  LossConfig cfg;
  Matrix g = grad_item_cl(v, aux, cfg);
  Matrix gp = grad_item_cl(perm * v, perm * aux, cfg);
  EXPECT_LT((Matrix(perm * g) - gp).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ItemCl, OneAdamStepDecreasesLoss) {
  Matrix v = oracle::random_matrix(10, 8, 31);
  Matrix aux = oracle::random_matrix(10, 8, 32);
  LossConfig cfg;
  double before = cfg.beta * info_nce(v, aux, cfg.tau);
  MatrixAdam adam(10, 8, AdamConfig{});
  adam.step(v, grad_item_cl(v, aux, cfg));
  EXPECT_LT(cfg.beta * info_nce(v, aux, cfg.tau), before);
}

TEST(UserCl, TermGradientMatchesFiniteDifferences) {
  Matrix aux = oracle::random_matrix(5, 4, 40);
  Matrix unit = unit_rows(aux);
  Matrix anchor = oracle::random_matrix(1, 4, 41);
  for (Index self : {0, 3}) {
    RowVector g = RowVector::Zero(4);
    user_cl_term(anchor.row(0), unit, self, 0.2, 0.5, &g);
    Matrix gm = g;
    double err = oracle::max_relative_error(anchor, gm, [&] {
      Matrix a = aux;
      a.row(self) = anchor.row(0);
      return 0.5 * oracle::nce_row(a, self, aux, 0.2);
    });
    EXPECT_LT(err, 1e-4);
  }
}

std::vector<Triple> client_triples() {
  return {{1, 0, 1.0}, {1, 3, 0.0}, {1, 5, 1.0}, {1, 2, 0.0}, {1, 7, 1.0}, {1, 6, 0.0}};
}

TEST(ClientObjective, ValueMatchesReference) {
  auto p = oracle::random_model(3, 8, 4, {4, 3}, 50);
  Matrix aux = oracle::random_matrix(3, 4, 51);
  LossConfig cfg{0.2, 0.5, 0.5};
  auto t = client_triples();
  EXPECT_NEAR(total_client_loss(p, t, aux, cfg, 1),
              oracle::client_objective(p, t, aux, cfg.tau, cfg.lambda, 1), 1e-11);
}

TEST(ClientObjective, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed : {60u, 61u, 62u}) {
    auto p = oracle::random_model(3, 8, 4, {4, 3, 2}, seed);
    Matrix aux = oracle::random_matrix(3, 4, seed + 7);
    LossConfig cfg{0.2, 0.5, 0.5};
    auto t = client_triples();
    Gradients g = grad_total_client_loss(p, t, aux, cfg, 1);
    double err = oracle::max_relative_error(oracle::flat(p, g), [&] {
      return oracle::client_objective(p, t, aux, cfg.tau, cfg.lambda, 1);
    });
    EXPECT_LT(err, 1e-4) << "seed " << seed;
  }
}

TEST(ClientObjective, ZeroLambdaIsPlainBce) {
  auto p = oracle::random_model(3, 8, 4, {4}, 70);
  Matrix aux = oracle::random_matrix(3, 4, 71);
  auto t = client_triples();
  Gradients a = grad_total_client_loss(p, t, aux, {0.2, 0.5, 0.0}, 1);
  Gradients b = Gradients::zeros_like(p);
  bce_loss(p, t, &b);
  EXPECT_EQ(a.users, b.users);
  EXPECT_EQ(a.items, b.items);
  EXPECT_EQ(a.mlp.head, b.mlp.head);
}

TEST(ClientObjective, NoTriplesNoLambdaGivesZeroGradient) {
  auto p = oracle::random_model(3, 8, 4, {4}, 72);
  Matrix aux = oracle::random_matrix(3, 4, 73);
  Gradients g = grad_total_client_loss(p, {}, aux, {0.2, 0.5, 0.0}, 0);
  double total = g.users.norm() + g.items.norm() + g.mlp.head.norm();
  for (const auto& l : g.mlp.layers) total += l.weight.norm() + l.bias.norm();
  EXPECT_EQ(total, 0.0);
}

}  // namespace
}  // namespace pdcfrs
