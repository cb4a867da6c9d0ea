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

// InfoNCE between two embedding tables with cosine similarity, and the
// per-client objective that adds a user-side InfoNCE term to the BCE loss.
//
// For anchors a_i and views b_j:
//
//   L = sum_i -log( exp(cos(a_i, b_i) / tau) / sum_j exp(cos(a_i, b_j) / tau) )
//
// Gradients flow into the anchors only; the view is a constant.

#pragma once

#include <cmath>
#include <span>

#include "pdcfrs/common.hpp"
#include "pdcfrs/model.hpp"

namespace pdcfrs {

struct LossConfig {
  double tau = 0.2;
  double beta = 0.5;    // item-side strength
  double lambda = 0.5;  // user-side strength

  friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

/// Rows scaled to unit length. A zero row has no direction and is rejected.
inline Matrix unit_rows(const Matrix& m) {
  Matrix out = m;
  for (Index i = 0; i < m.rows(); ++i) {
    double n = m.row(i).norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw Error("cosine similarity undefined: row " + std::to_string(i) + " has zero norm");
    }
    out.row(i) /= n;
  }
  return out;
}

namespace detail {

inline void check_pair(const Matrix& anchor, const Matrix& view, double tau) {
  if (anchor.rows() != view.rows() || anchor.cols() != view.cols()) {
    throw Error("info_nce: anchor and view shapes differ");
  }
  if (anchor.rows() < 2) throw Error("info_nce: need at least two rows");
  if (!(tau > 0.0)) throw Error("info_nce: tau must be positive");
}

// Row-wise softmax of `logits` in place; returns sum_i (lse_i - logits_ii).
inline double softmax_rows_diag_loss(Matrix& logits) {
  double loss = 0.0;
  for (Index i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    double mx = row.maxCoeff();
    double diag = row(i);
    row = (row.array() - mx).exp().matrix();
    double z = row.sum();
    loss += mx + std::log(z) - diag;
    row /= z;
  }
  return loss;
}

// Projects d(loss)/d(unit a) back to d(loss)/d(a).
inline RowVector through_normalization(const RowVector& g_unit, const RowVector& unit, double norm) {
  return (g_unit - g_unit.dot(unit) * unit) / norm;
}

}  // namespace detail

inline double info_nce(const Matrix& anchor, const Matrix& view, double tau) {
  detail::check_pair(anchor, view, tau);
  Matrix logits = unit_rows(anchor) * unit_rows(view).transpose() / tau;
  return detail::softmax_rows_diag_loss(logits);
}

/// Returns scale * info_nce(anchor, view, tau) and writes its gradient
/// w.r.t. `anchor` into `grad`.
inline double info_nce_with_grad(const Matrix& anchor, const Matrix& view, double tau, double scale,
                                 Matrix& grad) {
  detail::check_pair(anchor, view, tau);
  Matrix a = unit_rows(anchor);
  Matrix b = unit_rows(view);
  Matrix probs = a * b.transpose() / tau;
  double loss = detail::softmax_rows_diag_loss(probs);
  probs.diagonal().array() -= 1.0;
  Matrix g_unit = (scale / tau) * (probs * b);
  grad.resize(anchor.rows(), anchor.cols());
  for (Index i = 0; i < anchor.rows(); ++i) {
    grad.row(i) = detail::through_normalization(g_unit.row(i), a.row(i), anchor.row(i).norm());
  }
  return scale * loss;
}

/// Gradient of beta * info_nce(items, aux_items, tau) w.r.t. `items`.
inline Matrix grad_item_cl(const Matrix& items, const Matrix& aux_items, const LossConfig& cfg) {
  Matrix grad;
  if (cfg.beta == 0.0) {
    detail::check_pair(items, aux_items, cfg.tau);
    return Matrix::Zero(items.rows(), items.cols());
  }
  info_nce_with_grad(items, aux_items, cfg.tau, cfg.beta, grad);
  return grad;
}

/// One anchor row against a whole view table with unit rows; the positive
/// is row `positive`. Returns the loss and adds scale * d(loss)/d(anchor)
/// into `grad` when non-null.
inline double user_cl_term(const Eigen::Ref<const RowVector>& anchor, const Matrix& unit_view,
                           Index positive, double tau, double scale = 1.0,
                           RowVector* grad = nullptr) {
  double norm = anchor.norm();
  if (!(norm > 0.0)) throw Error("cosine similarity undefined: anchor has zero norm");
  RowVector a = anchor / norm;
  Vector s = unit_view * a.transpose() / tau;
  double mx = s.maxCoeff();
  Vector e = (s.array() - mx).exp().matrix();
  double z = e.sum();
  double loss = mx + std::log(z) - s[positive];
  if (grad) {
    Vector g_s = e / z;
    g_s[positive] -= 1.0;
    RowVector g_unit = (g_s.transpose() * unit_view) * (scale / tau);
    *grad += detail::through_normalization(g_unit, a, norm);
  }
  return loss;
}

/// Per-client objective: BCE over `triples` plus lambda times the
/// user-side InfoNCE of `self_user` against `aux_users`. Gradients (if
/// requested) are accumulated into `grad`; the aux table is constant.
inline double total_client_loss(const ModelParams& p, std::span<const Triple> triples,
                                const Matrix& aux_users, const LossConfig& cfg, Index self_user,
                                Gradients* grad = nullptr) {
  double loss = bce_loss(p, triples, grad);
  if (cfg.lambda != 0.0) {
    if (aux_users.cols() != p.dim()) throw Error("aux user table has the wrong width");
    Matrix unit_view = unit_rows(aux_users);
    if (grad) {
      RowVector g = RowVector::Zero(p.dim());
      loss += cfg.lambda * user_cl_term(p.users.row(self_user), unit_view, self_user, cfg.tau,
                                        cfg.lambda, &g);
      grad->users.row(self_user) += g;
      grad->user_rows.add(self_user);
    } else {
      loss += cfg.lambda * user_cl_term(p.users.row(self_user), unit_view, self_user, cfg.tau);
    }
  }
  return loss;
}

/// Gradient of total_client_loss w.r.t. every parameter of `p`.
inline Gradients grad_total_client_loss(const ModelParams& p, std::span<const Triple> triples,
                                        const Matrix& aux_users, const LossConfig& cfg,
                                        Index self_user) {
  Gradients g = Gradients::zeros_like(p);
  total_client_loss(p, triples, aux_users, cfg, self_user, &g);
  return g;
}

}  // namespace pdcfrs
