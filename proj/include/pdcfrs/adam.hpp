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

#pragma once

#include <cmath>
#include <vector>

#include "pdcfrs/common.hpp"
#include "pdcfrs/model.hpp"

namespace pdcfrs {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

// First and second moments for one tensor.
struct Moments {
  Matrix m;
  Matrix v;

  static Moments zeros(Index rows, Index cols) {
    return {Matrix::Zero(rows, cols), Matrix::Zero(rows, cols)};
  }
};

namespace detail {

struct BiasCorrection {
  double c1;
  double c2;
};

template <typename Param, typename Grad, typename M>
void adam_apply(Param&& param, const Grad& grad, M&& m, M&& v, const AdamConfig& cfg,
                BiasCorrection bc) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseAbs2();
  param.array() -= cfg.lr * (m.array() / bc.c1) / ((v.array() / bc.c2).sqrt() + cfg.eps);
}

inline BiasCorrection correction(const AdamConfig& cfg, std::int64_t step) {
  return {1.0 - std::pow(cfg.beta1, static_cast<double>(step)),
          1.0 - std::pow(cfg.beta2, static_cast<double>(step))};
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& g, const char* what) {
  if (!g.allFinite()) throw Error(std::string("adam: non-finite gradient in ") + what);
}

}  // namespace detail

/// Adam over a single dense matrix (used for the server-side item update).
class MatrixAdam {
 public:
  MatrixAdam() = default;
  MatrixAdam(Index rows, Index cols, AdamConfig cfg) : cfg_(cfg), mom_(Moments::zeros(rows, cols)) {}

  void step(Matrix& param, const Matrix& grad) {
    if (param.rows() != mom_.m.rows() || param.cols() != mom_.m.cols() ||
        grad.rows() != param.rows() || grad.cols() != param.cols()) {
      throw Error("adam: shape mismatch");
    }
    detail::require_finite(grad, "matrix");
    ++step_;
    detail::adam_apply(param, grad, mom_.m, mom_.v, cfg_, detail::correction(cfg_, step_));
  }

  std::int64_t steps() const { return step_; }
  const Moments& moments() const { return mom_; }

 private:
  AdamConfig cfg_;
  Moments mom_;
  std::int64_t step_ = 0;
};

/// Adam state for a full ModelParams. Embedding rows are updated only once
/// they have received a gradient; a row that never did has zero moments and
/// a dense update would leave it unchanged anyway, so the result is identical
/// to dense Adam.
class AdamState {
 public:
  AdamState() = default;
  AdamState(const ModelParams& p, AdamConfig cfg)
      : cfg_(cfg),
        users_(Moments::zeros(p.users.rows(), p.users.cols())),
        items_(Moments::zeros(p.items.rows(), p.items.cols())),
        active_users_(p.users.rows()),
        active_items_(p.items.rows()) {
    for (const auto& l : p.mlp.layers) {
      layers_.push_back({Moments::zeros(l.weight.rows(), l.weight.cols()),
                         Moments::zeros(l.bias.size(), 1)});
    }
    head_ = Moments::zeros(p.mlp.head.size(), 1);
  }

  const AdamConfig& config() const { return cfg_; }
  std::int64_t steps() const { return step_; }
  const Moments& user_moments() const { return users_; }
  const Moments& item_moments() const { return items_; }
  const Moments& head_moments() const { return head_; }

  /// One Adam update of `p` with `g`. Throws on a non-finite gradient before
  /// touching any state.
  void step(ModelParams& p, const Gradients& g) {
    check(p, g);
    ++step_;
    auto bc = detail::correction(cfg_, step_);
    for (Index r : g.user_rows.rows()) active_users_.add(r);
    for (Index r : g.item_rows.rows()) active_items_.add(r);
    for (Index r : active_users_.rows()) {
      detail::adam_apply(p.users.row(r), g.users.row(r), users_.m.row(r), users_.v.row(r), cfg_, bc);
    }
    for (Index r : active_items_.rows()) {
      detail::adam_apply(p.items.row(r), g.items.row(r), items_.m.row(r), items_.v.row(r), cfg_, bc);
    }
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      detail::adam_apply(p.mlp.layers[l].weight, g.mlp.layers[l].weight, layers_[l].weight.m,
                         layers_[l].weight.v, cfg_, bc);
      auto bias_m = layers_[l].bias.m.col(0);
      auto bias_v = layers_[l].bias.v.col(0);
      detail::adam_apply(p.mlp.layers[l].bias, g.mlp.layers[l].bias, bias_m, bias_v, cfg_, bc);
    }
    auto head_m = head_.m.col(0);
    auto head_v = head_.v.col(0);
    detail::adam_apply(p.mlp.head, g.mlp.head, head_m, head_v, cfg_, bc);
  }

 private:
  struct LayerMoments {
    Moments weight;
    Moments bias;
  };

  void check(const ModelParams& p, const Gradients& g) const {
    if (p.users.rows() != users_.m.rows() || p.items.rows() != items_.m.rows() ||
        p.mlp.layers.size() != layers_.size() || g.users.rows() != p.users.rows() ||
        g.items.rows() != p.items.rows() || g.mlp.layers.size() != layers_.size()) {
      throw Error("adam: shape mismatch");
    }
    for (Index r : g.user_rows.rows()) detail::require_finite(g.users.row(r), "user embeddings");
    for (Index r : g.item_rows.rows()) detail::require_finite(g.items.row(r), "item embeddings");
    for (const auto& l : g.mlp.layers) {
      detail::require_finite(l.weight, "mlp weights");
      detail::require_finite(l.bias, "mlp bias");
    }
    detail::require_finite(g.mlp.head, "head");
  }

  AdamConfig cfg_;
  Moments users_;
  Moments items_;
  std::vector<LayerMoments> layers_;
  Moments head_;
  RowSet active_users_;
  RowSet active_items_;
  std::int64_t step_ = 0;
};

}  // namespace pdcfrs
