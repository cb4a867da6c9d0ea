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

// Neural collaborative filtering predictor:
//
//   score(u, i) = sigmoid(head . MLP([user_u, item_i]))
//
// with hand-written batched forward/backward passes and the binary
// cross-entropy objective.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pdcfrs/common.hpp"
#include "pdcfrs/rng.hpp"

namespace pdcfrs {

enum class Activation { kRelu, kTanh, kIdentity };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kIdentity: return "identity";
  }
  return "relu";
}

inline Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  if (s == "identity") return Activation::kIdentity;
  throw Error("unknown activation '" + s + "'");
}

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out

  friend bool operator==(const DenseLayer& a, const DenseLayer& b) {
    return a.weight == b.weight && a.bias == b.bias;
  }
};

struct Mlp {
  std::vector<DenseLayer> layers;
  Vector head;
  Activation activation = Activation::kRelu;

  friend bool operator==(const Mlp& a, const Mlp& b) {
    return a.layers == b.layers && a.head == b.head && a.activation == b.activation;
  }
};

/// Parameters shared through the server: item table and the MLP.
struct PublicParams {
  Matrix items;
  Mlp mlp;

  friend bool operator==(const PublicParams& a, const PublicParams& b) {
    return a.items == b.items && a.mlp == b.mlp;
  }
};

struct ModelParams {
  Matrix users;  // num_users x dim
  Matrix items;  // num_items x dim
  Mlp mlp;

  Index dim() const { return items.cols(); }
  Index num_users() const { return users.rows(); }
  Index num_items() const { return items.rows(); }

  PublicParams public_part() const { return {items, mlp}; }
  void assign_public(const PublicParams& p) {
    items = p.items;
    mlp = p.mlp;
  }

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    return a.users == b.users && a.items == b.items && a.mlp == b.mlp;
  }
};

struct ModelDims {
  Index dim = 32;
  std::vector<Index> hidden = {32, 16, 8};
  Activation activation = Activation::kRelu;
  double init_std = 0.01;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

inline bool all_finite(const ModelParams& p) {
  if (!p.users.allFinite() || !p.items.allFinite() || !p.mlp.head.allFinite()) return false;
  for (const auto& l : p.mlp.layers) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

/// Embeddings ~ N(0, init_std^2), MLP weights and head Xavier-uniform,
/// biases zero.
inline ModelParams init_params(Index num_users, Index num_items, const ModelDims& dims, Rng& rng) {
  if (num_users <= 0 || num_items <= 0 || dims.dim <= 0 || dims.hidden.empty()) {
    throw Error("init_params: dimensions must be positive");
  }
  for (Index h : dims.hidden) {
    if (h <= 0) throw Error("init_params: hidden widths must be positive");
  }
  std::normal_distribution<double> normal(0.0, dims.init_std);
  ModelParams p;
  p.users.resize(num_users, dims.dim);
  p.items.resize(num_items, dims.dim);
  for (Index i = 0; i < p.users.size(); ++i) p.users.data()[i] = normal(rng);
  for (Index i = 0; i < p.items.size(); ++i) p.items.data()[i] = normal(rng);

  auto xavier = [&](Index fan_in, Index fan_out) {
    double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return std::uniform_real_distribution<double>(-a, a);
  };
  Index in = 2 * dims.dim;
  for (Index out : dims.hidden) {
    DenseLayer layer;
    layer.weight.resize(out, in);
    auto dist = xavier(in, out);
    for (Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = dist(rng);
    layer.bias = Vector::Zero(out);
    p.mlp.layers.push_back(std::move(layer));
    in = out;
  }
  p.mlp.head.resize(in);
  auto dist = xavier(in, 1);
  for (Index i = 0; i < in; ++i) p.mlp.head[i] = dist(rng);
  p.mlp.activation = dims.activation;
  return p;
}

inline ModelParams init_params(Index num_users, Index num_items, const ModelDims& dims,
                               std::uint64_t seed) {
  Rng rng = make_rng(seed, Stream::kInit);
  return init_params(num_users, num_items, dims, rng);
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace detail {

inline void activate(Matrix& z, Activation a) {
  switch (a) {
    case Activation::kRelu: z = z.cwiseMax(0.0); break;
    case Activation::kTanh: z = z.array().tanh().matrix(); break;
    case Activation::kIdentity: break;
  }
}

// Multiplies `grad` in place by the activation derivative at pre-activation z.
inline void activation_backward(Matrix& grad, const Matrix& z, Activation a) {
  switch (a) {
    case Activation::kRelu:
      grad = (z.array() > 0.0).select(grad, 0.0);
      break;
    case Activation::kTanh:
      grad.array() *= 1.0 - z.array().tanh().square();
      break;
    case Activation::kIdentity: break;
  }
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

/// Cached intermediate values of a batched forward pass. Row b of `inputs`
/// is the concatenation [user, item] of example b.
struct ForwardPass {
  std::vector<Matrix> pre;   // pre-activations per layer
  std::vector<Matrix> post;  // post[0] = inputs, post[l + 1] = act(pre[l])
  Vector logits;
  Vector probs;
};

inline void forward(const Mlp& mlp, Matrix inputs, ForwardPass& fp) {
  fp.pre.resize(mlp.layers.size());
  fp.post.resize(mlp.layers.size() + 1);
  fp.post[0] = std::move(inputs);
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    const auto& layer = mlp.layers[l];
    fp.pre[l].noalias() = fp.post[l] * layer.weight.transpose();
    fp.pre[l].rowwise() += layer.bias.transpose();
    fp.post[l + 1] = fp.pre[l];
    detail::activate(fp.post[l + 1], mlp.activation);
  }
  fp.logits.noalias() = fp.post.back() * mlp.head;
  fp.probs = fp.logits.unaryExpr([](double x) { return detail::sigmoid(x); });
}

struct MlpGrad {
  std::vector<DenseLayer> layers;
  Vector head;

  static MlpGrad zeros_like(const Mlp& mlp) {
    MlpGrad g;
    for (const auto& l : mlp.layers) {
      g.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
    }
    g.head = Vector::Zero(mlp.head.size());
    return g;
  }
  void set_zero() {
    for (auto& l : layers) {
      l.weight.setZero();
      l.bias.setZero();
    }
    head.setZero();
  }
};

/// Back-propagates d(loss)/d(logits) through the MLP, accumulating into
/// `grad`. Returns d(loss)/d(inputs).
inline Matrix backward(const Mlp& mlp, const ForwardPass& fp, const Vector& dlogits, MlpGrad& grad) {
  grad.head.noalias() += fp.post.back().transpose() * dlogits;
  Matrix delta = dlogits * mlp.head.transpose();
  for (std::size_t l = mlp.layers.size(); l-- > 0;) {
    detail::activation_backward(delta, fp.pre[l], mlp.activation);
    grad.layers[l].weight.noalias() += delta.transpose() * fp.post[l];
    grad.layers[l].bias.noalias() += delta.colwise().sum().transpose();
    Matrix prev = delta * mlp.layers[l].weight;
    delta = std::move(prev);
  }
  return delta;
}

/// Tracks which rows of an embedding table have been written.
class RowSet {
 public:
  RowSet() = default;
  explicit RowSet(Index n) : mark_(static_cast<std::size_t>(n), 0) {}

  void add(Index row) {
    if (!mark_[row]) {
      mark_[row] = 1;
      rows_.push_back(row);
    }
  }
  void clear() {
    for (Index r : rows_) mark_[r] = 0;
    rows_.clear();
  }
  const std::vector<Index>& rows() const { return rows_; }
  bool contains(Index row) const { return mark_[row] != 0; }

 private:
  std::vector<char> mark_;
  std::vector<Index> rows_;
};

/// Gradient w.r.t. a ModelParams. Embedding gradients are dense but only the
/// rows listed in `user_rows` / `item_rows` may be nonzero.
struct Gradients {
  Matrix users;
  Matrix items;
  MlpGrad mlp;
  RowSet user_rows;
  RowSet item_rows;

  static Gradients zeros_like(const ModelParams& p) {
    Gradients g;
    g.users = Matrix::Zero(p.users.rows(), p.users.cols());
    g.items = Matrix::Zero(p.items.rows(), p.items.cols());
    g.mlp = MlpGrad::zeros_like(p.mlp);
    g.user_rows = RowSet(p.users.rows());
    g.item_rows = RowSet(p.items.rows());
    return g;
  }

  void set_zero() {
    for (Index r : user_rows.rows()) users.row(r).setZero();
    for (Index r : item_rows.rows()) items.row(r).setZero();
    user_rows.clear();
    item_rows.clear();
    mlp.set_zero();
  }
};

inline Matrix gather_inputs(const ModelParams& p, std::span<const Triple> triples) {
  const Index d = p.dim();
  Matrix x(static_cast<Index>(triples.size()), 2 * d);
  for (std::size_t b = 0; b < triples.size(); ++b) {
    x.row(b).head(d) = p.users.row(triples[b].user);
    x.row(b).tail(d) = p.items.row(triples[b].item);
  }
  return x;
}

inline double predict_score(const ModelParams& p, Index user, Index item) {
  if (user < 0 || user >= p.num_users() || item < 0 || item >= p.num_items()) {
    throw Error("predict_score: index out of range");
  }
  Triple t{user, item, 0.0};
  ForwardPass fp;
  forward(p.mlp, gather_inputs(p, std::span<const Triple>(&t, 1)), fp);
  return fp.probs[0];
}

inline constexpr double kProbClamp = 1e-7;

inline double bce_term(double prob, double label) {
  double p = std::clamp(prob, kProbClamp, 1.0 - kProbClamp);
  return -(label * std::log(p) + (1.0 - label) * std::log(1.0 - p));
}

/// Summed binary cross-entropy over `triples`. When `grad` is given the
/// gradient is accumulated into it. The gradient is the logit-form
/// (prob - label), i.e. the clamp only guards the reported value.
inline double bce_loss(const ModelParams& p, std::span<const Triple> triples,
                       Gradients* grad = nullptr) {
  if (triples.empty()) return 0.0;
  ForwardPass fp;
  forward(p.mlp, gather_inputs(p, triples), fp);
  double loss = 0.0;
  Vector dlogits(static_cast<Index>(triples.size()));
  for (std::size_t b = 0; b < triples.size(); ++b) {
    loss += bce_term(fp.probs[b], triples[b].label);
    dlogits[b] = fp.probs[b] - triples[b].label;
  }
  if (grad) {
    Matrix dx = backward(p.mlp, fp, dlogits, grad->mlp);
    const Index d = p.dim();
    for (std::size_t b = 0; b < triples.size(); ++b) {
      grad->users.row(triples[b].user) += dx.row(b).head(d);
      grad->items.row(triples[b].item) += dx.row(b).tail(d);
      grad->user_rows.add(triples[b].user);
      grad->item_rows.add(triples[b].item);
    }
  }
  return loss;
}

/// Scores every item for one user vector. The item half of the first layer
/// is computed once in the constructor and reused across users.
class ItemScorer {
 public:
  ItemScorer(const Matrix& items, const Mlp& mlp) : mlp_(&mlp) {
    const Index d = items.cols();
    const auto& w = mlp.layers.front().weight;
    item_proj_.noalias() = items * w.rightCols(d).transpose();
  }

  // Pre-sigmoid scores. Ranking uses these so saturated probabilities
  // cannot create spurious ties.
  Vector logits(const Eigen::Ref<const RowVector>& user) const {
    const Index d = user.size();
    const auto& first = mlp_->layers.front();
    RowVector offset = user * first.weight.leftCols(d).transpose() + first.bias.transpose();
    Matrix a = item_proj_.rowwise() + offset;
    detail::activate(a, mlp_->activation);
    for (std::size_t l = 1; l < mlp_->layers.size(); ++l) {
      const auto& layer = mlp_->layers[l];
      Matrix z = a * layer.weight.transpose();
      z.rowwise() += layer.bias.transpose();
      detail::activate(z, mlp_->activation);
      a = std::move(z);
    }
    return a * mlp_->head;
  }

  Vector probs(const Eigen::Ref<const RowVector>& user) const {
    return logits(user).unaryExpr([](double x) { return detail::sigmoid(x); });
  }

 private:
  const Mlp* mlp_;
  Matrix item_proj_;
};

}  // namespace pdcfrs
