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

// Single-process simulation of the federated protocol with privacy-preserving
// data contribution.
//
// Setup: every client perturbs its interacted items once and uploads them;
// the server pairs the perturbed positives with its own uniform negatives to
// form the auxiliary training store.
//
// Each round:
//   1. the server trains the auxiliary model on the store;
//   2. clients are shuffled and processed in sequential batches. For every
//      batch the server broadcasts the public parameters, each client adds
//      the aux model's top-alpha unseen items to its local data, trains with
//      BCE + lambda * user InfoNCE against the aux user table, and uploads its
//      public parameters;
//   3. the server averages the batch uploads and takes an Adam step on the
//      item table towards the aux item table (item InfoNCE, weight beta);
//   4. the assembled model is evaluated.

#pragma once

#include <algorithm>
#include <chrono>
#include <numeric>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "pdcfrs/adam.hpp"
#include "pdcfrs/common.hpp"
#include "pdcfrs/contrastive.hpp"
#include "pdcfrs/data.hpp"
#include "pdcfrs/metrics.hpp"
#include "pdcfrs/model.hpp"
#include "pdcfrs/privacy.hpp"
#include "pdcfrs/rng.hpp"

namespace pdcfrs {

enum class Weighting { kUniform, kBySize };

struct FeatureFlags {
  bool augmentation = true;
  bool item_cl = true;
  bool user_cl = true;

  friend bool operator==(const FeatureFlags&, const FeatureFlags&) = default;
};

/// Row label for an ablation: FedNCF, FedNCF+Aug, FedNCF+CL or PDC-FRS.
inline std::string variant_label(const FeatureFlags& f) {
  bool cl = f.item_cl || f.user_cl;
  if (f.augmentation && cl) return "PDC-FRS";
  if (f.augmentation) return "FedNCF+Aug";
  if (cl) return "FedNCF+CL";
  return "FedNCF";
}

struct ProtocolConfig {
  ModelDims dims;
  AdamConfig adam;
  Index local_epochs = 5;
  // Examples per local Adam step; 0 means one full-batch step per epoch.
  Index local_batch_size = 0;
  Index clients_per_batch = 256;
  Index aux_epochs = 5;
  Index aux_batch_size = 256;
  Index item_cl_steps = 1;
  Index alpha = 30;
  Index aux_neg_ratio = 4;
  LossConfig loss;
  FeatureFlags flags;
  Weighting weighting = Weighting::kUniform;
  bool resample_negatives = false;
  Index dataset_neg_ratio = 4;
  Index threads = 1;

  // Strengths after the feature flags are applied.
  Index effective_alpha() const { return flags.augmentation ? alpha : 0; }
  LossConfig effective_loss() const {
    return {loss.tau, flags.item_cl ? loss.beta : 0.0, flags.user_cl ? loss.lambda : 0.0};
  }
  bool uses_aux() const {
    auto l = effective_loss();
    return effective_alpha() > 0 || l.beta != 0.0 || l.lambda != 0.0;
  }
};

struct ClientState {
  Index user = 0;
  RowVector embedding;  // private, never uploaded
  std::vector<Triple> local_triples;
};

struct ServerState {
  PublicParams public_params;
  ModelParams aux;
  AdamState aux_adam;
  std::vector<Triple> aux_store;
  MatrixAdam item_cl_adam;
  Index round = 0;
};

/// Hooks on everything that crosses the client/server boundary. The default
/// does nothing; tests use it to check what is (and is not) transmitted.
class ChannelObserver {
 public:
  virtual ~ChannelObserver() = default;
  virtual void on_contribution(const PerturbedContribution&) {}
  virtual void on_broadcast(Index /*round*/, const PublicParams&) {}
  virtual void on_upload(Index /*round*/, Index /*user*/, const PublicParams&) {}
};

// ---------------------------------------------------------------------------
// Aggregation

/// Running (weighted) sum of uploads; `mean()` divides once at the end.
class Aggregator {
 public:
  void add(const PublicParams& p, double weight = 1.0) {
    if (count_ == 0) {
      sum_ = p;
      if (weight != 1.0) scale(sum_, weight);
    } else {
      check_shape(p);
      sum_.items += weight * p.items;
      for (std::size_t l = 0; l < sum_.mlp.layers.size(); ++l) {
        sum_.mlp.layers[l].weight += weight * p.mlp.layers[l].weight;
        sum_.mlp.layers[l].bias += weight * p.mlp.layers[l].bias;
      }
      sum_.mlp.head += weight * p.mlp.head;
    }
    total_weight_ += weight;
    ++count_;
  }

  Index count() const { return count_; }

  PublicParams mean() const {
    if (count_ == 0) throw Error("aggregate: no uploads");
    PublicParams out = sum_;
    out.items /= total_weight_;
    for (auto& l : out.mlp.layers) {
      l.weight /= total_weight_;
      l.bias /= total_weight_;
    }
    out.mlp.head /= total_weight_;
    return out;
  }

 private:
  static void scale(PublicParams& p, double w) {
    p.items *= w;
    for (auto& l : p.mlp.layers) {
      l.weight *= w;
      l.bias *= w;
    }
    p.mlp.head *= w;
  }

  void check_shape(const PublicParams& p) const {
    bool ok = p.items.rows() == sum_.items.rows() && p.items.cols() == sum_.items.cols() &&
              p.mlp.layers.size() == sum_.mlp.layers.size() &&
              p.mlp.head.size() == sum_.mlp.head.size();
    for (std::size_t l = 0; ok && l < p.mlp.layers.size(); ++l) {
      ok = p.mlp.layers[l].weight.rows() == sum_.mlp.layers[l].weight.rows() &&
           p.mlp.layers[l].weight.cols() == sum_.mlp.layers[l].weight.cols() &&
           p.mlp.layers[l].bias.size() == sum_.mlp.layers[l].bias.size();
    }
    if (!ok) throw Error("aggregate: upload shapes differ");
  }

  PublicParams sum_;
  double total_weight_ = 0.0;
  Index count_ = 0;
};

/// Element-wise unweighted mean of the uploads, summed in the given order.
inline PublicParams aggregate(std::span<const PublicParams> uploads) {
  Aggregator agg;
  for (const auto& u : uploads) agg.add(u);
  return agg.mean();
}

// ---------------------------------------------------------------------------
// Auxiliary model

/// Server-side training set: each user's deduplicated perturbed items as
/// positives plus `neg_ratio` uniform negatives per positive drawn from the
/// items outside that set.
inline std::vector<Triple> build_aux_store(std::span<const PerturbedContribution> contributions,
                                           Index num_items, Index neg_ratio, std::uint64_t seed) {
  std::vector<Triple> store;
  for (const auto& c : contributions) {
    std::vector<Index> pos = c.items;
    std::sort(pos.begin(), pos.end());
    pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
    Rng rng = make_rng(seed, Stream::kAuxNegatives, static_cast<std::uint64_t>(c.user));
    auto neg = detail::sample_negatives(num_items, pos, neg_ratio * static_cast<Index>(pos.size()), rng);
    for (Index i : pos) store.push_back({c.user, i, 1.0});
    for (Index i : neg) store.push_back({c.user, i, 0.0});
  }
  return store;
}

namespace detail {

// Shuffles `examples` and runs one Adam step per minibatch. Returns the sum
// of the minibatch objectives. `extra` may add terms to each step's loss and
// gradient.
template <typename Extra>
double adam_epoch(ModelParams& p, AdamState& adam, Gradients& g, std::vector<Triple>& examples,
                  Index batch_size, Rng& rng, Extra&& extra) {
  std::shuffle(examples.begin(), examples.end(), rng);
  const auto n = static_cast<Index>(examples.size());
  const Index bs = batch_size > 0 ? batch_size : std::max<Index>(n, 1);
  double total = 0.0;
  Index start = 0;
  do {
    const Index len = std::min(bs, n - start);
    std::span<const Triple> batch(examples.data() + start, static_cast<std::size_t>(len));
    g.set_zero();
    double loss = bce_loss(p, batch, &g);
    loss += extra(p, g);
    adam.step(p, g);
    total += loss;
    start += len;
  } while (start < n);
  return total;
}

}  // namespace detail

/// Advances the aux model by `epochs` passes over the store. Returns the
/// per-example BCE of the last pass (0 when nothing ran).
inline double train_auxiliary(ServerState& server, Index epochs, Index batch_size,
                              std::uint64_t seed) {
  if (server.aux_store.empty() || epochs <= 0) return 0.0;
  Gradients g = Gradients::zeros_like(server.aux);
  std::vector<Triple> examples = server.aux_store;
  double last = 0.0;
  for (Index e = 0; e < epochs; ++e) {
    Rng rng = make_rng(seed, Stream::kAuxTrain, static_cast<std::uint64_t>(server.round),
                       static_cast<std::uint64_t>(e));
    last = detail::adam_epoch(server.aux, server.aux_adam, g, examples, batch_size, rng,
                              [](const ModelParams&, Gradients&) { return 0.0; });
  }
  return last / static_cast<double>(examples.size());
}

/// The aux model's top-`alpha` items for `user` outside `local_positives`
/// (sorted), best first, ties to the lower index.
inline std::vector<Index> generate_augmentation(const ItemScorer& aux_scorer, const ModelParams& aux,
                                                Index user, std::span<const Index> local_positives,
                                                Index alpha) {
  if (alpha <= 0) return {};
  return topk_from_scores(aux_scorer.logits(aux.users.row(user)), local_positives, alpha);
}

inline std::vector<Index> generate_augmentation(const ModelParams& aux, Index user,
                                                std::span<const Index> local_positives, Index alpha) {
  if (alpha <= 0) return {};
  ItemScorer scorer(aux.items, aux.mlp);
  return generate_augmentation(scorer, aux, user, local_positives, alpha);
}

// ---------------------------------------------------------------------------
// Client

struct ClientUpdate {
  PublicParams params;
  std::vector<double> epoch_losses;
  Index num_examples = 0;
};

/// Local training on a private copy of `snapshot`. The client's embedding
/// is updated in place; only the public part is returned. `unit_aux_users`
/// holds the aux user table with unit rows (required when lambda != 0).
inline ClientUpdate client_local_train(ClientState& client, const PublicParams& snapshot,
                                       std::span<const Index> augmented,
                                       const Matrix* unit_aux_users, const LossConfig& loss,
                                       const ProtocolConfig& cfg, Index round, std::uint64_t seed) {
  ModelParams local;
  local.users = client.embedding;
  local.items = snapshot.items;
  local.mlp = snapshot.mlp;

  std::vector<Triple> examples;
  examples.reserve(client.local_triples.size() + augmented.size());
  for (const auto& t : client.local_triples) examples.push_back({0, t.item, t.label});
  for (Index item : augmented) examples.push_back({0, item, 1.0});

  if (loss.lambda != 0.0 && !unit_aux_users) throw Error("user contrastive term needs the aux users");

  AdamState adam(local, cfg.adam);
  Gradients g = Gradients::zeros_like(local);
  Rng rng = make_rng(seed, Stream::kLocalTrain, static_cast<std::uint64_t>(client.user),
                     static_cast<std::uint64_t>(round));
  auto user_cl = [&](const ModelParams& p, Gradients& grad) -> double {
    if (loss.lambda == 0.0) return 0.0;
    RowVector row_grad = RowVector::Zero(p.dim());
    double l = user_cl_term(p.users.row(0), *unit_aux_users, client.user, loss.tau, loss.lambda,
                            &row_grad);
    grad.users.row(0) += row_grad;
    grad.user_rows.add(0);
    return loss.lambda * l;
  };

  ClientUpdate out;
  out.num_examples = static_cast<Index>(examples.size());
  for (Index e = 0; e < cfg.local_epochs; ++e) {
    out.epoch_losses.push_back(
        detail::adam_epoch(local, adam, g, examples, cfg.local_batch_size, rng, user_cl));
  }
  client.embedding = local.users.row(0);
  out.params.items = std::move(local.items);
  out.params.mlp = std::move(local.mlp);
  return out;
}

// ---------------------------------------------------------------------------
// Server

/// Up to `steps` Adam steps on the public item table minimizing
/// beta * InfoNCE(items, aux items). MLP and head are untouched.
inline void server_item_cl_update(ServerState& server, const LossConfig& loss, Index steps) {
  if (loss.beta == 0.0) return;
  for (Index s = 0; s < steps; ++s) {
    Matrix grad = grad_item_cl(server.public_params.items, server.aux.items, loss);
    server.item_cl_adam.step(server.public_params.items, grad);
  }
}

/// Every user's private embedding plus the current public parameters.
inline ModelParams assemble_model(const ServerState& server, std::span<const ClientState> clients) {
  ModelParams p;
  p.users.resize(static_cast<Index>(clients.size()), server.public_params.items.cols());
  for (const auto& c : clients) p.users.row(c.user) = c.embedding;
  p.items = server.public_params.items;
  p.mlp = server.public_params.mlp;
  return p;
}

/// Client order for `round`: a permutation of [0, n).
inline std::vector<Index> client_order(Index num_clients, std::uint64_t seed, Index round) {
  std::vector<Index> order(static_cast<std::size_t>(num_clients));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng = make_rng(seed, Stream::kClientOrder, static_cast<std::uint64_t>(round));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

/// Owns the simulated server and clients for one experiment.
class Federation {
 public:
  Federation(const InteractionDataset& ds, ProtocolConfig cfg, std::uint64_t seed,
             ChannelObserver* observer = nullptr)
      : ds_(&ds), cfg_(std::move(cfg)), seed_(seed), observer_(observer ? observer : &null_) {
    ModelParams init = init_params(ds.num_users, ds.num_items, cfg_.dims, seed_);
    clients_.resize(static_cast<std::size_t>(ds.num_users));
    for (Index u = 0; u < ds.num_users; ++u) {
      auto& c = clients_[u];
      c.user = u;
      c.embedding = init.users.row(u);
      auto slice = ds.train_of(u);
      c.local_triples.assign(slice.begin(), slice.end());
    }
    server_.public_params = init.public_part();
    server_.item_cl_adam = MatrixAdam(ds.num_items, cfg_.dims.dim, cfg_.adam);
  }

  const ProtocolConfig& config() const { return cfg_; }
  const ServerState& server() const { return server_; }
  const std::vector<ClientState>& clients() const { return clients_; }

  /// Clients perturb their train positives and upload them once. Skipped
  /// entirely when no feature consumes the aux model.
  void contribute(const ExponentialMechanism& mech) {
    if (!cfg_.uses_aux()) return;
    std::vector<PerturbedContribution> uploads;
    uploads.reserve(clients_.size());
    for (const auto& c : clients_) {
      uploads.push_back(perturb_user_set(mech, c.user, ds_->train_positives[c.user], seed_));
    }
    receive_contributions(std::move(uploads));
  }

  /// Uses previously frozen contributions instead of perturbing afresh.
  void receive_contributions(std::vector<PerturbedContribution> uploads) {
    if (!cfg_.uses_aux()) return;
    for (const auto& u : uploads) observer_->on_contribution(u);
    contributions_ = std::move(uploads);
    server_.aux_store = build_aux_store(contributions_, ds_->num_items, cfg_.aux_neg_ratio, seed_);
    Rng rng = make_rng(seed_, Stream::kAuxInit);
    server_.aux = init_params(ds_->num_users, ds_->num_items, cfg_.dims, rng);
    server_.aux_adam = AdamState(server_.aux, cfg_.adam);
  }

  const std::vector<PerturbedContribution>& contributions() const { return contributions_; }

  ModelParams model() const { return assemble_model(server_, clients_); }

  RoundMetrics evaluate(Index k) const { return evaluate_all(model(), *ds_, k); }

  /// One global round; returns its metrics (evaluated at `k`).
  RoundMetrics run_round(Index k) {
    auto t0 = std::chrono::steady_clock::now();
    const Index round = server_.round;
    const LossConfig loss = cfg_.effective_loss();
    const Index alpha = cfg_.effective_alpha();
    const bool aux = cfg_.uses_aux();
    if (aux && server_.aux_store.empty()) {
      throw Error("run_round: aux features enabled but no contributions were received");
    }

    if (cfg_.resample_negatives) resample_local_negatives(round);

    double aux_loss = 0.0;
    if (aux) aux_loss = train_auxiliary(server_, cfg_.aux_epochs, cfg_.aux_batch_size, seed_);

    std::optional<ItemScorer> aux_scorer;
    if (alpha > 0) aux_scorer.emplace(server_.aux.items, server_.aux.mlp);
    std::optional<Matrix> unit_aux_users;
    if (loss.lambda != 0.0) unit_aux_users = unit_rows(server_.aux.users);

    auto order = client_order(static_cast<Index>(clients_.size()), seed_, round);
    const Index per_batch = std::max<Index>(cfg_.clients_per_batch, 1);
    double client_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += per_batch) {
      std::vector<Index> batch(order.begin() + start,
                               order.begin() + std::min(order.size(), start + per_batch));
      std::sort(batch.begin(), batch.end());
      const PublicParams snapshot = server_.public_params;
      observer_->on_broadcast(round, snapshot);

      Aggregator agg;
      auto train_one = [&](Index user) {
        auto& c = clients_[user];
        std::vector<Index> augmented;
        if (alpha > 0) {
          augmented = generate_augmentation(*aux_scorer, server_.aux, user,
                                            ds_->train_positives[user], alpha);
        }
        return client_local_train(c, snapshot, augmented,
                                  unit_aux_users ? &*unit_aux_users : nullptr, loss, cfg_, round,
                                  seed_);
      };
      // Clients in a chunk train concurrently; uploads are folded in client
      // index order so the sum does not depend on scheduling.
      const auto chunk = static_cast<std::size_t>(std::max<Index>(cfg_.threads, 1));
      for (std::size_t i = 0; i < batch.size(); i += chunk) {
        std::size_t end = std::min(batch.size(), i + chunk);
        std::vector<ClientUpdate> updates(end - i);
        if (end - i == 1) {
          updates[0] = train_one(batch[i]);
        } else {
          std::vector<std::jthread> workers;
          for (std::size_t j = i; j < end; ++j) {
            workers.emplace_back([&, j] { updates[j - i] = train_one(batch[j]); });
          }
        }
        for (std::size_t j = i; j < end; ++j) {
          auto& up = updates[j - i];
          observer_->on_upload(round, batch[j], up.params);
          double w = cfg_.weighting == Weighting::kBySize ? static_cast<double>(up.num_examples) : 1.0;
          agg.add(up.params, w);
          client_loss += up.epoch_losses.empty() ? 0.0 : up.epoch_losses.back();
        }
      }
      server_.public_params = agg.mean();
      server_item_cl_update(server_, loss, cfg_.item_cl_steps);
    }
    ++server_.round;

    RoundMetrics m = evaluate(k);
    m.round = server_.round;
    m.mean_client_loss = client_loss / static_cast<double>(clients_.size());
    m.aux_loss = aux_loss;
    m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return m;
  }

 private:
  void resample_local_negatives(Index round) {
    for (auto& c : clients_) {
      Rng rng = make_rng(seed_, Stream::kResample, static_cast<std::uint64_t>(c.user),
                         static_cast<std::uint64_t>(round));
      const auto& pos = ds_->train_positives[c.user];
      auto neg = detail::sample_negatives(ds_->num_items, detail::all_interactions(*ds_, c.user),
                                          cfg_.dataset_neg_ratio * static_cast<Index>(pos.size()), rng);
      c.local_triples.clear();
      for (Index i : pos) c.local_triples.push_back({c.user, i, 1.0});
      for (Index i : neg) c.local_triples.push_back({c.user, i, 0.0});
    }
  }

  const InteractionDataset* ds_;
  ProtocolConfig cfg_;
  std::uint64_t seed_;
  ChannelObserver null_;
  ChannelObserver* observer_;
  ServerState server_;
  std::vector<ClientState> clients_;
  std::vector<PerturbedContribution> contributions_;
};

struct ExperimentResult {
  std::vector<RoundMetrics> rounds;  // rounds[0] is the untrained model
  ModelParams final_model;
  std::vector<PerturbedContribution> contributions;
};

/// Full run: contribution upload, then `rounds` global rounds, evaluating
/// the initial model and every round.
inline ExperimentResult run_experiment(const InteractionDataset& ds, const SimilarityModel& sim,
                                       const PrivacyConfig& privacy, const ProtocolConfig& cfg,
                                       Index rounds, Index k, std::uint64_t seed,
                                       ChannelObserver* observer = nullptr,
                                       const std::vector<PerturbedContribution>* frozen = nullptr) {
  Federation fed(ds, cfg, seed, observer);
  if (cfg.uses_aux()) {
    if (frozen) {
      fed.receive_contributions(*frozen);
    } else {
      ExponentialMechanism mech(sim, privacy);
      fed.contribute(mech);
    }
  }
  ExperimentResult out;
  RoundMetrics initial = fed.evaluate(k);
  initial.round = 0;
  out.rounds.push_back(initial);
  for (Index t = 0; t < rounds; ++t) out.rounds.push_back(fed.run_round(k));
  out.final_model = fed.model();
  out.contributions = fed.contributions();
  return out;
}

}  // namespace pdcfrs
