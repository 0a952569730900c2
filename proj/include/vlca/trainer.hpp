// SPDX-License-Identifier: Apache-2.0
//
// Leave-one-domain-out training loop: mini-batch SGD on the pooled source
// domains with a step learning-rate schedule, held-out evaluation per epoch.
#pragma once

#include "vlca/model.hpp"
#include "vlca/objective.hpp"
#include "vlca/synth.hpp"

#include <cmath>
#include <numeric>
#include <vector>

namespace vlca {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 16;
  double lr = 1e-3;
  double lr_decay = 0.1;    // multiplied in every lr_decay_every epochs
  int lr_decay_every = 40;
  double weight_decay = 5e-4;
  double val_fraction = 0.1;  // of the pooled source samples
  LossWeights weights;
  StyleMode style_mode = StyleMode::SquaredCosine;
  std::uint64_t seed = 0;

  void validate() const {
    weights.validate();
    if (epochs < 1 || batch_size < 1 || lr_decay_every < 1) throw Error(Errc::InvalidConfig, "epochs/batch must be positive");
    if (!(lr >= 0.0) || !(weight_decay >= 0.0) || !(lr_decay > 0.0))
      throw Error(Errc::InvalidConfig, "lr, lr_decay and weight_decay must be nonnegative");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw Error(Errc::InvalidConfig, "val_fraction must be in [0, 1)");
  }

  double lr_at(int epoch) const { return lr * std::pow(lr_decay, epoch / lr_decay_every); }
};

struct EpochMetrics {
  int epoch = 0;
  double l_cls = 0, l_decouple = 0, l_semantic = 0, l_approx = 0, total = 0;
  double src_acc = 0, lodo_acc = 0;
  double mean_group_size = 0, groups_engaged = 0;
};

struct TrainResult {
  std::vector<EpochMetrics> epochs;
  std::vector<std::size_t> consumed_per_domain;  // samples fed to SGD, by domain tag
  std::size_t train_size = 0;
  std::size_t val_size = 0;
};

/// Fraction of argmax predictions equal to the label.
inline double evaluate_lodo(const Model& model, const Dataset& data) {
  if (data.size() == 0) throw Error(Errc::EmptyDataset, "cannot evaluate on an empty dataset");
  const auto pred = model.predict(data.x);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == data.labels[i];
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

inline Dataset gather(const std::vector<Dataset>& domains, const std::vector<std::pair<std::size_t, Eigen::Index>>& refs) {
  Dataset out;
  if (refs.empty()) return out;
  out.x.resize(static_cast<Eigen::Index>(refs.size()), domains.front().x.cols());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto& [d, r] = refs[i];
    out.x.row(static_cast<Eigen::Index>(i)) = domains[d].x.row(r);
    out.labels.push_back(domains[d].labels[static_cast<std::size_t>(r)]);
    out.domains.push_back(domains[d].domains[static_cast<std::size_t>(r)]);
    out.ids.push_back(domains[d].ids[static_cast<std::size_t>(r)]);
  }
  return out;
}

/// Train on every domain except `held_out`.
///
/// `prompts` must be bound to the full domain index space (so domain tags of
/// the datasets index its style rows) and `dist` must cover every class.
inline TrainResult train(Model& model, const std::vector<Dataset>& domains, std::size_t held_out,
                         const TrainConfig& cfg, const PromptBinding& prompts, const SemanticDistribution& dist) {
  cfg.validate();
  if (held_out >= domains.size()) throw Error(Errc::InvalidArgument, "held-out domain index out of range");
  if (dist.classes() != model.dims.classes) throw Error(Errc::DimensionMismatch, "distribution/model class mismatch");

  // pooled source samples, shuffled once into a fixed train/validation split
  std::vector<std::pair<std::size_t, Eigen::Index>> pool;
  for (std::size_t d = 0; d < domains.size(); ++d) {
    if (d == held_out) continue;
    for (Eigen::Index r = 0; r < domains[d].size(); ++r) pool.emplace_back(d, r);
  }
  if (pool.empty()) throw Error(Errc::EmptyDataset, "no source samples");
  Rng split_rng(derive_seed(cfg.seed, "train-split"));
  split_rng.shuffle(pool.begin(), pool.end());
  const auto n_val = static_cast<std::size_t>(std::floor(cfg.val_fraction * static_cast<double>(pool.size())));
  const Dataset val = gather(domains, {pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_val)});
  const Dataset src = gather(domains, {pool.begin() + static_cast<std::ptrdiff_t>(n_val), pool.end()});

  TrainResult result;
  result.consumed_per_domain.assign(domains.size(), 0);
  result.train_size = static_cast<std::size_t>(src.size());
  result.val_size = n_val;

  Rng batch_rng(derive_seed(cfg.seed, "train-batches"));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(src.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at(epoch);
    batch_rng.shuffle(order.begin(), order.end());
    EpochMetrics em;
    em.epoch = epoch + 1;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const auto m = static_cast<Eigen::Index>(end - start);
      Matrix x(m, src.x.cols());
      FeatureBatch batch;
      for (std::size_t i = start; i < end; ++i) {
        const auto row = order[i];
        x.row(static_cast<Eigen::Index>(i - start)) = src.x.row(row);
        batch.labels.push_back(src.labels[static_cast<std::size_t>(row)]);
        batch.domains.push_back(src.domains[static_cast<std::size_t>(row)]);
        ++result.consumed_per_domain[static_cast<std::size_t>(src.domains[static_cast<std::size_t>(row)])];
      }
      const auto act = model.forward(x);
      batch.features = act.features;
      LossValue loss;
      try {
        loss = total_loss(batch, act.logits, prompts, model.head, dist, cfg.weights, cfg.style_mode);
      } catch (const Error& e) {
        if (e.code() != Errc::NonFiniteLoss) throw;
        throw Error(Errc::NonFiniteLoss, "epoch " + std::to_string(epoch + 1) + " step " + std::to_string(batches + 1) +
                                             ": " + e.what());
      }
      const auto grads = backward(model, x, act, loss.grad_logits, loss.grad_features,
                                  unflatten_row_major(loss.grad_params, model.head.w.rows(), model.head.w.cols()));
      sgd_step(model, grads, lr, cfg.weight_decay);
      if (!model.all_finite())
        throw Error(Errc::NonFiniteLoss, "epoch " + std::to_string(epoch + 1) + " step " + std::to_string(batches + 1) +
                                             ": parameters became non-finite");

      em.l_cls += loss.diagnostics["l_cls"];
      em.l_decouple += loss.diagnostics["l_decouple"];
      em.l_semantic += loss.diagnostics["l_semantic"];
      em.l_approx += loss.diagnostics["l_approx"];
      em.total += loss.value;
      em.mean_group_size += loss.diagnostics["mean_group_size"];
      em.groups_engaged += loss.diagnostics["groups_engaged"];
      ++batches;
    }
    const double inv = 1.0 / batches;
    em.l_cls *= inv;
    em.l_decouple *= inv;
    em.l_semantic *= inv;
    em.l_approx *= inv;
    em.total *= inv;
    em.mean_group_size *= inv;
    em.groups_engaged *= inv;
    em.src_acc = val.size() > 0 ? evaluate_lodo(model, val) : evaluate_lodo(model, src);
    em.lodo_acc = evaluate_lodo(model, domains[held_out]);
    result.epochs.push_back(em);
  }
  return result;
}

}  // namespace vlca
