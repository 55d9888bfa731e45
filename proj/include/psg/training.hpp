#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "psg/common.hpp"
#include "psg/gradients.hpp"
#include "psg/graph.hpp"
#include "psg/losses.hpp"
#include "psg/model.hpp"
#include "psg/optimizer.hpp"
#include "psg/path_features.hpp"
#include "psg/rng.hpp"

namespace psg {

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 65536;
  std::size_t epochs = 100;
  RegWeights lambdas;
  double gamma = 0.5;
  std::size_t negatives_per_positive = 1;
  double dropout = 0.3;
  std::size_t fanout = 0;  // 0 = full neighborhood
  std::uint64_t seed = 1;
  int workers = 1;

  void validate() const {
    if (learning_rate <= 0) throw ConfigError("learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (gamma < 0.0 || gamma > 1.0)
      throw ConfigError("gamma must lie in [0, 1]");
    if (dropout < 0.0 || dropout >= 1.0)
      throw ConfigError("dropout must lie in [0, 1)");
    if (negatives_per_positive < 1)
      throw ConfigError("negatives_per_positive must be >= 1");
  }
};

/// count uniform pairs from the complement of the training edge set,
/// rejection-sampled; never a self pair, never an existing edge.
inline std::vector<EdgePair> sample_negatives(const Graph& g,
                                              std::size_t count, Rng& rng) {
  NodeId n = g.num_nodes();
  if (n < 2 ||
      g.num_edges() == std::size_t(n) * std::size_t(n - 1) / 2)
    throw ValidationError(
        "sample_negatives: graph is complete, no negative pairs exist");
  std::vector<EdgePair> out;
  out.reserve(count);
  while (out.size() < count) {
    NodeId u = NodeId(rng.uniform_index(n));
    NodeId v = NodeId(rng.uniform_index(n));
    if (u == v || g.has_edge(u, v)) continue;
    out.emplace_back(u, v);
  }
  return out;
}

struct EpochReport {
  double mean_pairwise = 0;
  double mean_contrastive = 0;
  double mean_total = 0;
  std::size_t batches = 0;
};

/// One pass over shuffled positive-edge batches: sample negatives, forward,
/// backward, Adam step. Mutates params and state in place; the rng drives
/// shuffling, negative sampling, neighbor sampling and dropout, so a fixed
/// seed reproduces the parameter trajectory bit for bit.
inline EpochReport train_epoch(const Graph& g, const EdgeFeatureStore& feats,
                               ModelParams<double>& params,
                               const std::vector<std::size_t>* clusters,
                               const EdgeSplit& split,
                               const TrainConfig& config,
                               AdamState<double>& state, Rng& rng,
                               int epoch_index = 0) {
  config.validate();
  if (config.gamma < 1.0 && clusters == nullptr)
    throw ConfigError("train_epoch: gamma < 1 requires content labels");
  if (split.train_pos.empty())
    throw ValidationError("train_epoch: empty training split");

  std::vector<std::size_t> order(split.train_pos.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  BatchOptions opts;
  opts.gamma = config.gamma;
  opts.reg = config.lambdas;
  opts.fanout = config.fanout;
  opts.dropout = config.dropout;
  opts.train = true;
  opts.workers = config.workers;

  EpochReport report;
  for (std::size_t start = 0; start < order.size();
       start += config.batch_size) {
    std::size_t end = std::min(order.size(), start + config.batch_size);
    std::vector<EdgePair> pos;
    pos.reserve(end - start);
    for (std::size_t i = start; i < end; ++i)
      pos.push_back(split.train_pos[order[i]]);
    std::vector<EdgePair> neg = sample_negatives(
        g, pos.size() * config.negatives_per_positive, rng);

    LinkBatch<double> batch(g, feats, params, pos, neg, clusters, opts, rng);
    GradientTape<double> tape = params.zeros_like();
    batch.backward(tape);
    try {
      adam_step(params, tape, state, config.learning_rate);
    } catch (const TrainAbortError& e) {
      throw TrainAbortError(std::string(e.what()) + " (epoch " +
                            std::to_string(epoch_index) + ", batch " +
                            std::to_string(report.batches) + ")");
    }

    report.mean_pairwise += double(batch.loss_pairwise());
    report.mean_contrastive += double(batch.loss_contrastive());
    report.mean_total += double(batch.loss_total());
    ++report.batches;
  }
  report.mean_pairwise /= double(report.batches);
  report.mean_contrastive /= double(report.batches);
  report.mean_total /= double(report.batches);
  return report;
}

}  // namespace psg
