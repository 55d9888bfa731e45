#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "psg/common.hpp"
#include "psg/graph.hpp"
#include "psg/losses.hpp"
#include "psg/model.hpp"
#include "psg/path_features.hpp"
#include "psg/rng.hpp"

namespace psg {

struct BatchOptions {
  double gamma = 1.0;
  RegWeights reg;
  std::size_t fanout = 0;  // 0 = full neighborhood
  double dropout = 0.0;
  bool train = false;
  int workers = 1;
};

/// One training batch: encodes every endpoint once, scores all positive and
/// negative pairs, evaluates the label task on positive edges, and exposes
/// the exact reverse pass for the combined objective.
///
/// Negative j is matched with positive j % P, so any whole multiple of the
/// positive count works as the negative list. The contrastive term averages
/// the two endpoint-label targets of each positive edge.
template <typename Scalar = double>
class LinkBatch {
 public:
  LinkBatch(const Graph& g, const EdgeFeatureStore& feats,
            const ModelParams<Scalar>& params,
            const std::vector<EdgePair>& pos, const std::vector<EdgePair>& neg,
            const std::vector<std::size_t>* clusters, const BatchOptions& opts,
            Rng& rng)
      : params_(&params), pos_(pos), neg_(neg), opts_(opts) {
    if (opts.gamma < 0.0 || opts.gamma > 1.0)
      throw ConfigError("batch: gamma must lie in [0, 1]");
    if (!neg.empty() && pos.empty())
      throw ValidationError("batch: negatives without positives");
    if (!pos.empty() && !neg.empty() && neg.size() % pos.size() != 0)
      throw ValidationError(
          "batch: negative count must be a multiple of the positive count");
    bool label_task = opts.gamma < 1.0;
    if (label_task) {
      if (params.label_head.rows == 0)
        throw ConfigError("batch: gamma < 1 requires a label head");
      if (clusters == nullptr)
        throw ConfigError("batch: gamma < 1 requires content labels");
      if (clusters->size() != g.num_nodes())
        throw ValidationError("batch: cluster label count mismatch");
      clusters_ = clusters;
    }

    std::vector<NodeId> seeds;
    for (const EdgePair& e : pos) {
      seeds.push_back(e.u);
      seeds.push_back(e.v);
    }
    for (const EdgePair& e : neg) {
      seeds.push_back(e.u);
      seeds.push_back(e.v);
    }
    EncoderOptions eopts;
    eopts.fanout = opts.fanout;
    eopts.dropout = opts.dropout;
    eopts.train = opts.train;
    encoder_.emplace(g, feats, params, std::move(seeds), eopts, rng,
                     opts.workers);

    auto score_all = [&](const std::vector<EdgePair>& pairs,
                         std::vector<PredictorTrace<Scalar>>& traces,
                         std::vector<Scalar>& scores) {
      traces.reserve(pairs.size());
      scores.reserve(pairs.size());
      for (const EdgePair& e : pairs) {
        traces.push_back(link_forward(params, encoder_->embedding(e.u),
                                      encoder_->embedding(e.v), opts.dropout,
                                      opts.train, &rng));
        scores.push_back(traces.back().score);
      }
    };
    score_all(pos, pos_traces_, pos_scores_);
    score_all(neg, neg_traces_, neg_scores_);

    pairwise_data_ = 0;
    if (!neg_.empty()) {
      for (std::size_t p = 0; p < neg_.size(); ++p) {
        Scalar e = Scalar(1) - pos_scores_[p % pos_.size()] + neg_scores_[p];
        pairwise_data_ += e * e;
      }
      pairwise_data_ /= Scalar(double(neg_.size()));
    }
    pairwise_ = pairwise_data_ + link_regularizer(params, opts.reg);

    contrastive_data_ = 0;
    if (label_task) {
      logits_.resize(pos_.size());
      softmax_t_.resize(pos_.size());
      for (std::size_t j = 0; j < pos_.size(); ++j) {
        const EdgePair& e = pos_[j];
        std::size_t cu = (*clusters_)[e.u];
        std::size_t cv = (*clusters_)[e.v];
        std::size_t C = params.label_head.rows;
        if (cu >= C || cv >= C)
          throw ValidationError("batch: content label out of range");
        Vec<Scalar> bu = predict_label(params, encoder_->embedding(e.u));
        Vec<Scalar> bv = predict_label(params, encoder_->embedding(e.v));
        Vec<Scalar> t = hadamard(bu, bv);
        Scalar lse = log_sum_exp(t);
        contrastive_data_ +=
            (lse - t[cu]) / Scalar(2) + (lse - t[cv]) / Scalar(2);
        softmax_t_[j] = softmax(t);
        logits_[j] = {std::move(bu), std::move(bv)};
      }
      if (!pos_.empty()) contrastive_data_ /= Scalar(double(pos_.size()));
      contrastive_ = contrastive_data_ + label_regularizer(params, opts.reg);
    } else {
      contrastive_ = 0;
    }

    total_ = total_loss(pairwise_, contrastive_, opts.gamma);
  }

  Scalar loss_pairwise() const { return pairwise_; }
  Scalar loss_contrastive() const { return contrastive_; }
  Scalar loss_total() const { return total_; }
  const std::vector<Scalar>& pos_scores() const { return pos_scores_; }
  const std::vector<Scalar>& neg_scores() const { return neg_scores_; }

  /// Accumulates d(scale * loss_total)/dparam into the tape. Branches with
  /// zero objective weight are skipped, so their gradients stay exactly 0.
  void backward(GradientTape<Scalar>& tape, Scalar scale = Scalar(1)) const {
    const ModelParams<Scalar>& params = *params_;
    double gamma = opts_.gamma;
    std::vector<Vec<Scalar>> gh(encoder_->output_count());

    if (gamma > 0.0 && !neg_.empty()) {
      Scalar w = scale * Scalar(gamma) / Scalar(double(neg_.size()));
      std::vector<Scalar> g_pos(pos_.size(), 0);
      std::vector<Scalar> g_neg(neg_.size(), 0);
      for (std::size_t p = 0; p < neg_.size(); ++p) {
        Scalar e = Scalar(1) - pos_scores_[p % pos_.size()] + neg_scores_[p];
        g_pos[p % pos_.size()] -= Scalar(2) * e * w;
        g_neg[p] += Scalar(2) * e * w;
      }
      for (std::size_t j = 0; j < pos_.size(); ++j)
        link_backward(params, pos_traces_[j], g_pos[j], opts_.dropout,
                      opts_.train, tape, grad_slot(gh, pos_[j].u),
                      grad_slot(gh, pos_[j].v));
      for (std::size_t p = 0; p < neg_.size(); ++p)
        link_backward(params, neg_traces_[p], g_neg[p], opts_.dropout,
                      opts_.train, tape, grad_slot(gh, neg_[p].u),
                      grad_slot(gh, neg_[p].v));
    }

    if (gamma < 1.0 && !pos_.empty()) {
      Scalar w = scale * Scalar(1.0 - gamma) / Scalar(double(pos_.size()));
      for (std::size_t j = 0; j < pos_.size(); ++j) {
        const EdgePair& e = pos_[j];
        std::size_t cu = (*clusters_)[e.u];
        std::size_t cv = (*clusters_)[e.v];
        const Vec<Scalar>& bu = logits_[j].first;
        const Vec<Scalar>& bv = logits_[j].second;
        Vec<Scalar> g_t = softmax_t_[j];
        g_t[cu] -= Scalar(0.5);
        g_t[cv] -= Scalar(0.5);
        for (auto& x : g_t) x *= w;
        label_backward(params, encoder_->embedding(e.u), bu, hadamard(g_t, bv),
                       tape, grad_slot(gh, e.u));
        label_backward(params, encoder_->embedding(e.v), bv, hadamard(g_t, bu),
                       tape, grad_slot(gh, e.v));
      }
    }

    encoder_->backward(std::move(gh), tape);
    accumulate_regularizer_grads(params, opts_.reg, gamma, tape,
                                 double(scale));
  }

  const EncoderForward<Scalar>& encoder() const { return *encoder_; }

 private:
  Vec<Scalar>& grad_slot(std::vector<Vec<Scalar>>& gh, NodeId v) const {
    return gh[encoder_->output_index(v)];
  }

  const ModelParams<Scalar>* params_;
  std::vector<EdgePair> pos_, neg_;
  BatchOptions opts_;
  const std::vector<std::size_t>* clusters_ = nullptr;
  std::optional<EncoderForward<Scalar>> encoder_;
  std::vector<PredictorTrace<Scalar>> pos_traces_, neg_traces_;
  std::vector<Scalar> pos_scores_, neg_scores_;
  std::vector<std::pair<Vec<Scalar>, Vec<Scalar>>> logits_;
  std::vector<Vec<Scalar>> softmax_t_;
  Scalar pairwise_data_{0}, pairwise_{0};
  Scalar contrastive_data_{0}, contrastive_{0};
  Scalar total_{0};
};

}  // namespace psg
