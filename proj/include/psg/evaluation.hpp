#pragma once

#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "psg/common.hpp"
#include "psg/graph.hpp"
#include "psg/model.hpp"
#include "psg/path_features.hpp"
#include "psg/rng.hpp"
#include "psg/training.hpp"

namespace psg {

struct ScoreSummary {
  double min = 0, mean = 0, max = 0;
};

struct EvalReport {
  std::map<std::size_t, double> hits_at_k;  // K -> fraction in [0, 1]
  std::size_t num_pos = 0;
  std::size_t num_neg = 0;
  ScoreSummary pos_summary;
  ScoreSummary neg_summary;
};

/// Fraction of positive scores strictly greater than the K-th largest
/// negative score (OGB convention: ties with the threshold are misses).
/// K larger than the negative count makes every positive a hit.
inline double hits_at_k(const std::vector<double>& pos_scores,
                        const std::vector<double>& neg_scores, std::size_t k) {
  if (k < 1) throw ValidationError("hits_at_k: K must be >= 1");
  if (pos_scores.empty() || neg_scores.empty())
    throw ValidationError("hits_at_k: empty score list");
  if (k > neg_scores.size()) return 1.0;
  std::vector<double> neg = neg_scores;
  std::nth_element(neg.begin(), neg.begin() + (k - 1), neg.end(),
                   std::greater<double>());
  double threshold = neg[k - 1];
  std::size_t hits = 0;
  for (double s : pos_scores)
    if (s > threshold) ++hits;
  return double(hits) / double(pos_scores.size());
}

/// Deterministic eval-mode scores (full neighborhoods, dropout off),
/// order-preserving with the input pair order.
inline std::vector<double> score_pairs(const Graph& g,
                                       const EdgeFeatureStore& feats,
                                       const ModelParams<double>& params,
                                       const std::vector<EdgePair>& pairs,
                                       int workers = 1) {
  std::vector<NodeId> seeds;
  seeds.reserve(pairs.size() * 2);
  for (const EdgePair& e : pairs) {
    g.check_node(e.u);
    g.check_node(e.v);
    seeds.push_back(e.u);
    seeds.push_back(e.v);
  }
  Rng unused(0);  // eval mode draws nothing
  EncoderForward<double> enc(g, feats, params, std::move(seeds),
                             EncoderOptions{}, unused, workers);
  std::vector<double> scores(pairs.size());
  parallel_for(pairs.size(), workers, [&](std::size_t i) {
    scores[i] = link_forward(params, enc.embedding(pairs[i].u),
                             enc.embedding(pairs[i].v))
                    .score;
  });
  return scores;
}

namespace detail {

inline ScoreSummary summarize(const std::vector<double>& xs) {
  ScoreSummary s;
  if (xs.empty()) return s;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -std::numeric_limits<double>::infinity();
  double total = 0;
  for (double x : xs) {
    s.min = std::min(s.min, x);
    s.max = std::max(s.max, x);
    total += x;
  }
  s.mean = total / double(xs.size());
  return s;
}

}  // namespace detail

inline EvalReport evaluate_pairs(const Graph& g, const EdgeFeatureStore& feats,
                                 const ModelParams<double>& params,
                                 const std::vector<EdgePair>& pos,
                                 const std::vector<EdgePair>& neg,
                                 const std::vector<std::size_t>& k_values,
                                 int workers = 1) {
  if (pos.empty()) throw ValidationError("evaluate: no positive pairs");
  if (neg.empty()) throw ValidationError("evaluate: no negative pairs");
  std::vector<double> pos_scores = score_pairs(g, feats, params, pos, workers);
  std::vector<double> neg_scores = score_pairs(g, feats, params, neg, workers);
  EvalReport report;
  report.num_pos = pos.size();
  report.num_neg = neg.size();
  report.pos_summary = detail::summarize(pos_scores);
  report.neg_summary = detail::summarize(neg_scores);
  for (std::size_t k : k_values)
    report.hits_at_k[k] = hits_at_k(pos_scores, neg_scores, k);
  return report;
}

enum class SplitRole { Valid, Test };

/// Scores one split role. A provided negative list takes precedence; when
/// absent, neg_budget fresh negatives are sampled from the non-edge set.
inline EvalReport evaluate_split(const Graph& g, const EdgeFeatureStore& feats,
                                 const ModelParams<double>& params,
                                 const EdgeSplit& split, SplitRole role,
                                 const std::vector<std::size_t>& k_values,
                                 std::size_t neg_budget, Rng& rng,
                                 int workers = 1) {
  const std::vector<EdgePair>& pos =
      role == SplitRole::Valid ? split.valid_pos : split.test_pos;
  const std::vector<EdgePair>& provided =
      role == SplitRole::Valid ? split.valid_neg : split.test_neg;
  if (pos.empty()) throw ValidationError("evaluate_split: empty positive split");
  std::vector<EdgePair> neg = provided;
  if (neg.empty()) {
    if (neg_budget < 1)
      throw ValidationError("evaluate_split: neg_budget must be >= 1");
    neg = sample_negatives(g, neg_budget, rng);
  }
  return evaluate_pairs(g, feats, params, pos, neg, k_values, workers);
}

/// key=value lines plus one machine-readable summary line.
inline std::string format_report(const EvalReport& r) {
  char buf[64];
  std::string out;
  auto kv = [&](const std::string& key, const std::string& val) {
    out += key;
    out += '=';
    out += val;
    out += '\n';
  };
  auto fmt = [&](double x) {
    std::snprintf(buf, sizeof(buf), "%.6f", x);
    return std::string(buf);
  };
  kv("num_pos", std::to_string(r.num_pos));
  kv("num_neg", std::to_string(r.num_neg));
  kv("pos_score_min", fmt(r.pos_summary.min));
  kv("pos_score_mean", fmt(r.pos_summary.mean));
  kv("pos_score_max", fmt(r.pos_summary.max));
  kv("neg_score_min", fmt(r.neg_summary.min));
  kv("neg_score_mean", fmt(r.neg_summary.mean));
  kv("neg_score_max", fmt(r.neg_summary.max));
  for (const auto& [k, v] : r.hits_at_k)
    kv("hits@" + std::to_string(k), fmt(v));
  out += "RESULT";
  for (const auto& [k, v] : r.hits_at_k) {
    out += " hits@" + std::to_string(k) + "=" + fmt(v);
  }
  out += " num_pos=" + std::to_string(r.num_pos);
  out += " num_neg=" + std::to_string(r.num_neg);
  out += '\n';
  return out;
}

}  // namespace psg
