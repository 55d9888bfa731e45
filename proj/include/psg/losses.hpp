#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "psg/common.hpp"
#include "psg/matrix.hpp"
#include "psg/model.hpp"

namespace psg {

/// L2 weights per parameter group. Group 1 covers the self weights together
/// with the embedding table (or input projection), groups 2-5 cover the
/// neighbor weights, edge projections, readout stack and label head.
struct RegWeights {
  double self_group = 0;
  double neighbor_group = 0;
  double edge_group = 0;
  double readout_group = 0;
  double label_group = 0;
};

namespace detail {

template <typename Scalar>
Scalar group_frob_sq(const std::vector<Matrix<Scalar>>& ms) {
  Scalar s = 0;
  for (const auto& m : ms) s += m.frob_sq();
  return s;
}

}  // namespace detail

/// 1/2 * (l1*|W1|^2 + l2*|W2|^2 + l3*|W3|^2 + l4*|W4|^2) for the pairwise
/// objective's regularizer set.
template <typename Scalar>
Scalar link_regularizer(const ModelParams<Scalar>& p, const RegWeights& reg) {
  Scalar s = 0;
  s += Scalar(reg.self_group) *
       (detail::group_frob_sq(p.self_weights) + p.node_embed.frob_sq() +
        p.input_proj.frob_sq());
  s += Scalar(reg.neighbor_group) * detail::group_frob_sq(p.neighbor_weights);
  s += Scalar(reg.edge_group) * detail::group_frob_sq(p.edge_projections);
  s += Scalar(reg.readout_group) * detail::group_frob_sq(p.readout);
  return s / Scalar(2);
}

/// 1/2 * (l1*|W1|^2 + l2*|W2|^2 + l3*|W3|^2 + l5*|W5|^2) for the
/// contrastive objective's regularizer set.
template <typename Scalar>
Scalar label_regularizer(const ModelParams<Scalar>& p, const RegWeights& reg) {
  Scalar s = 0;
  s += Scalar(reg.self_group) *
       (detail::group_frob_sq(p.self_weights) + p.node_embed.frob_sq() +
        p.input_proj.frob_sq());
  s += Scalar(reg.neighbor_group) * detail::group_frob_sq(p.neighbor_weights);
  s += Scalar(reg.edge_group) * detail::group_frob_sq(p.edge_projections);
  s += Scalar(reg.label_group) * p.label_head.frob_sq();
  return s / Scalar(2);
}

/// d(scale * (gamma*reg_h + (1-gamma)*reg_c))/dW = scale*lambda*W per
/// group, accumulated entrywise into the tape.
template <typename Scalar>
void accumulate_regularizer_grads(const ModelParams<Scalar>& p,
                                  const RegWeights& reg, double gamma,
                                  GradientTape<Scalar>& tape,
                                  double scale = 1.0) {
  auto add = [](Matrix<Scalar>& dst, const Matrix<Scalar>& src, Scalar w) {
    if (w == Scalar(0)) return;
    for (std::size_t i = 0; i < dst.data.size(); ++i)
      dst.data[i] += w * src.data[i];
  };
  Scalar g = Scalar(scale) * Scalar(gamma);
  Scalar gc = Scalar(scale) * Scalar(1.0 - gamma);
  Scalar shared = (g + gc) * Scalar(reg.self_group);
  add(tape.node_embed, p.node_embed, shared);
  add(tape.input_proj, p.input_proj, shared);
  for (std::size_t l = 0; l < p.self_weights.size(); ++l)
    add(tape.self_weights[l], p.self_weights[l], shared);
  Scalar w2 = (g + gc) * Scalar(reg.neighbor_group);
  for (std::size_t l = 0; l < p.neighbor_weights.size(); ++l)
    add(tape.neighbor_weights[l], p.neighbor_weights[l], w2);
  Scalar w3 = (g + gc) * Scalar(reg.edge_group);
  for (std::size_t l = 0; l < p.edge_projections.size(); ++l)
    add(tape.edge_projections[l], p.edge_projections[l], w3);
  Scalar w4 = g * Scalar(reg.readout_group);
  for (std::size_t j = 0; j < p.readout.size(); ++j)
    add(tape.readout[j], p.readout[j], w4);
  Scalar w5 = gc * Scalar(reg.label_group);
  add(tape.label_head, p.label_head, w5);
}

/// Mean squared hinge surrogate over matched score pairs plus the link
/// regularizer: mean_j (1 - pos_j + neg_j)^2 + reg.
template <typename Scalar>
Scalar pairwise_loss(const std::vector<Scalar>& pos_scores,
                     const std::vector<Scalar>& neg_scores,
                     const ModelParams<Scalar>& params,
                     const RegWeights& reg) {
  if (pos_scores.size() != neg_scores.size())
    throw ValidationError("pairwise_loss: score list length mismatch");
  Scalar s = 0;
  for (std::size_t j = 0; j < pos_scores.size(); ++j) {
    Scalar e = Scalar(1) - pos_scores[j] + neg_scores[j];
    s += e * e;
  }
  if (!pos_scores.empty()) s /= Scalar(double(pos_scores.size()));
  return s + link_regularizer(params, reg);
}

/// log(sum_i exp(x_i)), max-shifted.
template <typename Scalar>
Scalar log_sum_exp(const Vec<Scalar>& x) {
  Scalar m = x[0];
  for (Scalar v : x) m = v > m ? v : m;
  Scalar s = 0;
  for (Scalar v : x) s += std::exp(v - m);
  return m + std::log(s);
}

template <typename Scalar>
Vec<Scalar> softmax(const Vec<Scalar>& x) {
  Scalar m = x[0];
  for (Scalar v : x) m = v > m ? v : m;
  Vec<Scalar> y(x.size());
  Scalar s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = std::exp(x[i] - m);
    s += y[i];
  }
  for (auto& v : y) v /= s;
  return y;
}

/// Cross entropy of the content label against softmax of the Hadamard
/// combination of both endpoints' behavior logits, plus the contrastive
/// regularizer set.
template <typename Scalar>
Scalar contrastive_loss(std::size_t content_label, const Vec<Scalar>& logits_i,
                        const Vec<Scalar>& logits_j,
                        const ModelParams<Scalar>& params,
                        const RegWeights& reg) {
  if (logits_i.size() != logits_j.size() || logits_i.empty())
    throw ValidationError("contrastive_loss: logit length mismatch");
  if (content_label >= logits_i.size())
    throw ValidationError("contrastive_loss: content label " +
                          std::to_string(content_label) + " out of range [0," +
                          std::to_string(logits_i.size()) + ")");
  Vec<Scalar> t = hadamard(logits_i, logits_j);
  Scalar ce = log_sum_exp(t) - t[content_label];
  return ce + label_regularizer(params, reg);
}

/// gamma * L_h + (1 - gamma) * L_c.
template <typename Scalar>
Scalar total_loss(Scalar pairwise, Scalar contrastive, double gamma) {
  if (gamma < 0.0 || gamma > 1.0)
    throw ConfigError("total_loss: gamma must lie in [0, 1]");
  return Scalar(gamma) * pairwise + Scalar(1.0 - gamma) * contrastive;
}

}  // namespace psg
