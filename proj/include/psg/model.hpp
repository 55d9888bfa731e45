#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "psg/common.hpp"
#include "psg/graph.hpp"
#include "psg/matrix.hpp"
#include "psg/path_features.hpp"
#include "psg/rng.hpp"

namespace psg {

enum class Aggregator { Mean, Sum, Max };

inline const char* aggregator_name(Aggregator a) {
  switch (a) {
    case Aggregator::Mean: return "mean";
    case Aggregator::Sum: return "sum";
    case Aggregator::Max: return "max";
  }
  return "mean";
}

inline Aggregator parse_aggregator(const std::string& s) {
  if (s == "mean") return Aggregator::Mean;
  if (s == "sum") return Aggregator::Sum;
  if (s == "max") return Aggregator::Max;
  throw ConfigError("unknown aggregator '" + s + "' (mean|sum|max)");
}

struct ModelConfig {
  NodeId num_nodes = 0;
  std::size_t input_dim = 0;  // content feature dim; 0 = learned embedding table
  std::size_t embed_dim = 512;
  std::size_t hidden = 512;
  std::size_t gnn_layers = 2;
  std::size_t readout_layers = 2;
  std::size_t edge_feature_dim = 3;
  std::size_t num_clusters = 0;  // 0 = no label head
  Aggregator aggregator = Aggregator::Mean;
  // One edge projection per encoder layer by default; the alternative keeps
  // a single projection applied at the first layer only.
  bool edge_proj_first_layer_only = false;

  std::size_t layer_dim(std::size_t l) const {
    return l == 0 ? embed_dim : hidden;
  }
  std::size_t output_dim() const { return layer_dim(gnn_layers); }

  void validate() const {
    if (num_nodes == 0) throw ConfigError("model: num_nodes must be positive");
    if (embed_dim == 0) throw ConfigError("model: embed_dim must be positive");
    if (hidden == 0) throw ConfigError("model: hidden must be positive");
    if (gnn_layers == 0) throw ConfigError("model: gnn_layers must be >= 1");
    if (readout_layers == 0)
      throw ConfigError("model: readout_layers must be >= 1");
    if (edge_feature_dim == 0)
      throw ConfigError("model: edge_feature_dim must be >= 1");
  }
};

/// All trainable tensors. A single parameter set serves both endpoints of
/// every candidate pair (the shared-encoder contract); the same shape layout
/// also backs gradient tapes and optimizer moments.
template <typename Scalar = double>
struct ModelParams {
  ModelConfig config;
  Matrix<Scalar> node_embed;   // N x d0, featureless graphs only
  Matrix<Scalar> input_proj;   // d0 x d, feature-bearing graphs only
  std::vector<Matrix<Scalar>> self_weights;      // per layer, d_{l+1} x d_l
  std::vector<Matrix<Scalar>> neighbor_weights;  // per layer, d_{l+1} x d_l
  std::vector<Matrix<Scalar>> edge_projections;  // d_l x k
  std::vector<Matrix<Scalar>> readout;           // link MLP, last row count 1
  Matrix<Scalar> label_head;   // C x d_L

  /// Visits every matrix in a fixed order with a stable name.
  template <typename Fn>
  void for_each(Fn&& fn) {
    if (node_embed.rows > 0) fn("node_embed", node_embed);
    if (input_proj.rows > 0) fn("input_proj", input_proj);
    for (std::size_t l = 0; l < self_weights.size(); ++l)
      fn("self_w" + std::to_string(l), self_weights[l]);
    for (std::size_t l = 0; l < neighbor_weights.size(); ++l)
      fn("neighbor_w" + std::to_string(l), neighbor_weights[l]);
    for (std::size_t l = 0; l < edge_projections.size(); ++l)
      fn("edge_proj" + std::to_string(l), edge_projections[l]);
    for (std::size_t j = 0; j < readout.size(); ++j)
      fn("readout" + std::to_string(j), readout[j]);
    if (label_head.rows > 0) fn("label_head", label_head);
  }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    const_cast<ModelParams*>(this)->for_each(
        [&](const std::string& name, Matrix<Scalar>& m) {
          fn(name, static_cast<const Matrix<Scalar>&>(m));
        });
  }

  ModelParams zeros_like() const {
    ModelParams z;
    z.config = config;
    auto zero = [](const Matrix<Scalar>& m) {
      return Matrix<Scalar>(m.rows, m.cols);
    };
    z.node_embed = zero(node_embed);
    z.input_proj = zero(input_proj);
    for (const auto& m : self_weights) z.self_weights.push_back(zero(m));
    for (const auto& m : neighbor_weights)
      z.neighbor_weights.push_back(zero(m));
    for (const auto& m : edge_projections)
      z.edge_projections.push_back(zero(m));
    for (const auto& m : readout) z.readout.push_back(zero(m));
    z.label_head = zero(label_head);
    return z;
  }

  bool all_finite() const {
    bool ok = true;
    for_each([&](const std::string&, const Matrix<Scalar>& m) {
      ok = ok && m.all_finite();
    });
    return ok;
  }

  bool operator==(const ModelParams& o) const {
    bool eq = true;
    std::size_t n = 0, no = 0;
    for_each([&](const std::string&, const Matrix<Scalar>&) { ++n; });
    o.for_each([&](const std::string&, const Matrix<Scalar>&) { ++no; });
    if (n != no) return false;
    std::vector<const Matrix<Scalar>*> mine;
    for_each([&](const std::string&, const Matrix<Scalar>& m) {
      mine.push_back(&m);
    });
    std::size_t i = 0;
    o.for_each([&](const std::string&, const Matrix<Scalar>& m) {
      eq = eq && (*mine[i] == m);
      ++i;
    });
    return eq;
  }

  /// Which edge projection applies at layer l (0-based), or nullptr when
  /// the first-layer-only mode disables edge features at deeper layers.
  const Matrix<Scalar>* edge_projection_at(std::size_t l) const {
    if (config.edge_proj_first_layer_only)
      return l == 0 ? &edge_projections[0] : nullptr;
    return &edge_projections[l];
  }
};

/// Per-parameter accumulated gradients, shape-matched to ModelParams.
template <typename Scalar = double>
using GradientTape = ModelParams<Scalar>;

inline double glorot_bound(std::size_t rows, std::size_t cols) {
  return std::sqrt(6.0 / double(rows + cols));
}

inline double embed_bound(std::size_t dim) { return std::sqrt(3.0 / double(dim)); }

/// Fan-scaled uniform init for weights, zero-mean uniform rows for the
/// embedding table. Matrices are drawn in for_each order, so the result is
/// bit-identical for a given seed.
inline ModelParams<double> init_params(const Graph& g, const ModelConfig& cfg,
                                       Rng& rng) {
  cfg.validate();
  if (cfg.num_nodes != g.num_nodes())
    throw ConfigError("model: num_nodes does not match graph");
  if (cfg.input_dim > 0) {
    if (!g.has_features())
      throw ConfigError("model: input_dim set but graph has no features");
    if (g.node_features().cols != cfg.input_dim)
      throw ConfigError("model: input_dim " + std::to_string(cfg.input_dim) +
                        " does not match feature matrix width " +
                        std::to_string(g.node_features().cols));
  }
  ModelParams<double> p;
  p.config = cfg;
  if (cfg.input_dim == 0) {
    p.node_embed = Matrix<double>(cfg.num_nodes, cfg.embed_dim);
    double b = embed_bound(cfg.embed_dim);
    p.node_embed.fill_uniform(rng, -b, b);
  } else {
    p.input_proj = Matrix<double>(cfg.embed_dim, cfg.input_dim);
    double b = glorot_bound(p.input_proj.rows, p.input_proj.cols);
    p.input_proj.fill_uniform(rng, -b, b);
  }
  auto draw = [&rng](std::size_t r, std::size_t c) {
    Matrix<double> m(r, c);
    double b = glorot_bound(r, c);
    m.fill_uniform(rng, -b, b);
    return m;
  };
  for (std::size_t l = 0; l < cfg.gnn_layers; ++l)
    p.self_weights.push_back(draw(cfg.layer_dim(l + 1), cfg.layer_dim(l)));
  for (std::size_t l = 0; l < cfg.gnn_layers; ++l)
    p.neighbor_weights.push_back(draw(cfg.layer_dim(l + 1), cfg.layer_dim(l)));
  std::size_t n_proj = cfg.edge_proj_first_layer_only ? 1 : cfg.gnn_layers;
  for (std::size_t l = 0; l < n_proj; ++l)
    p.edge_projections.push_back(draw(cfg.layer_dim(l), cfg.edge_feature_dim));
  for (std::size_t j = 0; j < cfg.readout_layers; ++j) {
    std::size_t in = j == 0 ? cfg.output_dim() : cfg.hidden;
    std::size_t out = j + 1 == cfg.readout_layers ? 1 : cfg.hidden;
    p.readout.push_back(draw(out, in));
  }
  if (cfg.num_clusters > 0)
    p.label_head = draw(cfg.num_clusters, cfg.output_dim());
  return p;
}

template <typename To, typename From>
ModelParams<To> params_cast(const ModelParams<From>& p) {
  ModelParams<To> out;
  out.config = p.config;
  out.node_embed = matrix_cast<To>(p.node_embed);
  out.input_proj = matrix_cast<To>(p.input_proj);
  for (const auto& m : p.self_weights)
    out.self_weights.push_back(matrix_cast<To>(m));
  for (const auto& m : p.neighbor_weights)
    out.neighbor_weights.push_back(matrix_cast<To>(m));
  for (const auto& m : p.edge_projections)
    out.edge_projections.push_back(matrix_cast<To>(m));
  for (const auto& m : p.readout) out.readout.push_back(matrix_cast<To>(m));
  out.label_head = matrix_cast<To>(p.label_head);
  return out;
}

struct EncoderOptions {
  std::size_t fanout = 0;  // 0 = full neighborhood
  double dropout = 0.0;
  bool train = false;
};

/// One encoder pass over a set of seed nodes. Holds every per-layer
/// activation, aggregate, sampled neighbor list and dropout mask needed to
/// reproduce the outputs and drive the exact reverse pass.
///
/// Per layer, a node's new state is Relu(self * h_v + neigh * Agg_u
/// Relu(h_u + edge_proj * f_uv)) with the aggregate over the node's
/// (possibly sampled) neighbors; isolated nodes aggregate to zero.
template <typename Scalar = double>
class EncoderForward {
 public:
  EncoderForward(const Graph& g, const EdgeFeatureStore& feats,
                 const ModelParams<Scalar>& params, std::vector<NodeId> seeds,
                 const EncoderOptions& opts, Rng& rng, int workers = 1)
      : graph_(&g), feats_(&feats), params_(&params), opts_(opts) {
    const ModelConfig& cfg = params.config;
    cfg.validate();
    if (cfg.num_nodes != g.num_nodes())
      throw ValidationError("encoder: params built for a different graph size");
    if (cfg.input_dim > 0 &&
        (!g.has_features() || g.node_features().cols != cfg.input_dim))
      throw ValidationError(
          "encoder: model expects " + std::to_string(cfg.input_dim) +
          "-dimensional node content features the graph does not carry");
    if (feats.k != 0 && feats.k != cfg.edge_feature_dim)
      throw ValidationError(
          "encoder: feature store dimension " + std::to_string(feats.k) +
          " does not match model edge_feature_dim " +
          std::to_string(cfg.edge_feature_dim));
    std::size_t L = cfg.gnn_layers;
    nodes_.resize(L + 1);
    pos_.resize(L + 1);
    nbrs_.resize(L + 1);
    h_.resize(L + 1);
    agg_.resize(L + 1);
    mask_.resize(L + 1);

    for (NodeId v : seeds) push_node(L, v);

    // Receptive field and neighbor draws, output layer downward. All rng
    // consumption happens here, in a fixed sequential order.
    for (std::size_t l = L; l >= 1; --l) {
      for (NodeId v : nodes_[l]) push_node(l - 1, v);
      nbrs_[l].resize(nodes_[l].size());
      for (std::size_t i = 0; i < nodes_[l].size(); ++i) {
        NodeId v = nodes_[l][i];
        if (opts.fanout >= 1 && g.degree(v) > opts.fanout)
          nbrs_[l][i] = sample_neighbors(g, v, opts.fanout, rng);
        else
          nbrs_[l][i] = g.neighbors(v);
        for (NodeId u : nbrs_[l][i]) push_node(l - 1, u);
      }
    }
    bool use_dropout = opts.train && opts.dropout > 0.0;
    if (use_dropout) {
      if (opts.dropout >= 1.0)
        throw ConfigError("encoder: dropout must be < 1");
      for (std::size_t l = 1; l <= L; ++l) {
        mask_[l].resize(nodes_[l].size());
        for (auto& m : mask_[l]) {
          m.resize(cfg.layer_dim(l));
          for (auto& bit : m)
            bit = rng.uniform_real() >= opts.dropout ? 1 : 0;
        }
      }
    }

    // Layer 0: embedding rows or projected content vectors.
    h_[0].resize(nodes_[0].size());
    parallel_for(nodes_[0].size(), workers, [&](std::size_t i) {
      h_[0][i] = input_vector(nodes_[0][i]);
    });

    for (std::size_t l = 1; l <= L; ++l) {
      h_[l].resize(nodes_[l].size());
      agg_[l].resize(nodes_[l].size());
      const Matrix<Scalar>* eproj = params.edge_projection_at(l - 1);
      parallel_for(nodes_[l].size(), workers, [&](std::size_t i) {
        NodeId v = nodes_[l][i];
        const Vec<Scalar>& x = h_[l - 1][pos_[l - 1].at(v)];
        Vec<Scalar> agg = aggregate(l, i, eproj);
        Vec<Scalar> s = matvec(params.self_weights[l - 1], x);
        Vec<Scalar> n = matvec(params.neighbor_weights[l - 1], agg);
        for (std::size_t c = 0; c < s.size(); ++c) {
          s[c] += n[c];
          s[c] = s[c] > 0 ? s[c] : 0;
        }
        if (use_dropout) {
          Scalar keep = Scalar(1.0 - opts.dropout);
          const auto& m = mask_[l][i];
          for (std::size_t c = 0; c < s.size(); ++c)
            s[c] = m[c] ? s[c] / keep : 0;
        }
        agg_[l][i] = std::move(agg);
        h_[l][i] = std::move(s);
      });
    }
  }

  const Graph& graph() const { return *graph_; }
  const ModelParams<Scalar>& params() const { return *params_; }

  /// Index of a seed (or receptive-field) node among the output layer.
  std::size_t output_index(NodeId v) const {
    auto it = pos_.back().find(v);
    if (it == pos_.back().end())
      throw ValidationError("encoder: node " + std::to_string(v) +
                            " was not encoded");
    return it->second;
  }

  const Vec<Scalar>& embedding(NodeId v) const {
    return h_.back()[output_index(v)];
  }

  std::size_t output_count() const { return nodes_.back().size(); }
  const std::vector<NodeId>& output_nodes() const { return nodes_.back(); }

  /// Exact reverse pass. output_grads is indexed like output_nodes() and
  /// holds dLoss/d embedding for each output node (zero-length entries are
  /// treated as zero). Accumulates into the tape.
  void backward(std::vector<Vec<Scalar>> output_grads,
                GradientTape<Scalar>& tape) const {
    const ModelConfig& cfg = params_->config;
    std::size_t L = cfg.gnn_layers;
    if (output_grads.size() != nodes_[L].size())
      throw ValidationError("encoder backward: gradient count mismatch");
    bool use_dropout = opts_.train && opts_.dropout > 0.0;
    Scalar keep = Scalar(1.0 - opts_.dropout);

    std::vector<Vec<Scalar>> upper = std::move(output_grads);
    for (std::size_t l = L; l >= 1; --l) {
      std::vector<Vec<Scalar>> lower(nodes_[l - 1].size());
      const Matrix<Scalar>* eproj = params_->edge_projection_at(l - 1);
      Matrix<Scalar>* eproj_tape =
          eproj == nullptr
              ? nullptr
              : &tape.edge_projections[cfg.edge_proj_first_layer_only ? 0
                                                                      : l - 1];
      for (std::size_t i = 0; i < nodes_[l].size(); ++i) {
        if (upper[i].empty()) continue;
        NodeId v = nodes_[l][i];
        Vec<Scalar> g_s = upper[i];
        if (use_dropout) {
          const auto& m = mask_[l][i];
          for (std::size_t c = 0; c < g_s.size(); ++c)
            g_s[c] = m[c] ? g_s[c] / keep : 0;
        }
        const Vec<Scalar>& post = h_[l][i];
        for (std::size_t c = 0; c < g_s.size(); ++c)
          if (!(post[c] > 0)) g_s[c] = 0;

        const Vec<Scalar>& x = h_[l - 1][pos_[l - 1].at(v)];
        add_outer(tape.self_weights[l - 1], g_s, x);
        add_outer(tape.neighbor_weights[l - 1], g_s, agg_[l][i]);
        accumulate(lower, l - 1, v,
                   matvec_transposed(params_->self_weights[l - 1], g_s));

        const std::vector<NodeId>& nbrs = nbrs_[l][i];
        if (!nbrs.empty()) {
          Vec<Scalar> g_a =
              matvec_transposed(params_->neighbor_weights[l - 1], g_s);
          backward_aggregate(l, i, eproj, eproj_tape, g_a, lower);
        }
      }
      upper = std::move(lower);
    }

    // Layer 0: route into the embedding table or the input projection.
    for (std::size_t i = 0; i < nodes_[0].size(); ++i) {
      if (upper[i].empty()) continue;
      NodeId v = nodes_[0][i];
      if (params_->config.input_dim == 0) {
        Scalar* row = tape.node_embed.row(v);
        for (std::size_t c = 0; c < upper[i].size(); ++c) row[c] += upper[i][c];
      } else {
        Vec<Scalar> x = content_vector(v);
        add_outer(tape.input_proj, upper[i], x);
      }
    }
  }

 private:
  void push_node(std::size_t l, NodeId v) {
    if (pos_[l].count(v)) return;
    pos_[l][v] = nodes_[l].size();
    nodes_[l].push_back(v);
  }

  Vec<Scalar> content_vector(NodeId v) const {
    const Matrix<double>& x = graph_->node_features();
    Vec<Scalar> out(x.cols);
    for (std::size_t j = 0; j < x.cols; ++j) out[j] = Scalar(x(v, j));
    return out;
  }

  Vec<Scalar> input_vector(NodeId v) const {
    if (params_->config.input_dim == 0) {
      const Matrix<Scalar>& e = params_->node_embed;
      return Vec<Scalar>(e.row(v), e.row(v) + e.cols);
    }
    return matvec(params_->input_proj, content_vector(v));
  }

  Vec<Scalar> message(std::size_t l, NodeId v, NodeId u,
                      const Matrix<Scalar>* eproj) const {
    Vec<Scalar> z = h_[l - 1][pos_[l - 1].at(u)];
    if (eproj != nullptr) {
      const std::vector<double>& f = feats_->at(v, u);
      Vec<Scalar> fe(f.size());
      for (std::size_t j = 0; j < f.size(); ++j) fe[j] = Scalar(f[j]);
      Vec<Scalar> pe = matvec(*eproj, fe);
      for (std::size_t c = 0; c < z.size(); ++c) z[c] += pe[c];
    }
    for (auto& c : z) c = c > 0 ? c : 0;
    return z;
  }

  Vec<Scalar> aggregate(std::size_t l, std::size_t i,
                        const Matrix<Scalar>* eproj) const {
    NodeId v = nodes_[l][i];
    const std::vector<NodeId>& nbrs = nbrs_[l][i];
    std::size_t dim = params_->config.layer_dim(l - 1);
    Vec<Scalar> agg(dim, 0);
    if (nbrs.empty()) return agg;
    Aggregator kind = params_->config.aggregator;
    bool first = true;
    for (NodeId u : nbrs) {
      Vec<Scalar> m = message(l, v, u, eproj);
      switch (kind) {
        case Aggregator::Mean:
        case Aggregator::Sum:
          for (std::size_t c = 0; c < dim; ++c) agg[c] += m[c];
          break;
        case Aggregator::Max:
          if (first) {
            agg = m;
          } else {
            for (std::size_t c = 0; c < dim; ++c)
              if (m[c] > agg[c]) agg[c] = m[c];
          }
          break;
      }
      first = false;
    }
    if (kind == Aggregator::Mean)
      for (auto& c : agg) c /= Scalar(double(nbrs.size()));
    return agg;
  }

  void backward_aggregate(std::size_t l, std::size_t i,
                          const Matrix<Scalar>* eproj,
                          Matrix<Scalar>* eproj_tape, const Vec<Scalar>& g_a,
                          std::vector<Vec<Scalar>>& lower) const {
    NodeId v = nodes_[l][i];
    const std::vector<NodeId>& nbrs = nbrs_[l][i];
    std::size_t dim = g_a.size();
    Aggregator kind = params_->config.aggregator;

    // Max routes each coordinate to the first neighbor attaining the max.
    std::vector<std::size_t> argmax;
    if (kind == Aggregator::Max) {
      argmax.assign(dim, 0);
      Vec<Scalar> best(dim, 0);
      for (std::size_t ni = 0; ni < nbrs.size(); ++ni) {
        Vec<Scalar> m = message(l, v, nbrs[ni], eproj);
        for (std::size_t c = 0; c < dim; ++c)
          if (ni == 0 || m[c] > best[c]) {
            best[c] = m[c];
            argmax[c] = ni;
          }
      }
    }

    Scalar mean_scale = Scalar(1.0 / double(nbrs.size()));
    for (std::size_t ni = 0; ni < nbrs.size(); ++ni) {
      NodeId u = nbrs[ni];
      Vec<Scalar> m = message(l, v, u, eproj);
      Vec<Scalar> g_z(dim, 0);
      bool any = false;
      for (std::size_t c = 0; c < dim; ++c) {
        Scalar gm;
        switch (kind) {
          case Aggregator::Mean: gm = g_a[c] * mean_scale; break;
          case Aggregator::Sum: gm = g_a[c]; break;
          default: gm = argmax[c] == ni ? g_a[c] : Scalar(0); break;
        }
        if (m[c] > 0 && gm != Scalar(0)) {
          g_z[c] = gm;
          any = true;
        }
      }
      if (!any) continue;
      accumulate(lower, l - 1, u, g_z);
      if (eproj_tape != nullptr) {
        const std::vector<double>& f = feats_->at(v, u);
        Vec<Scalar> fe(f.size());
        for (std::size_t j = 0; j < f.size(); ++j) fe[j] = Scalar(f[j]);
        add_outer(*eproj_tape, g_z, fe);
      }
    }
  }

  void accumulate(std::vector<Vec<Scalar>>& grads, std::size_t l, NodeId v,
                  const Vec<Scalar>& g) const {
    std::size_t idx = pos_[l].at(v);
    if (grads[idx].empty()) grads[idx].assign(g.size(), 0);
    for (std::size_t c = 0; c < g.size(); ++c) grads[idx][c] += g[c];
  }

  const Graph* graph_;
  const EdgeFeatureStore* feats_;
  const ModelParams<Scalar>* params_;
  EncoderOptions opts_;
  std::vector<std::vector<NodeId>> nodes_;
  std::vector<std::unordered_map<NodeId, std::size_t>> pos_;
  std::vector<std::vector<std::vector<NodeId>>> nbrs_;
  std::vector<std::vector<Vec<Scalar>>> h_;
  std::vector<std::vector<Vec<Scalar>>> agg_;
  std::vector<std::vector<std::vector<std::uint8_t>>> mask_;
};

/// Encoder pass for a single node; returns the final embedding plus the
/// full trace. fanout 0 means the full neighborhood.
template <typename Scalar = double>
std::pair<Vec<Scalar>, EncoderForward<Scalar>> encode_node(
    const Graph& g, const ModelParams<Scalar>& params,
    const EdgeFeatureStore& feats, NodeId v, std::size_t fanout, Rng& rng) {
  g.check_node(v);
  EncoderOptions opts;
  opts.fanout = fanout;
  EncoderForward<Scalar> run(g, feats, params, {v}, opts, rng);
  return {run.embedding(v), std::move(run)};
}

/// Link predictor activations for one candidate pair.
template <typename Scalar = double>
struct PredictorTrace {
  Vec<Scalar> h1, h2;
  std::vector<Vec<Scalar>> acts;  // acts[0] = h1 o h2, then hidden outputs
  std::vector<std::vector<std::uint8_t>> masks;
  Scalar score{0};
};

/// Readout stack on the Hadamard-fused pair embedding: Relu on hidden
/// layers, linear scalar on the final row so scores carry sign for the
/// margin loss.
template <typename Scalar = double>
PredictorTrace<Scalar> link_forward(const ModelParams<Scalar>& params,
                                    const Vec<Scalar>& h1,
                                    const Vec<Scalar>& h2,
                                    double dropout = 0.0, bool train = false,
                                    Rng* rng = nullptr) {
  if (h1.size() != h2.size() || h1.size() != params.readout[0].cols)
    throw ValidationError("predict_link: embedding dimension mismatch");
  PredictorTrace<Scalar> t;
  t.h1 = h1;
  t.h2 = h2;
  t.acts.push_back(hadamard(h1, h2));
  bool use_dropout = train && dropout > 0.0 && rng != nullptr;
  Scalar keep = Scalar(1.0 - dropout);
  std::size_t R = params.readout.size();
  for (std::size_t j = 0; j + 1 < R; ++j) {
    Vec<Scalar> q = relu(matvec(params.readout[j], t.acts.back()));
    if (use_dropout) {
      std::vector<std::uint8_t> m(q.size());
      for (std::size_t c = 0; c < q.size(); ++c) {
        m[c] = rng->uniform_real() >= dropout ? 1 : 0;
        q[c] = m[c] ? q[c] / keep : 0;
      }
      t.masks.push_back(std::move(m));
    }
    t.acts.push_back(std::move(q));
  }
  const Matrix<Scalar>& last = params.readout[R - 1];
  const Vec<Scalar>& in = t.acts.back();
  Scalar s = 0;
  for (std::size_t c = 0; c < last.cols; ++c) s += last(0, c) * in[c];
  t.score = s;
  return t;
}

/// Score a pair in eval mode (dropout disabled).
template <typename Scalar = double>
std::pair<Scalar, PredictorTrace<Scalar>> predict_link(
    const ModelParams<Scalar>& params, const Vec<Scalar>& h1,
    const Vec<Scalar>& h2) {
  PredictorTrace<Scalar> t = link_forward(params, h1, h2);
  return {t.score, std::move(t)};
}

/// Reverse pass through the readout stack; accumulates parameter gradients
/// into the tape and endpoint-embedding gradients into g_h1/g_h2.
template <typename Scalar = double>
void link_backward(const ModelParams<Scalar>& params,
                   const PredictorTrace<Scalar>& t, Scalar g_score,
                   double dropout, bool train, GradientTape<Scalar>& tape,
                   Vec<Scalar>& g_h1, Vec<Scalar>& g_h2) {
  std::size_t R = params.readout.size();
  bool use_dropout = train && dropout > 0.0 && !t.masks.empty();
  Scalar keep = Scalar(1.0 - dropout);

  add_outer(tape.readout[R - 1], Vec<Scalar>{g_score}, t.acts.back());
  Vec<Scalar> g_p = matvec_transposed(params.readout[R - 1], {g_score});
  for (std::size_t j = R - 1; j >= 1; --j) {
    const Vec<Scalar>& post = t.acts[j];
    Vec<Scalar> g_t = g_p;
    if (use_dropout) {
      const auto& m = t.masks[j - 1];
      for (std::size_t c = 0; c < g_t.size(); ++c)
        g_t[c] = m[c] ? g_t[c] / keep : 0;
    }
    for (std::size_t c = 0; c < g_t.size(); ++c)
      if (!(post[c] > 0)) g_t[c] = 0;
    add_outer(tape.readout[j - 1], g_t, t.acts[j - 1]);
    g_p = matvec_transposed(params.readout[j - 1], g_t);
  }
  if (g_h1.empty()) g_h1.assign(t.h1.size(), 0);
  if (g_h2.empty()) g_h2.assign(t.h2.size(), 0);
  for (std::size_t c = 0; c < g_p.size(); ++c) {
    g_h1[c] += g_p[c] * t.h2[c];
    g_h2[c] += g_p[c] * t.h1[c];
  }
}

/// Label logits b = Relu(label_head * h); nonnegative, length C.
template <typename Scalar = double>
Vec<Scalar> predict_label(const ModelParams<Scalar>& params,
                          const Vec<Scalar>& h) {
  if (params.label_head.rows == 0)
    throw ValidationError("predict_label: model has no label head");
  if (h.size() != params.label_head.cols)
    throw ValidationError("predict_label: embedding dimension mismatch");
  return relu(matvec(params.label_head, h));
}

template <typename Scalar = double>
void label_backward(const ModelParams<Scalar>& params, const Vec<Scalar>& h,
                    const Vec<Scalar>& logits, const Vec<Scalar>& g_logits,
                    GradientTape<Scalar>& tape, Vec<Scalar>& g_h) {
  Vec<Scalar> g_u = relu_backward(g_logits, logits);
  add_outer(tape.label_head, g_u, h);
  if (g_h.empty()) g_h.assign(h.size(), 0);
  Vec<Scalar> back = matvec_transposed(params.label_head, g_u);
  for (std::size_t c = 0; c < back.size(); ++c) g_h[c] += back[c];
}

}  // namespace psg
