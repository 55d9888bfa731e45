#pragma once

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "psg/checkpoint.hpp"
#include "psg/clustering.hpp"
#include "psg/config.hpp"
#include "psg/evaluation.hpp"
#include "psg/gradients.hpp"
#include "psg/graph.hpp"
#include "psg/model.hpp"
#include "psg/path_features.hpp"
#include "psg/training.hpp"

namespace psg {

namespace detail {

inline std::ifstream open_input(const std::string& path, const char* what) {
  if (path.empty())
    throw ConfigError(std::string("missing required path for ") + what);
  std::ifstream in(path);
  if (!in) throw IoError(std::string("cannot open ") + what + " '" + path + "'");
  return in;
}

inline std::ofstream open_output(const std::string& path, const char* what) {
  if (path.empty())
    throw ConfigError(std::string("missing required path for ") + what);
  std::ofstream out(path);
  if (!out)
    throw IoError(std::string("cannot write ") + what + " '" + path + "'");
  return out;
}

inline Graph load_graph_from_config(const RunConfig& cfg,
                                    bool want_features) {
  if (cfg.num_nodes == 0)
    throw ConfigError("num_nodes must be set (config key 'num_nodes')");
  std::ifstream edges = open_input(cfg.graph, "graph edge list");
  if (want_features) {
    std::ifstream feats = open_input(cfg.node_features, "node feature file");
    return load_graph(edges, NodeId(cfg.num_nodes), &feats);
  }
  return load_graph(edges, NodeId(cfg.num_nodes), nullptr);
}

inline std::vector<EdgePair> load_pairs(const std::string& path,
                                        NodeId num_nodes, const char* what) {
  std::ifstream in = open_input(path, what);
  return parse_edge_lines(in, num_nodes);
}

inline ModelConfig model_config_from(const RunConfig& cfg, const Graph& g) {
  ModelConfig mc;
  mc.num_nodes = g.num_nodes();
  mc.input_dim = cfg.use_content_features ? g.node_features().cols : 0;
  mc.embed_dim = cfg.embed_dim;
  mc.hidden = cfg.hidden;
  mc.gnn_layers = cfg.gnn_layers;
  mc.readout_layers = cfg.readout_layers;
  mc.edge_feature_dim = cfg.edge_features;
  mc.num_clusters = cfg.gamma < 1.0 ? cfg.clusters : 0;
  mc.aggregator = parse_aggregator(cfg.aggregator);
  mc.edge_proj_first_layer_only = cfg.edge_proj_first_layer_only;
  return mc;
}

inline std::string fmt6(double x) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  return buf;
}

}  // namespace detail

/// featurize: compute relay-path SPD features for every graph edge and
/// serialize the store.
inline void cmd_featurize(const RunConfig& cfg, std::ostream& out = std::cout) {
  auto t0 = std::chrono::steady_clock::now();
  Graph g = detail::load_graph_from_config(cfg, false);
  std::size_t area = cfg.relay_area_size > 0 ? cfg.relay_area_size
                                             : default_relay_area_size(g.num_nodes());
  std::int32_t cap =
      cfg.cap > 0 ? std::int32_t(cfg.cap) : std::int32_t(g.num_nodes());
  Rng rng(derive_seed(cfg.seed, "featurize"));
  EdgeFeatureStore store = build_edge_features(
      g, g.edges(), cfg.edge_features, area, cap, rng, cfg.workers);
  std::ofstream fs = detail::open_output(cfg.feature_store, "feature store");
  write_feature_store(fs, store, cfg.artifact_header());
  if (!fs) throw IoError("failed writing feature store");
  double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  out << "featurize: k=" << store.k << " relay_area_size=" << area
      << " cap=" << cap << " pairs=" << store.values.size()
      << " elapsed_s=" << detail::fmt6(elapsed) << "\n";
}

/// cluster: K-means over node content vectors, written as a label file.
inline void cmd_cluster(const RunConfig& cfg, std::ostream& out = std::cout) {
  if (cfg.node_features.empty())
    throw ConfigError(
        "clustering needs node content features; set 'node_features' "
        "(a model with gamma < 1 cannot run without them)");
  Graph g = detail::load_graph_from_config(cfg, true);
  Rng rng(derive_seed(cfg.seed, "cluster"));
  ClusterAssignment a =
      kmeans(g.node_features(), cfg.clusters, cfg.kmeans_max_iters,
             cfg.kmeans_tol, rng, cfg.workers);
  std::vector<std::size_t> labels = assign_labels(a, g);
  std::ofstream lf = detail::open_output(cfg.labels, "label file");
  write_labels(lf, labels, cfg.artifact_header());
  if (!lf) throw IoError("failed writing label file");
  out << "cluster: clusters=" << cfg.clusters
      << " inertia=" << detail::fmt6(a.inertia)
      << " iterations=" << a.iterations << "\n";
}

/// train: epoch loop with per-epoch validation, best-validation checkpoint
/// and a plot-ready text log.
inline void cmd_train(const RunConfig& cfg, std::ostream& out = std::cout) {
  bool label_task = cfg.gamma < 1.0;
  Graph g = detail::load_graph_from_config(
      cfg, cfg.use_content_features && !cfg.node_features.empty());
  if (cfg.use_content_features && !g.has_features())
    throw ConfigError("use_content_features=1 requires node_features");

  EdgeSplit split;
  split.train_pos = cfg.train_edges.empty()
                        ? g.edges()
                        : detail::load_pairs(cfg.train_edges, g.num_nodes(),
                                             "train edges");
  if (!cfg.valid_edges.empty())
    split.valid_pos =
        detail::load_pairs(cfg.valid_edges, g.num_nodes(), "valid edges");
  if (!cfg.valid_neg_edges.empty())
    split.valid_neg = detail::load_pairs(cfg.valid_neg_edges, g.num_nodes(),
                                         "valid negatives");
  if (!cfg.test_edges.empty())
    split.test_pos =
        detail::load_pairs(cfg.test_edges, g.num_nodes(), "test edges");
  if (!cfg.test_neg_edges.empty())
    split.test_neg = detail::load_pairs(cfg.test_neg_edges, g.num_nodes(),
                                        "test negatives");
  validate_split(g, split);
  if (cfg.epochs > 0 && split.valid_pos.empty())
    throw ConfigError("training with epochs > 0 requires valid_edges");

  std::ifstream fs = detail::open_input(cfg.feature_store, "feature store");
  EdgeFeatureStore store = read_feature_store(fs);

  std::optional<std::vector<std::size_t>> labels;
  if (label_task) {
    if (cfg.labels.empty())
      throw ConfigError(
          "gamma < 1 requires content labels; run the cluster command and "
          "set 'labels'");
    std::ifstream lf = detail::open_input(cfg.labels, "label file");
    labels = read_labels(lf, g.num_nodes());
    for (std::size_t c : *labels)
      if (c >= cfg.clusters)
        throw ValidationError("label file contains cluster id " +
                              std::to_string(c) + " >= clusters=" +
                              std::to_string(cfg.clusters));
  }

  ModelConfig mc = detail::model_config_from(cfg, g);
  Rng init_rng(derive_seed(cfg.seed, "init"));
  ModelParams<double> params = init_params(g, mc, init_rng);
  AdamState<double> state = AdamState<double>::make(params);
  TrainConfig tc = cfg.train_config();
  tc.validate();

  // Validation negatives are fixed once so every epoch ranks against the
  // same set; the eval command regenerates the identical list.
  std::vector<EdgePair> val_neg = split.valid_neg;
  if (cfg.epochs > 0 && val_neg.empty()) {
    Rng neg_rng(derive_seed(cfg.seed, "neg:valid"));
    val_neg = sample_negatives(g, cfg.neg_budget, neg_rng);
  }

  std::size_t primary_k = cfg.eval_k.front();
  Rng train_rng(derive_seed(cfg.seed, "train"));
  ModelParams<double> best_params = params;
  double best_hits = -1;
  std::size_t best_epoch = 0;
  std::vector<std::string> log_lines;
  const std::vector<std::size_t>* cluster_ptr =
      labels.has_value() ? &*labels : nullptr;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochReport rep = train_epoch(g, store, params, cluster_ptr, split, tc,
                                  state, train_rng, int(epoch));
    EvalReport val = evaluate_pairs(g, store, params, split.valid_pos, val_neg,
                                    {primary_k}, cfg.workers);
    double hits = val.hits_at_k.at(primary_k);
    if (hits > best_hits) {
      best_hits = hits;
      best_epoch = epoch;
      best_params = params;
    }
    std::string line = std::to_string(epoch) + "\t" +
                       detail::fmt6(rep.mean_pairwise) + "\t" +
                       detail::fmt6(rep.mean_contrastive) + "\t" +
                       detail::fmt6(rep.mean_total) + "\t" +
                       detail::fmt6(hits);
    log_lines.push_back(line);
    out << "epoch " << line << "\n";
  }

  std::ofstream ck = detail::open_output(cfg.checkpoint, "checkpoint");
  write_checkpoint(ck, cfg.epochs == 0 ? params : best_params,
                   cfg.artifact_header());
  if (!ck) throw IoError("failed writing checkpoint");

  std::ofstream lg = detail::open_output(cfg.log, "training log");
  lg << "# " << cfg.artifact_header() << "\n";
  lg << "# epoch\tL_h\tL_c\ttotal\tval_hits@" << primary_k << "\n";
  for (const std::string& line : log_lines) lg << line << "\n";
  if (!lg) throw IoError("failed writing training log");

  if (cfg.epochs == 0)
    out << "train: epochs=0, checkpoint holds the initialization\n";
  else
    out << "train: best_epoch=" << best_epoch
        << " best_val_hits@" << primary_k << "=" << detail::fmt6(best_hits)
        << "\n";
}

/// eval: score a held-out split with a trained checkpoint and report
/// Hits@K for every requested K.
inline EvalReport cmd_eval(const RunConfig& cfg, std::ostream& out = std::cout) {
  Graph g = detail::load_graph_from_config(
      cfg, cfg.use_content_features && !cfg.node_features.empty());
  std::ifstream fs = detail::open_input(cfg.feature_store, "feature store");
  EdgeFeatureStore store = read_feature_store(fs);
  std::ifstream ck = detail::open_input(cfg.checkpoint, "checkpoint");
  ModelParams<double> params = read_checkpoint(ck);
  if (params.config.num_nodes != g.num_nodes())
    throw ValidationError("checkpoint was trained on a different graph size");

  bool valid = cfg.eval_split == "valid";
  std::vector<EdgePair> pos = detail::load_pairs(
      valid ? cfg.valid_edges : cfg.test_edges, g.num_nodes(),
      valid ? "valid edges" : "test edges");
  const std::string& neg_path =
      valid ? cfg.valid_neg_edges : cfg.test_neg_edges;
  std::vector<EdgePair> neg;
  if (!neg_path.empty()) {
    neg = detail::load_pairs(neg_path, g.num_nodes(), "negative edges");
  } else {
    Rng neg_rng(derive_seed(cfg.seed, valid ? "neg:valid" : "neg:test"));
    neg = sample_negatives(g, cfg.neg_budget, neg_rng);
  }
  EvalReport report =
      evaluate_pairs(g, store, params, pos, neg, cfg.eval_k, cfg.workers);
  out << format_report(report);
  return report;
}

}  // namespace psg
