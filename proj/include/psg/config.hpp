#pragma once

#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "psg/common.hpp"
#include "psg/losses.hpp"
#include "psg/model.hpp"
#include "psg/training.hpp"

namespace psg {

/// Every pipeline setting, flat key=value. Defaults follow the DDI-scale
/// hyperparameter table; the shipped desk configs override the heavy ones.
struct RunConfig {
  // Paths.
  std::string graph;
  std::string node_features;
  std::string train_edges;   // empty = all graph edges
  std::string valid_edges;
  std::string valid_neg_edges;
  std::string test_edges;
  std::string test_neg_edges;
  std::string feature_store;
  std::string labels;
  std::string checkpoint;
  std::string log;

  std::uint64_t num_nodes = 0;

  // Model.
  std::size_t embed_dim = 512;
  std::size_t hidden = 512;
  std::size_t gnn_layers = 2;
  std::size_t readout_layers = 2;
  std::size_t edge_features = 3;
  std::string aggregator = "mean";
  bool edge_proj_first_layer_only = false;
  bool use_content_features = false;

  // Edge featuring.
  std::size_t relay_area_size = 0;  // 0 = max(1, ceil(N/100))
  std::uint64_t cap = 0;            // 0 = N

  // Clustering.
  std::size_t clusters = 50;
  std::size_t kmeans_max_iters = 300;
  double kmeans_tol = 1e-4;

  // Training.
  double learning_rate = 0.001;
  std::size_t batch_size = 65536;
  std::size_t epochs = 100;
  double lambda1 = 0, lambda2 = 0, lambda3 = 0, lambda4 = 0, lambda5 = 0;
  double gamma = 0.5;
  std::size_t negatives_per_positive = 1;
  double dropout = 0.3;
  std::size_t fanout = 0;

  // Evaluation.
  std::vector<std::size_t> eval_k = {20};
  std::size_t neg_budget = 2000;
  std::string eval_split = "test";

  std::uint64_t seed = 1;
  int workers = 1;

  static const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "graph",          "node_features",
        "train_edges",    "valid_edges",
        "valid_neg_edges", "test_edges",
        "test_neg_edges", "feature_store",
        "labels",         "checkpoint",
        "log",            "num_nodes",
        "embed_dim",      "hidden",
        "gnn_layers",     "readout_layers",
        "edge_features",  "aggregator",
        "edge_proj_first_layer_only", "use_content_features",
        "relay_area_size", "cap",
        "clusters",       "kmeans_max_iters",
        "kmeans_tol",     "learning_rate",
        "batch_size",     "epochs",
        "lambda",         "lambda1",
        "lambda2",        "lambda3",
        "lambda4",        "lambda5",
        "gamma",          "negatives_per_positive",
        "dropout",        "fanout",
        "eval_k",         "neg_budget",
        "eval_split",     "seed",
        "workers"};
    return keys;
  }

  void set(const std::string& key, const std::string& value) {
    auto as_u64 = [&]() -> std::uint64_t {
      try {
        std::size_t pos = 0;
        std::uint64_t v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
      } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected integer, got '" +
                          value + "'");
      }
    };
    auto as_double = [&]() -> double {
      try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
      } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected number, got '" + value +
                          "'");
      }
    };
    auto as_bool = [&]() -> bool {
      if (value == "1" || value == "true" || value == "yes") return true;
      if (value == "0" || value == "false" || value == "no") return false;
      throw ConfigError("key '" + key + "': expected boolean, got '" + value +
                        "'");
    };

    if (key == "graph") graph = value;
    else if (key == "node_features") node_features = value;
    else if (key == "train_edges") train_edges = value;
    else if (key == "valid_edges") valid_edges = value;
    else if (key == "valid_neg_edges") valid_neg_edges = value;
    else if (key == "test_edges") test_edges = value;
    else if (key == "test_neg_edges") test_neg_edges = value;
    else if (key == "feature_store") feature_store = value;
    else if (key == "labels") labels = value;
    else if (key == "checkpoint") checkpoint = value;
    else if (key == "log") log = value;
    else if (key == "num_nodes") num_nodes = as_u64();
    else if (key == "embed_dim") embed_dim = as_u64();
    else if (key == "hidden") hidden = as_u64();
    else if (key == "gnn_layers") gnn_layers = as_u64();
    else if (key == "readout_layers") readout_layers = as_u64();
    else if (key == "edge_features") edge_features = as_u64();
    else if (key == "aggregator") aggregator = value;
    else if (key == "edge_proj_first_layer_only")
      edge_proj_first_layer_only = as_bool();
    else if (key == "use_content_features") use_content_features = as_bool();
    else if (key == "relay_area_size") relay_area_size = as_u64();
    else if (key == "cap") cap = as_u64();
    else if (key == "clusters") clusters = as_u64();
    else if (key == "kmeans_max_iters") kmeans_max_iters = as_u64();
    else if (key == "kmeans_tol") kmeans_tol = as_double();
    else if (key == "learning_rate") learning_rate = as_double();
    else if (key == "batch_size") batch_size = as_u64();
    else if (key == "epochs") epochs = as_u64();
    else if (key == "lambda")
      lambda1 = lambda2 = lambda3 = lambda4 = lambda5 = as_double();
    else if (key == "lambda1") lambda1 = as_double();
    else if (key == "lambda2") lambda2 = as_double();
    else if (key == "lambda3") lambda3 = as_double();
    else if (key == "lambda4") lambda4 = as_double();
    else if (key == "lambda5") lambda5 = as_double();
    else if (key == "gamma") gamma = as_double();
    else if (key == "negatives_per_positive")
      negatives_per_positive = as_u64();
    else if (key == "dropout") dropout = as_double();
    else if (key == "fanout") fanout = as_u64();
    else if (key == "eval_k") eval_k = parse_k_list(value);
    else if (key == "neg_budget") neg_budget = as_u64();
    else if (key == "eval_split") {
      if (value != "valid" && value != "test")
        throw ConfigError("eval_split must be 'valid' or 'test'");
      eval_split = value;
    } else if (key == "seed") seed = as_u64();
    else if (key == "workers") workers = int(as_u64());
    else
      throw ConfigError("unknown config key '" + key + "'");
  }

  static std::vector<std::size_t> parse_k_list(const std::string& s) {
    std::vector<std::size_t> out;
    std::istringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = detail::strip(item);
      if (item.empty()) continue;
      try {
        out.push_back(std::stoull(item));
      } catch (const std::exception&) {
        throw ConfigError("eval_k: expected comma-separated ranks, got '" + s +
                          "'");
      }
      if (out.back() < 1) throw ConfigError("eval_k: ranks must be >= 1");
    }
    if (out.empty()) throw ConfigError("eval_k: empty rank list");
    return out;
  }

  /// Sorted key=value dump of the effective settings; input to the hash.
  std::string canonical() const {
    char buf[48];
    auto num = [&buf](double x) {
      std::snprintf(buf, sizeof(buf), "%.17g", x);
      return std::string(buf);
    };
    std::map<std::string, std::string> kv;
    kv["graph"] = graph;
    kv["node_features"] = node_features;
    kv["train_edges"] = train_edges;
    kv["valid_edges"] = valid_edges;
    kv["valid_neg_edges"] = valid_neg_edges;
    kv["test_edges"] = test_edges;
    kv["test_neg_edges"] = test_neg_edges;
    kv["feature_store"] = feature_store;
    kv["labels"] = labels;
    kv["checkpoint"] = checkpoint;
    kv["log"] = log;
    kv["num_nodes"] = std::to_string(num_nodes);
    kv["embed_dim"] = std::to_string(embed_dim);
    kv["hidden"] = std::to_string(hidden);
    kv["gnn_layers"] = std::to_string(gnn_layers);
    kv["readout_layers"] = std::to_string(readout_layers);
    kv["edge_features"] = std::to_string(edge_features);
    kv["aggregator"] = aggregator;
    kv["edge_proj_first_layer_only"] =
        edge_proj_first_layer_only ? "1" : "0";
    kv["use_content_features"] = use_content_features ? "1" : "0";
    kv["relay_area_size"] = std::to_string(relay_area_size);
    kv["cap"] = std::to_string(cap);
    kv["clusters"] = std::to_string(clusters);
    kv["kmeans_max_iters"] = std::to_string(kmeans_max_iters);
    kv["kmeans_tol"] = num(kmeans_tol);
    kv["learning_rate"] = num(learning_rate);
    kv["batch_size"] = std::to_string(batch_size);
    kv["epochs"] = std::to_string(epochs);
    kv["lambda1"] = num(lambda1);
    kv["lambda2"] = num(lambda2);
    kv["lambda3"] = num(lambda3);
    kv["lambda4"] = num(lambda4);
    kv["lambda5"] = num(lambda5);
    kv["gamma"] = num(gamma);
    kv["negatives_per_positive"] = std::to_string(negatives_per_positive);
    kv["dropout"] = num(dropout);
    kv["fanout"] = std::to_string(fanout);
    std::string ks;
    for (std::size_t i = 0; i < eval_k.size(); ++i) {
      if (i > 0) ks += ',';
      ks += std::to_string(eval_k[i]);
    }
    kv["eval_k"] = ks;
    kv["neg_budget"] = std::to_string(neg_budget);
    kv["eval_split"] = eval_split;
    kv["seed"] = std::to_string(seed);
    // workers is a parallelism knob, not part of the result fingerprint:
    // every parallel loop writes disjoint slots, so outputs are identical
    // for any worker count.
    std::string out;
    for (const auto& [k, v] : kv) {
      out += k;
      out += '=';
      out += v;
      out += '\n';
    }
    return out;
  }

  std::string config_hash() const {
    std::string text = canonical();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : text) {
      h ^= std::uint64_t(static_cast<unsigned char>(c));
      h *= 0x100000001b3ULL;
    }
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(h));
    return buf;
  }

  /// Header line written as a '#' comment at the top of every artifact.
  std::string artifact_header() const {
    return std::string("psg ") + kVersion + " seed=" + std::to_string(seed) +
           " config=" + config_hash();
  }

  RegWeights reg_weights() const {
    RegWeights r;
    r.self_group = lambda1;
    r.neighbor_group = lambda2;
    r.edge_group = lambda3;
    r.readout_group = lambda4;
    r.label_group = lambda5;
    return r;
  }

  TrainConfig train_config() const {
    TrainConfig t;
    t.learning_rate = learning_rate;
    t.batch_size = batch_size;
    t.epochs = epochs;
    t.lambdas = reg_weights();
    t.gamma = gamma;
    t.negatives_per_positive = negatives_per_positive;
    t.dropout = dropout;
    t.fanout = fanout;
    t.seed = seed;
    t.workers = workers;
    return t;
  }
};

/// Parses "key=value" lines ('#' comments, blank lines ignored) into the
/// config, complaining about unknown keys.
inline void load_config_text(std::istream& in, RunConfig& cfg) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::skip_line(line)) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key=value'");
    std::string key = detail::strip(line.substr(0, eq));
    std::string value = detail::strip(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": empty key");
    try {
      cfg.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " +
                        e.what());
    }
  }
}

}  // namespace psg
