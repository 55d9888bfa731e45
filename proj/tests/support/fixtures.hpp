#pragma once

// Shared graph/model fixtures for the test suites.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "psg/psg.hpp"

namespace testsupport {

using psg::EdgePair;
using psg::Graph;
using psg::NodeId;

inline Graph path_graph(NodeId n) {
  std::vector<EdgePair> edges;
  for (NodeId i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  return psg::build_graph(n, edges);
}

inline Graph triangle_graph() {
  return psg::build_graph(3, {{0, 1}, {0, 2}, {1, 2}});
}

inline Graph er_graph(NodeId n, double p, std::uint64_t seed) {
  psg::Rng rng(seed);
  std::vector<EdgePair> edges;
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v)
      if (rng.uniform_real() < p) edges.emplace_back(u, v);
  return psg::build_graph(n, edges);
}

struct SbmGraph {
  std::vector<EdgePair> edges;
  std::vector<std::size_t> block;  // planted community of each node
  NodeId n = 0;
};

/// Two-block stochastic block model; nodes [0, n/2) form block 0.
inline SbmGraph sbm_edges(NodeId n, double p_in, double p_out,
                          std::uint64_t seed) {
  psg::Rng rng(seed);
  SbmGraph out;
  out.n = n;
  out.block.resize(n);
  for (NodeId v = 0; v < n; ++v) out.block[v] = v < n / 2 ? 0 : 1;
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v) {
      double p = out.block[u] == out.block[v] ? p_in : p_out;
      if (rng.uniform_real() < p) out.edges.emplace_back(u, v);
    }
  return out;
}

/// Shuffles edges and carves out validation/test positives; the training
/// graph holds only the remaining edges.
struct SplitFixture {
  Graph train_graph;
  psg::EdgeSplit split;
};

inline SplitFixture split_sbm(const SbmGraph& sbm, double valid_frac,
                              double test_frac, std::uint64_t seed,
                              psg::Matrix<double> features = {}) {
  psg::Rng rng(seed);
  std::vector<EdgePair> edges = sbm.edges;
  rng.shuffle(edges);
  std::size_t n_valid = std::size_t(double(edges.size()) * valid_frac);
  std::size_t n_test = std::size_t(double(edges.size()) * test_frac);
  SplitFixture out;
  out.split.valid_pos.assign(edges.begin(), edges.begin() + n_valid);
  out.split.test_pos.assign(edges.begin() + n_valid,
                            edges.begin() + n_valid + n_test);
  out.split.train_pos.assign(edges.begin() + n_valid + n_test, edges.end());
  out.train_graph =
      psg::build_graph(sbm.n, out.split.train_pos, std::move(features));
  return out;
}

/// Block-dependent content vectors: a per-block center plus uniform noise.
inline psg::Matrix<double> planted_features(const std::vector<std::size_t>& block,
                                            std::size_t dim, double noise,
                                            std::uint64_t seed) {
  psg::Rng rng(seed);
  std::size_t blocks = 0;
  for (std::size_t b : block) blocks = std::max(blocks, b + 1);
  psg::Matrix<double> centers(blocks, dim);
  centers.fill_uniform(rng, -1.0, 1.0);
  psg::Matrix<double> x(block.size(), dim);
  for (std::size_t i = 0; i < block.size(); ++i)
    for (std::size_t j = 0; j < dim; ++j)
      x(i, j) = centers(block[i], j) + rng.uniform_real(-noise, noise);
  return x;
}

inline psg::ModelConfig tiny_model_config(const Graph& g, std::size_t embed,
                                          std::size_t hidden, std::size_t k,
                                          std::size_t clusters = 0) {
  psg::ModelConfig mc;
  mc.num_nodes = g.num_nodes();
  mc.input_dim = 0;
  mc.embed_dim = embed;
  mc.hidden = hidden;
  mc.gnn_layers = 2;
  mc.readout_layers = 2;
  mc.edge_feature_dim = k;
  mc.num_clusters = clusters;
  return mc;
}

inline psg::EdgeFeatureStore full_store(const Graph& g, std::size_t k,
                                        std::uint64_t seed) {
  psg::Rng rng(seed);
  std::size_t area = std::max<std::size_t>(1, g.num_nodes() / 4);
  return psg::build_edge_features(g, g.edges(), k, area,
                                  std::int32_t(g.num_nodes()), rng);
}

/// Unique scratch directory under the system temp root, removed on
/// destruction.
class TempDir {
 public:
  TempDir() {
    namespace fs = std::filesystem;
    std::string tmpl =
        (fs::temp_directory_path() / "psg_test_XXXXXX").string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    if (::mkdtemp(buf.data()) == nullptr)
      throw std::runtime_error("mkdtemp failed");
    path_ = buf.data();
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return path_ + "/" + name; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace testsupport
