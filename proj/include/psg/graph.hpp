#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <istream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "psg/common.hpp"
#include "psg/matrix.hpp"
#include "psg/rng.hpp"

namespace psg {

/// Immutable undirected graph in compressed sorted-adjacency form, with an
/// optional dense node content matrix. Construct through load_graph or
/// build_graph; safe for concurrent reads afterwards.
class Graph {
 public:
  Graph() = default;

  NodeId num_nodes() const { return num_nodes_; }
  std::size_t num_edges() const { return num_edges_; }

  const std::vector<std::size_t>& offsets() const { return offsets_; }
  const std::vector<NodeId>& neighbor_array() const { return neighbors_; }

  std::size_t degree(NodeId v) const {
    check_node(v);
    return offsets_[v + 1] - offsets_[v];
  }

  /// Sorted adjacency list of v; empty for isolated nodes.
  std::vector<NodeId> neighbors(NodeId v) const {
    check_node(v);
    return std::vector<NodeId>(neighbors_.begin() + offsets_[v],
                               neighbors_.begin() + offsets_[v + 1]);
  }

  const NodeId* neighbors_begin(NodeId v) const {
    return neighbors_.data() + offsets_[v];
  }
  const NodeId* neighbors_end(NodeId v) const {
    return neighbors_.data() + offsets_[v + 1];
  }

  bool has_edge(NodeId u, NodeId v) const {
    check_node(u);
    check_node(v);
    if (u == v) return false;
    if (degree(u) > degree(v)) std::swap(u, v);
    return std::binary_search(neighbors_begin(u), neighbors_end(u), v);
  }

  bool has_features() const { return node_features_.rows > 0; }
  const Matrix<double>& node_features() const { return node_features_; }

  /// All sorted unordered edges (u < v), in lexicographic order.
  std::vector<EdgePair> edges() const {
    std::vector<EdgePair> out;
    out.reserve(num_edges_);
    for (NodeId u = 0; u < num_nodes_; ++u)
      for (const NodeId* p = neighbors_begin(u); p != neighbors_end(u); ++p)
        if (u < *p) out.emplace_back(u, *p);
    return out;
  }

  void check_node(NodeId v) const {
    if (v >= num_nodes_)
      throw ValidationError("node id " + std::to_string(v) +
                            " out of range (num_nodes=" +
                            std::to_string(num_nodes_) + ")");
  }

  friend Graph build_graph(NodeId num_nodes, const std::vector<EdgePair>& edges,
                           Matrix<double> node_features);

 private:
  NodeId num_nodes_{0};
  std::size_t num_edges_{0};
  std::vector<std::size_t> offsets_;
  std::vector<NodeId> neighbors_;
  Matrix<double> node_features_;
};

/// Builds the CSR arrays from deduplicated unordered pairs. Rejects
/// self-loops and out-of-range ids; duplicate pairs are merged.
inline Graph build_graph(NodeId num_nodes, const std::vector<EdgePair>& edges,
                         Matrix<double> node_features = {}) {
  if (node_features.rows > 0 && node_features.rows != num_nodes)
    throw ValidationError("feature matrix has " +
                          std::to_string(node_features.rows) +
                          " rows, expected " + std::to_string(num_nodes));
  std::vector<EdgePair> uniq = edges;
  for (const EdgePair& e : uniq) {
    if (e.u == e.v)
      throw ValidationError("self-loop at node " + std::to_string(e.u));
    if (e.v >= num_nodes)
      throw ValidationError("node id " + std::to_string(e.v) +
                            " out of range (num_nodes=" +
                            std::to_string(num_nodes) + ")");
  }
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

  Graph g;
  g.num_nodes_ = num_nodes;
  g.num_edges_ = uniq.size();
  g.offsets_.assign(num_nodes + 1, 0);
  for (const EdgePair& e : uniq) {
    ++g.offsets_[e.u + 1];
    ++g.offsets_[e.v + 1];
  }
  for (NodeId v = 0; v < num_nodes; ++v) g.offsets_[v + 1] += g.offsets_[v];
  g.neighbors_.resize(2 * uniq.size());
  std::vector<std::size_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
  for (const EdgePair& e : uniq) {
    g.neighbors_[cursor[e.u]++] = e.v;
    g.neighbors_[cursor[e.v]++] = e.u;
  }
  // Pairs were emitted in sorted order, so every list is already ascending.
  g.node_features_ = std::move(node_features);
  return g;
}

namespace detail {

inline std::string strip(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline bool skip_line(const std::string& line) {
  std::string t = strip(line);
  return t.empty() || t[0] == '#';
}

inline std::uint64_t parse_node_token(const std::string& tok, int line_no) {
  std::size_t pos = 0;
  std::uint64_t id = 0;
  try {
    id = std::stoull(tok, &pos);
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) +
                     ": expected node id, got '" + tok + "'");
  }
  if (pos != tok.size())
    throw ParseError("line " + std::to_string(line_no) +
                     ": expected node id, got '" + tok + "'");
  return id;
}

}  // namespace detail

/// Parses "u<TAB>v" lines; '#' comments and blank lines are ignored.
/// Pairs are returned in file order, unnormalized duplicates included.
inline std::vector<EdgePair> parse_edge_lines(std::istream& in,
                                              NodeId num_nodes) {
  std::vector<EdgePair> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::skip_line(line)) continue;
    std::istringstream ls(line);
    std::string ta, tb, rest;
    if (!(ls >> ta >> tb))
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected 'u<TAB>v'");
    if (ls >> rest)
      throw ParseError("line " + std::to_string(line_no) +
                       ": trailing tokens after edge");
    std::uint64_t u = detail::parse_node_token(ta, line_no);
    std::uint64_t v = detail::parse_node_token(tb, line_no);
    if (u >= num_nodes || v >= num_nodes)
      throw ValidationError("line " + std::to_string(line_no) + ": node id " +
                            std::to_string(std::max(u, v)) +
                            " out of range (num_nodes=" +
                            std::to_string(num_nodes) + ")");
    if (u == v)
      throw ValidationError("line " + std::to_string(line_no) +
                            ": self-loop at node " + std::to_string(u));
    out.emplace_back(NodeId(u), NodeId(v));
  }
  return out;
}

/// Parses "node_id<TAB>f_1 f_2 ... f_d" lines into an N x d matrix. Every
/// node must appear exactly once and all rows must share d.
inline Matrix<double> parse_feature_lines(std::istream& in, NodeId num_nodes) {
  Matrix<double> feats;
  std::vector<bool> seen(num_nodes, false);
  std::string line;
  int line_no = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::skip_line(line)) continue;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok))
      throw ParseError("line " + std::to_string(line_no) + ": empty row");
    std::uint64_t id = detail::parse_node_token(tok, line_no);
    if (id >= num_nodes)
      throw ValidationError("line " + std::to_string(line_no) + ": node id " +
                            std::to_string(id) + " out of range");
    std::vector<double> row;
    double x;
    while (ls >> x) row.push_back(x);
    if (!ls.eof())
      throw ParseError("line " + std::to_string(line_no) +
                       ": malformed feature value");
    if (row.empty())
      throw ParseError("line " + std::to_string(line_no) +
                       ": node row has no feature values");
    if (dim == 0) {
      dim = row.size();
      feats = Matrix<double>(num_nodes, dim);
    } else if (row.size() != dim) {
      throw ValidationError("line " + std::to_string(line_no) + ": row has " +
                            std::to_string(row.size()) +
                            " values, expected " + std::to_string(dim));
    }
    if (seen[id])
      throw ValidationError("line " + std::to_string(line_no) +
                            ": duplicate feature row for node " +
                            std::to_string(id));
    seen[id] = true;
    for (std::size_t j = 0; j < dim; ++j) feats(id, j) = row[j];
  }
  if (dim == 0) throw ValidationError("feature file has no rows");
  std::size_t missing = 0;
  for (NodeId v = 0; v < num_nodes; ++v)
    if (!seen[v]) ++missing;
  if (missing > 0)
    throw ValidationError("feature file is missing rows for " +
                          std::to_string(missing) + " node(s)");
  return feats;
}

/// Loads and validates a graph from edge-list text plus optional feature
/// text. Reversed and repeated duplicates of an edge are merged.
inline Graph load_graph(std::istream& edge_list_text, NodeId num_nodes,
                        std::istream* feature_text = nullptr) {
  std::vector<EdgePair> pairs = parse_edge_lines(edge_list_text, num_nodes);
  Matrix<double> feats;
  if (feature_text != nullptr)
    feats = parse_feature_lines(*feature_text, num_nodes);
  return build_graph(num_nodes, pairs, std::move(feats));
}

/// All nodes u != v with shortest-path distance(u, v) <= r, as a sorted list.
inline std::vector<NodeId> k_hop_neighborhood(const Graph& g, NodeId v,
                                              unsigned r) {
  g.check_node(v);
  if (r < 1) throw ValidationError("k_hop_neighborhood: radius must be >= 1");
  std::vector<unsigned> depth(g.num_nodes(), UINT32_MAX);
  std::deque<NodeId> queue;
  depth[v] = 0;
  queue.push_back(v);
  std::vector<NodeId> out;
  while (!queue.empty()) {
    NodeId cur = queue.front();
    queue.pop_front();
    if (depth[cur] == r) continue;
    for (const NodeId* p = g.neighbors_begin(cur); p != g.neighbors_end(cur);
         ++p) {
      if (depth[*p] != UINT32_MAX) continue;
      depth[*p] = depth[cur] + 1;
      out.push_back(*p);
      queue.push_back(*p);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Full neighbor list when degree(v) <= fanout, otherwise fanout distinct
/// neighbors drawn uniformly without replacement (draw order).
inline std::vector<NodeId> sample_neighbors(const Graph& g, NodeId v,
                                            std::size_t fanout, Rng& rng) {
  g.check_node(v);
  if (fanout < 1) throw ValidationError("sample_neighbors: fanout must be >= 1");
  std::size_t deg = g.degree(v);
  if (deg <= fanout) return g.neighbors(v);
  std::vector<std::uint64_t> idx = rng.sample_without_replacement(deg, fanout);
  std::vector<NodeId> out(fanout);
  const NodeId* base = g.neighbors_begin(v);
  for (std::size_t i = 0; i < fanout; ++i) out[i] = base[idx[i]];
  return out;
}

/// Positive/negative edge split roles for training and evaluation.
struct EdgeSplit {
  std::vector<EdgePair> train_pos;
  std::vector<EdgePair> valid_pos;
  std::vector<EdgePair> test_pos;
  std::vector<EdgePair> valid_neg;
  std::vector<EdgePair> test_neg;
};

/// Checks split invariants against the training graph: ids in range, no pair
/// in more than one positive role, negatives absent from the full positive
/// edge set (graph edges plus all positive splits).
inline void validate_split(const Graph& g, const EdgeSplit& split) {
  std::unordered_set<EdgePair, EdgePairHash> positives;
  auto add_positives = [&](const std::vector<EdgePair>& pairs,
                           const char* role) {
    for (const EdgePair& e : pairs) {
      g.check_node(e.u);
      g.check_node(e.v);
      if (e.u == e.v)
        throw ValidationError(std::string(role) + ": self-loop at node " +
                              std::to_string(e.u));
      if (!positives.insert(e).second)
        throw ValidationError(std::string(role) + ": pair (" +
                              std::to_string(e.u) + "," + std::to_string(e.v) +
                              ") appears in more than one positive split");
    }
  };
  add_positives(split.train_pos, "train_pos");
  add_positives(split.valid_pos, "valid_pos");
  add_positives(split.test_pos, "test_pos");
  auto check_negatives = [&](const std::vector<EdgePair>& pairs,
                             const char* role) {
    for (const EdgePair& e : pairs) {
      g.check_node(e.u);
      g.check_node(e.v);
      if (e.u == e.v)
        throw ValidationError(std::string(role) + ": self-loop at node " +
                              std::to_string(e.u));
      if (positives.count(e) || g.has_edge(e.u, e.v))
        throw ValidationError(std::string(role) + ": pair (" +
                              std::to_string(e.u) + "," + std::to_string(e.v) +
                              ") is a positive edge");
    }
  };
  check_negatives(split.valid_neg, "valid_neg");
  check_negatives(split.test_neg, "test_neg");
}

}  // namespace psg
