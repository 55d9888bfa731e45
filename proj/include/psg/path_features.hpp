#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "psg/common.hpp"
#include "psg/graph.hpp"
#include "psg/rng.hpp"

namespace psg {

/// Sentinel in bfs_spd output for nodes with no path from the source.
/// Callers substitute their own cap when a finite value is needed.
inline constexpr std::int32_t kUnreachable = -1;

/// Unweighted single-source shortest path distances in hops.
inline std::vector<std::int32_t> bfs_spd(const Graph& g, NodeId source) {
  g.check_node(source);
  std::vector<std::int32_t> dist(g.num_nodes(), kUnreachable);
  std::deque<NodeId> queue;
  dist[source] = 0;
  queue.push_back(source);
  while (!queue.empty()) {
    NodeId cur = queue.front();
    queue.pop_front();
    std::int32_t d = dist[cur] + 1;
    for (const NodeId* p = g.neighbors_begin(cur); p != g.neighbors_end(cur);
         ++p) {
      if (dist[*p] != kUnreachable) continue;
      dist[*p] = d;
      queue.push_back(*p);
    }
  }
  return dist;
}

/// Per-unordered-edge relay-path SPD feature vectors. values[(u,v)] has one
/// component per featuring round; every component lies in [0, 2*cap].
struct EdgeFeatureStore {
  std::size_t k{0};
  std::int32_t cap{0};
  std::unordered_map<EdgePair, std::vector<double>, EdgePairHash> values;

  bool contains(NodeId u, NodeId v) const {
    return values.count(EdgePair(u, v)) > 0;
  }

  const std::vector<double>& at(NodeId u, NodeId v) const {
    auto it = values.find(EdgePair(u, v));
    if (it == values.end())
      throw ValidationError("feature store has no entry for edge (" +
                            std::to_string(u) + "," + std::to_string(v) + ")");
    return it->second;
  }
};

namespace detail {

inline double capped(std::int32_t d, std::int32_t cap) {
  return d == kUnreachable ? double(cap) : double(d);
}

inline void format_double(std::string& out, double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  out += buf;
}

}  // namespace detail

/// Mean over the relay area of SPD(u,r) + SPD(r,v), with cap substituted for
/// unreachable legs. Two BFS runs regardless of relay count.
inline double relay_path_feature(const Graph& g, NodeId u, NodeId v,
                                 const std::vector<NodeId>& relay_area,
                                 std::int32_t cap) {
  if (relay_area.empty())
    throw ValidationError("relay_path_feature: relay area must be non-empty");
  if (cap <= 0) throw ValidationError("relay_path_feature: cap must be > 0");
  g.check_node(u);
  g.check_node(v);
  std::vector<std::int32_t> from_u = bfs_spd(g, u);
  std::vector<std::int32_t> from_v = bfs_spd(g, v);
  double sum = 0;
  for (NodeId r : relay_area) {
    g.check_node(r);
    sum += detail::capped(from_u[r], cap) + detail::capped(from_v[r], cap);
  }
  return sum / double(relay_area.size());
}

/// Builds feature vectors for the requested pairs. Each round draws one
/// relay area shared by all pairs and runs one BFS per relay node; component
/// j of every vector comes from round j. Deterministic under the rng seed.
/// relay_log, when given, records the drawn relay area of each round.
inline EdgeFeatureStore build_edge_features(
    const Graph& g, const std::vector<EdgePair>& pairs, std::size_t k,
    std::size_t relay_area_size, std::int32_t cap, Rng& rng, int workers = 1,
    std::vector<std::vector<NodeId>>* relay_log = nullptr) {
  if (k < 1) throw ConfigError("build_edge_features: k must be >= 1");
  if (relay_area_size < 1 || relay_area_size > g.num_nodes())
    throw ConfigError("build_edge_features: relay_area_size must be in [1, N]");
  if (cap <= 0) throw ConfigError("build_edge_features: cap must be > 0");
  for (const EdgePair& e : pairs) {
    g.check_node(e.u);
    g.check_node(e.v);
    if (e.u == e.v)
      throw ValidationError("build_edge_features: self pair at node " +
                            std::to_string(e.u));
  }

  EdgeFeatureStore store;
  store.k = k;
  store.cap = cap;
  store.values.reserve(pairs.size());
  for (const EdgePair& e : pairs) store.values[e].assign(k, 0.0);

  for (std::size_t round = 0; round < k; ++round) {
    std::vector<std::uint64_t> drawn =
        rng.sample_without_replacement(g.num_nodes(), relay_area_size);
    std::vector<NodeId> relays(drawn.begin(), drawn.end());
    if (relay_log != nullptr) relay_log->push_back(relays);

    // One BFS per relay; runs are independent and write disjoint slots.
    std::vector<std::vector<std::int32_t>> dists(relays.size());
    parallel_for(relays.size(), workers, [&](std::size_t i) {
      dists[i] = bfs_spd(g, relays[i]);
    });

    for (auto& [pair, vec] : store.values) {
      double sum = 0;
      for (std::size_t i = 0; i < relays.size(); ++i)
        sum += detail::capped(dists[i][pair.u], cap) +
               detail::capped(dists[i][pair.v], cap);
      vec[round] = sum / double(relays.size());
    }
  }
  return store;
}

/// Text serialization: optional '#' header comments, then "k<TAB>cap",
/// then one "u<TAB>v<TAB>f_1 ... f_k" line per pair with u < v, sorted.
inline void write_feature_store(std::ostream& out, const EdgeFeatureStore& s,
                                const std::string& header_comment = "") {
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  out << s.k << "\t" << s.cap << "\n";
  std::vector<EdgePair> keys;
  keys.reserve(s.values.size());
  for (const auto& kv : s.values) keys.push_back(kv.first);
  std::sort(keys.begin(), keys.end());
  std::string line;
  for (const EdgePair& e : keys) {
    line.clear();
    line += std::to_string(e.u);
    line += '\t';
    line += std::to_string(e.v);
    line += '\t';
    const std::vector<double>& vec = s.values.at(e);
    for (std::size_t j = 0; j < vec.size(); ++j) {
      if (j > 0) line += ' ';
      detail::format_double(line, vec[j]);
    }
    line += '\n';
    out << line;
  }
}

inline EdgeFeatureStore read_feature_store(std::istream& in) {
  EdgeFeatureStore s;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::skip_line(line)) continue;
    std::istringstream ls(line);
    if (!have_header) {
      long long k = 0, cap = 0;
      if (!(ls >> k >> cap) || k < 1 || cap < 1)
        throw ParseError("line " + std::to_string(line_no) +
                         ": expected 'k<TAB>cap' header");
      s.k = std::size_t(k);
      s.cap = std::int32_t(cap);
      have_header = true;
      continue;
    }
    std::uint64_t u = 0, v = 0;
    if (!(ls >> u >> v))
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected 'u<TAB>v<TAB>features'");
    std::vector<double> vec;
    double x;
    while (ls >> x) vec.push_back(x);
    if (vec.size() != s.k)
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(s.k) + " feature values, got " +
                       std::to_string(vec.size()));
    for (double f : vec)
      if (!(f >= 0.0 && f <= 2.0 * double(s.cap)))
        throw ValidationError("line " + std::to_string(line_no) +
                              ": feature component outside [0, 2*cap]");
    EdgePair pair{NodeId(u), NodeId(v)};
    if (s.values.count(pair))
      throw ValidationError("line " + std::to_string(line_no) +
                            ": duplicate entry for pair (" +
                            std::to_string(pair.u) + "," +
                            std::to_string(pair.v) + ")");
    s.values[pair] = std::move(vec);
  }
  if (!have_header) throw ParseError("feature store file has no header line");
  return s;
}

/// Default relay area size used by the CLI when none is configured.
inline std::size_t default_relay_area_size(NodeId num_nodes) {
  return std::max<std::size_t>(1, (std::size_t(num_nodes) + 99) / 100);
}

}  // namespace psg
