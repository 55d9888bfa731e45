#pragma once

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>

#include "psg/common.hpp"
#include "psg/model.hpp"

namespace psg {

namespace detail {

/// Zero-filled parameter container with the shapes the config implies.
inline ModelParams<double> params_skeleton(const ModelConfig& cfg) {
  cfg.validate();
  ModelParams<double> p;
  p.config = cfg;
  if (cfg.input_dim == 0)
    p.node_embed = Matrix<double>(cfg.num_nodes, cfg.embed_dim);
  else
    p.input_proj = Matrix<double>(cfg.embed_dim, cfg.input_dim);
  for (std::size_t l = 0; l < cfg.gnn_layers; ++l) {
    p.self_weights.emplace_back(cfg.layer_dim(l + 1), cfg.layer_dim(l));
    p.neighbor_weights.emplace_back(cfg.layer_dim(l + 1), cfg.layer_dim(l));
  }
  std::size_t n_proj = cfg.edge_proj_first_layer_only ? 1 : cfg.gnn_layers;
  for (std::size_t l = 0; l < n_proj; ++l)
    p.edge_projections.emplace_back(cfg.layer_dim(l), cfg.edge_feature_dim);
  for (std::size_t j = 0; j < cfg.readout_layers; ++j) {
    std::size_t in = j == 0 ? cfg.output_dim() : cfg.hidden;
    std::size_t out = j + 1 == cfg.readout_layers ? 1 : cfg.hidden;
    p.readout.emplace_back(out, in);
  }
  if (cfg.num_clusters > 0)
    p.label_head = Matrix<double>(cfg.num_clusters, cfg.output_dim());
  return p;
}

}  // namespace detail

/// Versioned text container of named matrices with shape headers. Values are
/// hexadecimal floats, so a load/save cycle is bit-exact.
inline void write_checkpoint(std::ostream& out, const ModelParams<double>& p,
                             const std::string& header_comment = "") {
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  const ModelConfig& c = p.config;
  out << "psg-checkpoint 1\n";
  out << "num_nodes " << c.num_nodes << "\n";
  out << "input_dim " << c.input_dim << "\n";
  out << "embed_dim " << c.embed_dim << "\n";
  out << "hidden " << c.hidden << "\n";
  out << "gnn_layers " << c.gnn_layers << "\n";
  out << "readout_layers " << c.readout_layers << "\n";
  out << "edge_feature_dim " << c.edge_feature_dim << "\n";
  out << "num_clusters " << c.num_clusters << "\n";
  out << "aggregator " << aggregator_name(c.aggregator) << "\n";
  out << "edge_proj_first_layer_only "
      << (c.edge_proj_first_layer_only ? 1 : 0) << "\n";
  std::size_t count = 0;
  p.for_each([&](const std::string&, const Matrix<double>&) { ++count; });
  out << "matrices " << count << "\n";
  char buf[48];
  p.for_each([&](const std::string& name, const Matrix<double>& m) {
    out << "matrix " << name << " " << m.rows << " " << m.cols << "\n";
    std::string line;
    for (std::size_t i = 0; i < m.rows; ++i) {
      line.clear();
      for (std::size_t j = 0; j < m.cols; ++j) {
        if (j > 0) line += ' ';
        std::snprintf(buf, sizeof(buf), "%a", m(i, j));
        line += buf;
      }
      line += '\n';
      out << line;
    }
  });
}

inline ModelParams<double> read_checkpoint(std::istream& in) {
  std::string line;
  auto next_line = [&](const char* what) -> std::string {
    while (std::getline(in, line)) {
      if (detail::skip_line(line)) continue;
      return line;
    }
    throw ParseError(std::string("checkpoint: unexpected end of file, ") +
                     "expected " + what);
  };
  auto expect_kv = [&](const std::string& key) -> std::string {
    std::istringstream ls(next_line(key.c_str()));
    std::string k, v;
    if (!(ls >> k >> v) || k != key)
      throw ParseError("checkpoint: expected '" + key + " <value>', got '" +
                       line + "'");
    return v;
  };

  if (expect_kv("psg-checkpoint") != "1")
    throw ParseError("checkpoint: unsupported version");
  ModelConfig cfg;
  cfg.num_nodes = NodeId(std::stoull(expect_kv("num_nodes")));
  cfg.input_dim = std::stoull(expect_kv("input_dim"));
  cfg.embed_dim = std::stoull(expect_kv("embed_dim"));
  cfg.hidden = std::stoull(expect_kv("hidden"));
  cfg.gnn_layers = std::stoull(expect_kv("gnn_layers"));
  cfg.readout_layers = std::stoull(expect_kv("readout_layers"));
  cfg.edge_feature_dim = std::stoull(expect_kv("edge_feature_dim"));
  cfg.num_clusters = std::stoull(expect_kv("num_clusters"));
  cfg.aggregator = parse_aggregator(expect_kv("aggregator"));
  cfg.edge_proj_first_layer_only =
      expect_kv("edge_proj_first_layer_only") == "1";

  ModelParams<double> p = detail::params_skeleton(cfg);
  std::unordered_map<std::string, Matrix<double>*> slots;
  p.for_each([&](const std::string& name, Matrix<double>& m) {
    slots[name] = &m;
  });

  std::size_t declared = std::stoull(expect_kv("matrices"));
  if (declared != slots.size())
    throw ParseError("checkpoint: expected " + std::to_string(slots.size()) +
                     " matrices for this config, file declares " +
                     std::to_string(declared));
  for (std::size_t mi = 0; mi < declared; ++mi) {
    std::istringstream hs(next_line("matrix header"));
    std::string tag, name;
    std::size_t rows = 0, cols = 0;
    if (!(hs >> tag >> name >> rows >> cols) || tag != "matrix")
      throw ParseError("checkpoint: malformed matrix header '" + line + "'");
    auto it = slots.find(name);
    if (it == slots.end())
      throw ParseError("checkpoint: unknown matrix '" + name + "'");
    Matrix<double>& m = *it->second;
    if (m.rows != rows || m.cols != cols)
      throw ValidationError("checkpoint: matrix '" + name + "' has shape " +
                            std::to_string(rows) + "x" + std::to_string(cols) +
                            ", expected " + std::to_string(m.rows) + "x" +
                            std::to_string(m.cols));
    for (std::size_t i = 0; i < rows; ++i) {
      std::string row_line = next_line("matrix row");
      const char* cur = row_line.c_str();
      char* end = nullptr;
      for (std::size_t j = 0; j < cols; ++j) {
        double v = std::strtod(cur, &end);
        if (end == cur)
          throw ParseError("checkpoint: malformed value in matrix '" + name +
                           "' row " + std::to_string(i));
        m(i, j) = v;
        cur = end;
      }
      while (*cur == ' ' || *cur == '\t' || *cur == '\r') ++cur;
      if (*cur != '\0')
        throw ParseError("checkpoint: trailing data in matrix '" + name +
                         "' row " + std::to_string(i));
    }
  }
  return p;
}

}  // namespace psg
