#include <sstream>

#include "doctest.h"
#include "psg/psg.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace psg;
using namespace testsupport;

namespace {

ModelParams<double> random_params(const Graph& g, ModelConfig cfg,
                                  std::uint64_t seed) {
  Rng rng(seed);
  return init_params(g, cfg, rng);
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("init shapes follow the configured dimensions") {
  Graph g = triangle_graph();
  ModelConfig cfg = tiny_model_config(g, 512, 512, 3);
  ModelParams<double> p = random_params(g, cfg, 1);
  CHECK(p.self_weights[0].rows == 512);
  CHECK(p.self_weights[0].cols == 512);
  CHECK(p.node_embed.rows == 3);
  CHECK(p.node_embed.cols == 512);
  CHECK(p.edge_projections.size() == 2);
  CHECK(p.edge_projections[0].rows == 512);
  CHECK(p.edge_projections[0].cols == 3);
  CHECK(p.readout.size() == 2);
  CHECK(p.readout[1].rows == 1);
}

TEST_CASE("init is deterministic under the seed") {
  Graph g = er_graph(12, 0.3, 2);
  ModelConfig cfg = tiny_model_config(g, 8, 8, 2, 3);
  ModelParams<double> a = random_params(g, cfg, 42);
  ModelParams<double> b = random_params(g, cfg, 42);
  ModelParams<double> c = random_params(g, cfg, 43);
  CHECK(a == b);
  CHECK_FALSE(a == c);
}

TEST_CASE("init entries respect the scaled bounds") {
  Graph g = er_graph(12, 0.3, 2);
  ModelConfig cfg = tiny_model_config(g, 8, 16, 2, 3);
  ModelParams<double> p = random_params(g, cfg, 7);
  double eb = embed_bound(cfg.embed_dim);
  for (double x : p.node_embed.data) CHECK(std::fabs(x) <= eb);
  p.for_each([&](const std::string& name, const Matrix<double>& m) {
    if (name == "node_embed") return;
    double b = glorot_bound(m.rows, m.cols);
    for (double x : m.data) CHECK(std::fabs(x) <= b);
  });
}

TEST_CASE("init rejects zero dimensions") {
  Graph g = triangle_graph();
  ModelConfig cfg = tiny_model_config(g, 0, 8, 2);
  Rng rng(1);
  CHECK_THROWS_AS(init_params(g, cfg, rng), ConfigError);
}

TEST_CASE("all-zero parameters encode to the zero vector") {
  Graph g = triangle_graph();
  ModelConfig cfg = tiny_model_config(g, 4, 4, 2);
  ModelParams<double> p = random_params(g, cfg, 1).zeros_like();
  p.config = cfg;
  EdgeFeatureStore feats = full_store(g, 2, 1);
  Rng rng(1);
  auto [emb, trace] = encode_node(g, p, feats, 0, 0, rng);
  for (double x : emb) CHECK(x == 0.0);
}

TEST_CASE("isolated node with identity self weights stacks Relu on the row") {
  Graph g = build_graph(4, {{1, 2}});  // node 0 isolated
  ModelConfig cfg = tiny_model_config(g, 5, 5, 2);
  ModelParams<double> p = random_params(g, cfg, 3);
  for (auto& w : p.self_weights) {
    w.fill(0.0);
    for (std::size_t i = 0; i < w.rows; ++i) w(i, i) = 1.0;
  }
  for (auto& w : p.neighbor_weights) w.fill(0.0);
  EdgeFeatureStore feats;
  feats.k = 2;
  feats.cap = 4;
  Rng rng(1);
  auto [emb, trace] = encode_node(g, p, feats, 0, 0, rng);
  for (std::size_t c = 0; c < emb.size(); ++c)
    CHECK(emb[c] == doctest::Approx(std::max(0.0, p.node_embed(0, c))));
}

TEST_CASE("encoder matches the dense straight-line reference") {
  Graph g = er_graph(10, 0.35, 17);
  EdgeFeatureStore feats = full_store(g, 2, 9);
  for (Aggregator agg :
       {Aggregator::Mean, Aggregator::Sum, Aggregator::Max}) {
    ModelConfig cfg = tiny_model_config(g, 5, 4, 2);
    cfg.aggregator = agg;
    ModelParams<double> p = random_params(g, cfg, 31);
    auto reference = dense_encoder_reference(g, p, feats);
    Rng rng(1);
    std::vector<NodeId> seeds;
    for (NodeId v = 0; v < g.num_nodes(); ++v) seeds.push_back(v);
    EncoderForward<double> enc(g, feats, p, seeds, EncoderOptions{}, rng);
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      const Vec<double>& emb = enc.embedding(v);
      for (std::size_t c = 0; c < emb.size(); ++c)
        CHECK(emb[c] == doctest::Approx(reference[v][c]).epsilon(1e-10));
    }
  }
}

TEST_CASE("encoder with an input projection matches the dense reference") {
  SbmGraph sbm = sbm_edges(12, 0.5, 0.2, 5);
  Matrix<double> x = planted_features(sbm.block, 3, 0.3, 8);
  Graph g = build_graph(sbm.n, sbm.edges, std::move(x));
  EdgeFeatureStore feats = full_store(g, 2, 2);
  ModelConfig cfg = tiny_model_config(g, 4, 4, 2);
  cfg.input_dim = 3;
  ModelParams<double> p = random_params(g, cfg, 11);
  auto reference = dense_encoder_reference(g, p, feats);
  Rng rng(1);
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    auto [emb, trace] = encode_node(g, p, feats, v, 0, rng);
    for (std::size_t c = 0; c < emb.size(); ++c)
      CHECK(emb[c] == doctest::Approx(reference[v][c]).epsilon(1e-10));
  }
}

TEST_CASE("single shared edge projection applies at the first layer only") {
  Graph g = er_graph(10, 0.3, 4);
  EdgeFeatureStore feats = full_store(g, 2, 3);
  ModelConfig cfg = tiny_model_config(g, 4, 4, 2);
  cfg.edge_proj_first_layer_only = true;
  ModelParams<double> p = random_params(g, cfg, 5);
  CHECK(p.edge_projections.size() == 1);
  auto reference = dense_encoder_reference(g, p, feats);
  Rng rng(1);
  auto [emb, trace] = encode_node(g, p, feats, 0, 0, rng);
  for (std::size_t c = 0; c < emb.size(); ++c)
    CHECK(emb[c] == doctest::Approx(reference[0][c]).epsilon(1e-10));
}

TEST_CASE("encoding is invariant under graph relabeling (order-free aggregation)") {
  Graph g = er_graph(14, 0.3, 23);
  EdgeFeatureStore feats = full_store(g, 2, 4);
  ModelConfig cfg = tiny_model_config(g, 4, 4, 2);
  ModelParams<double> p = random_params(g, cfg, 77);

  // Relabel nodes by a permutation, permuting embeddings and features too.
  std::vector<NodeId> perm(g.num_nodes());
  for (NodeId v = 0; v < g.num_nodes(); ++v) perm[v] = v;
  Rng shuffle_rng(6);
  shuffle_rng.shuffle(perm);
  std::vector<EdgePair> edges2;
  for (const EdgePair& e : g.edges()) edges2.emplace_back(perm[e.u], perm[e.v]);
  Graph g2 = build_graph(g.num_nodes(), edges2);
  ModelParams<double> p2 = p;
  for (NodeId v = 0; v < g.num_nodes(); ++v)
    for (std::size_t c = 0; c < p.node_embed.cols; ++c)
      p2.node_embed(perm[v], c) = p.node_embed(v, c);
  EdgeFeatureStore feats2;
  feats2.k = feats.k;
  feats2.cap = feats.cap;
  for (const auto& [pair, vec] : feats.values)
    feats2.values[EdgePair(perm[pair.u], perm[pair.v])] = vec;

  Rng r1(1), r2(1);
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    auto [emb, t1] = encode_node(g, p, feats, v, 0, r1);
    auto [emb2, t2] = encode_node(g2, p2, feats2, perm[v], 0, r2);
    for (std::size_t c = 0; c < emb.size(); ++c)
      CHECK(emb[c] == doctest::Approx(emb2[c]).epsilon(1e-12));
  }
}

TEST_CASE("missing edge feature for a used edge raises a store error") {
  Graph g = triangle_graph();
  Rng build_rng(1);
  EdgeFeatureStore feats =
      build_edge_features(g, {{0, 1}}, 2, 3, 3, build_rng);  // edge 0-2 absent
  ModelConfig cfg = tiny_model_config(g, 4, 4, 2);
  ModelParams<double> p = random_params(g, cfg, 1);
  Rng rng(1);
  CHECK_THROWS_AS(encode_node(g, p, feats, 0, 0, rng), ValidationError);
}

TEST_CASE("predict_link absorbs a zero embedding to score zero") {
  Graph g = triangle_graph();
  ModelConfig cfg = tiny_model_config(g, 4, 4, 2);
  ModelParams<double> p = random_params(g, cfg, 5);
  Vec<double> z(4, 0.0), h{0.3, -0.2, 0.7, 1.1};
  auto [score, trace] = predict_link(p, z, h);
  CHECK(score == 0.0);
}

TEST_CASE("predict_link is symmetric in its arguments") {
  Graph g = triangle_graph();
  ModelConfig cfg = tiny_model_config(g, 6, 6, 2);
  ModelParams<double> p = random_params(g, cfg, 6);
  Rng rng(3);
  for (int i = 0; i < 5; ++i) {
    Vec<double> h1(6), h2(6);
    for (auto& x : h1) x = rng.uniform_real(-2, 2);
    for (auto& x : h2) x = rng.uniform_real(-2, 2);
    CHECK(predict_link(p, h1, h2).first == predict_link(p, h2, h1).first);
  }
}

TEST_CASE("predict_link matches hand-rolled matrix arithmetic") {
  Graph g = triangle_graph();
  ModelConfig cfg = tiny_model_config(g, 8, 8, 2);
  ModelParams<double> p = random_params(g, cfg, 9);
  Rng rng(4);
  Vec<double> h1(8), h2(8);
  for (auto& x : h1) x = rng.uniform_real(-1, 1);
  for (auto& x : h2) x = rng.uniform_real(-1, 1);

  std::vector<double> v(8);
  for (int i = 0; i < 8; ++i) v[i] = h1[i] * h2[i];
  std::vector<double> q(8, 0.0);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) q[i] += p.readout[0](i, j) * v[j];
    q[i] = std::max(0.0, q[i]);
  }
  double expect = 0;
  for (int i = 0; i < 8; ++i) expect += p.readout[1](0, i) * q[i];

  CHECK(predict_link(p, h1, h2).first == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("scaling the readout row by two scales every score by two") {
  Graph g = er_graph(10, 0.4, 3);
  EdgeFeatureStore feats = full_store(g, 2, 5);
  ModelConfig cfg = tiny_model_config(g, 4, 4, 2);
  ModelParams<double> p = random_params(g, cfg, 21);
  ModelParams<double> doubled = p;
  for (auto& x : doubled.readout.back().data) x *= 2.0;
  std::vector<EdgePair> pairs = {{0, 1}, {2, 3}, {4, 5}};
  std::vector<double> a = score_pairs(g, feats, p, pairs);
  std::vector<double> b = score_pairs(g, feats, doubled, pairs);
  for (std::size_t i = 0; i < pairs.size(); ++i) CHECK(b[i] == 2.0 * a[i]);
}

TEST_CASE("predict_link rejects mismatched dimensions") {
  Graph g = triangle_graph();
  ModelConfig cfg = tiny_model_config(g, 4, 4, 2);
  ModelParams<double> p = random_params(g, cfg, 2);
  Vec<double> bad(3, 0.1), good(4, 0.1);
  CHECK_THROWS_AS(predict_link(p, bad, good), ValidationError);
}

TEST_CASE("predict_label is nonnegative and matches the dense oracle") {
  Graph g = triangle_graph();
  ModelConfig cfg = tiny_model_config(g, 4, 4, 2, 7);
  ModelParams<double> p = random_params(g, cfg, 13);
  Rng rng(2);
  Vec<double> h(4);
  for (auto& x : h) x = rng.uniform_real(-2, 2);
  Vec<double> b = predict_label(p, h);
  REQUIRE(b.size() == 7);
  for (std::size_t c = 0; c < 7; ++c) {
    double s = 0;
    for (std::size_t j = 0; j < 4; ++j) s += p.label_head(c, j) * h[j];
    CHECK(b[c] == doctest::Approx(std::max(0.0, s)).epsilon(1e-12));
    CHECK(b[c] >= 0.0);
  }
  Vec<double> zero(4, 0.0);
  for (double x : predict_label(p, zero)) CHECK(x == 0.0);
}

TEST_CASE("predict_label without a label head throws") {
  Graph g = triangle_graph();
  ModelConfig cfg = tiny_model_config(g, 4, 4, 2, 0);
  ModelParams<double> p = random_params(g, cfg, 1);
  Vec<double> h(4, 0.5);
  CHECK_THROWS_AS(predict_label(p, h), ValidationError);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  Graph g = er_graph(9, 0.4, 13);
  ModelConfig cfg = tiny_model_config(g, 5, 6, 3, 4);
  cfg.aggregator = Aggregator::Max;
  ModelParams<double> p = random_params(g, cfg, 19);
  std::ostringstream out;
  write_checkpoint(out, p, "roundtrip test");
  std::istringstream in(out.str());
  ModelParams<double> q = read_checkpoint(in);
  CHECK(p == q);
  CHECK(q.config.aggregator == Aggregator::Max);
  CHECK(q.config.num_clusters == 4);
  std::ostringstream again;
  write_checkpoint(again, q, "roundtrip test");
  CHECK(again.str() == out.str());
}

TEST_CASE("checkpoint rejects trailing row data") {
  Graph g = triangle_graph();
  ModelConfig cfg = tiny_model_config(g, 4, 4, 2);
  ModelParams<double> p = random_params(g, cfg, 1);
  std::ostringstream out;
  write_checkpoint(out, p);
  std::string text = out.str();
  auto pos = text.find("matrix node_embed 3 4\n");
  REQUIRE(pos != std::string::npos);
  std::size_t row_end = text.find('\n', pos + 22);
  text.insert(row_end, " 0x1p+0");  // fifth value on a four-wide row
  std::istringstream in(text);
  CHECK_THROWS_AS(read_checkpoint(in), ParseError);
}

TEST_CASE("checkpoint shape mismatch is rejected") {
  Graph g = triangle_graph();
  ModelConfig cfg = tiny_model_config(g, 4, 4, 2);
  ModelParams<double> p = random_params(g, cfg, 1);
  std::ostringstream out;
  write_checkpoint(out, p);
  std::string text = out.str();
  // corrupt the declared hidden size
  auto pos = text.find("hidden 4");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 8, "hidden 5");
  std::istringstream in(text);
  CHECK_THROWS_AS(read_checkpoint(in), ValidationError);
}

}  // TEST_SUITE
