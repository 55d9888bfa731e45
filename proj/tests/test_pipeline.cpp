#include <fstream>
#include <sstream>

#include "doctest.h"
#include "psg/psg.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace psg;
using namespace testsupport;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  REQUIRE(bool(out));
  out << text;
}

void write_pairs(const std::string& path, const std::vector<EdgePair>& pairs) {
  std::ostringstream text;
  for (const EdgePair& e : pairs) text << e.u << "\t" << e.v << "\n";
  write_text(path, text.str());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(bool(in));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Small SBM workspace with graph/split/feature files on disk and a config
/// pointing at them.
struct Workspace {
  TempDir dir;
  RunConfig cfg;
  SplitFixture fixture;

  explicit Workspace(std::uint64_t seed, bool with_features = false) {
    SbmGraph sbm = sbm_edges(40, 0.3, 0.03, seed);
    Matrix<double> feats;
    if (with_features) feats = planted_features(sbm.block, 4, 0.3, seed + 1);
    fixture = split_sbm(sbm, 0.1, 0.1, seed + 2, feats);

    write_pairs(dir.file("graph.tsv"), fixture.split.train_pos);
    write_pairs(dir.file("valid.tsv"), fixture.split.valid_pos);
    write_pairs(dir.file("test.tsv"), fixture.split.test_pos);
    if (with_features) {
      std::ostringstream text;
      char buf[40];
      for (NodeId v = 0; v < 40; ++v) {
        text << v << "\t";
        for (std::size_t j = 0; j < feats.cols; ++j) {
          if (j > 0) text << ' ';
          std::snprintf(buf, sizeof(buf), "%.17g",
                        fixture.train_graph.node_features()(v, j));
          text << buf;
        }
        text << "\n";
      }
      write_text(dir.file("features.tsv"), text.str());
      cfg.node_features = dir.file("features.tsv");
    }

    cfg.graph = dir.file("graph.tsv");
    cfg.num_nodes = 40;
    cfg.valid_edges = dir.file("valid.tsv");
    cfg.test_edges = dir.file("test.tsv");
    cfg.feature_store = dir.file("store.tsv");
    cfg.labels = dir.file("labels.tsv");
    cfg.checkpoint = dir.file("model.ckpt");
    cfg.log = dir.file("train.log");
    cfg.embed_dim = 8;
    cfg.hidden = 8;
    cfg.edge_features = 2;
    cfg.clusters = 2;
    cfg.gamma = 1.0;
    cfg.epochs = 3;
    cfg.batch_size = 64;
    cfg.dropout = 0.0;
    cfg.eval_k = {10};
    cfg.neg_budget = 100;
    cfg.seed = 5;
  }
};

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("featurize writes a hand-checkable triangle store") {
  TempDir dir;
  write_text(dir.file("graph.tsv"), "0\t1\n0\t2\n1\t2\n");
  RunConfig cfg;
  cfg.graph = dir.file("graph.tsv");
  cfg.num_nodes = 3;
  cfg.feature_store = dir.file("store.tsv");
  cfg.edge_features = 1;
  cfg.relay_area_size = 3;  // every node is a relay: deterministic values
  std::ostringstream out;
  cmd_featurize(cfg, out);
  CHECK(out.str().find("k=1") != std::string::npos);

  std::ifstream in(cfg.feature_store);
  EdgeFeatureStore store = read_feature_store(in);
  CHECK(store.values.size() == 3);
  for (const EdgePair& e : {EdgePair{0, 1}, EdgePair{0, 2}, EdgePair{1, 2}})
    CHECK(store.at(e.u, e.v)[0] == doctest::Approx(4.0 / 3.0));
  CHECK(read_file(cfg.feature_store).rfind("# psg ", 0) == 0);
}

TEST_CASE("featurize re-runs byte-identically") {
  Workspace ws(11);
  std::ostringstream out;
  cmd_featurize(ws.cfg, out);
  std::string first = read_file(ws.cfg.feature_store);
  cmd_featurize(ws.cfg, out);
  CHECK(read_file(ws.cfg.feature_store) == first);
}

TEST_CASE("featurize matches an in-process build with the derived seed") {
  Workspace ws(12);
  std::ostringstream out;
  cmd_featurize(ws.cfg, out);
  std::ifstream in(ws.cfg.feature_store);
  EdgeFeatureStore from_file = read_feature_store(in);

  const Graph& g = ws.fixture.train_graph;
  Rng rng(derive_seed(ws.cfg.seed, "featurize"));
  EdgeFeatureStore direct = build_edge_features(
      g, g.edges(), ws.cfg.edge_features, default_relay_area_size(40), 40,
      rng);
  REQUIRE(from_file.values.size() == direct.values.size());
  for (const auto& [pair, vec] : direct.values)
    CHECK(from_file.at(pair.u, pair.v) == vec);
}

TEST_CASE("cluster requires content features") {
  Workspace ws(13);
  std::ostringstream out;
  CHECK_THROWS_WITH_AS(cmd_cluster(ws.cfg, out),
                       doctest::Contains("content features"), ConfigError);
}

TEST_CASE("cluster writes labels and degenerate cases hold") {
  Workspace ws(14, true);
  std::ostringstream out;

  SUBCASE("C=1 labels everything zero") {
    ws.cfg.clusters = 1;
    cmd_cluster(ws.cfg, out);
    std::ifstream in(ws.cfg.labels);
    for (std::size_t lab : read_labels(in, 40)) CHECK(lab == 0);
  }
  SUBCASE("C=N gives every node its own label") {
    ws.cfg.clusters = 40;
    cmd_cluster(ws.cfg, out);
    std::ifstream in(ws.cfg.labels);
    std::vector<std::size_t> labels = read_labels(in, 40);
    std::set<std::size_t> uniq(labels.begin(), labels.end());
    CHECK(uniq.size() == 40);
    CHECK(out.str().find("inertia=0.000000") != std::string::npos);
  }
  SUBCASE("two planted blocks are recovered") {
    ws.cfg.clusters = 2;
    cmd_cluster(ws.cfg, out);
    std::ifstream in(ws.cfg.labels);
    std::vector<std::size_t> labels = read_labels(in, 40);
    for (NodeId v = 1; v < 20; ++v) CHECK(labels[v] == labels[0]);
    for (NodeId v = 21; v < 40; ++v) CHECK(labels[v] == labels[20]);
    CHECK(labels[0] != labels[20]);
  }
}

TEST_CASE("train with zero epochs checkpoints the initialization") {
  Workspace ws(15);
  std::ostringstream out;
  cmd_featurize(ws.cfg, out);
  ws.cfg.epochs = 0;
  cmd_train(ws.cfg, out);

  std::ifstream in(ws.cfg.checkpoint);
  ModelParams<double> saved = read_checkpoint(in);
  ModelConfig mc;
  mc.num_nodes = 40;
  mc.embed_dim = 8;
  mc.hidden = 8;
  mc.gnn_layers = 2;
  mc.readout_layers = 2;
  mc.edge_feature_dim = 2;
  Rng rng(derive_seed(ws.cfg.seed, "init"));
  ModelParams<double> expect =
      init_params(ws.fixture.train_graph, mc, rng);
  CHECK(saved == expect);
}

TEST_CASE("train and eval artifacts are byte-identical across reruns") {
  Workspace ws(16);
  std::ostringstream out;
  cmd_featurize(ws.cfg, out);
  cmd_train(ws.cfg, out);
  std::string ckpt = read_file(ws.cfg.checkpoint);
  std::string log = read_file(ws.cfg.log);
  cmd_train(ws.cfg, out);
  CHECK(read_file(ws.cfg.checkpoint) == ckpt);
  CHECK(read_file(ws.cfg.log) == log);
  CHECK(log.rfind("# psg ", 0) == 0);
}

TEST_CASE("eval on the validation split reproduces the logged best value") {
  Workspace ws(17);
  std::ostringstream out;
  cmd_featurize(ws.cfg, out);
  ws.cfg.epochs = 4;
  cmd_train(ws.cfg, out);

  // best validation hits from the log
  std::istringstream log(read_file(ws.cfg.log));
  std::string line, best_str;
  double best = -1;
  while (std::getline(log, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string epoch, lh, lc, total, hits;
    ls >> epoch >> lh >> lc >> total >> hits;
    if (std::stod(hits) > best) {
      best = std::stod(hits);
      best_str = hits;
    }
  }
  REQUIRE(best >= 0);

  ws.cfg.eval_split = "valid";
  std::ostringstream eval_out;
  EvalReport rep = cmd_eval(ws.cfg, eval_out);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", rep.hits_at_k.at(10));
  CHECK(std::string(buf) == best_str);
}

TEST_CASE("eval reports monotone hits across K") {
  Workspace ws(18);
  std::ostringstream out;
  cmd_featurize(ws.cfg, out);
  cmd_train(ws.cfg, out);
  ws.cfg.eval_k = {5, 20};
  std::ostringstream eval_out;
  EvalReport rep = cmd_eval(ws.cfg, eval_out);
  CHECK(rep.hits_at_k.at(5) <= rep.hits_at_k.at(20));
  CHECK(eval_out.str().find("RESULT hits@5=") != std::string::npos);
}

TEST_CASE("eval matches the library-level evaluation") {
  Workspace ws(19);
  std::ostringstream out;
  cmd_featurize(ws.cfg, out);
  cmd_train(ws.cfg, out);
  std::ostringstream eval_out;
  EvalReport rep = cmd_eval(ws.cfg, eval_out);

  std::ifstream store_in(ws.cfg.feature_store);
  EdgeFeatureStore store = read_feature_store(store_in);
  std::ifstream ck(ws.cfg.checkpoint);
  ModelParams<double> params = read_checkpoint(ck);
  Rng nrng(derive_seed(ws.cfg.seed, "neg:test"));
  std::vector<EdgePair> neg =
      sample_negatives(ws.fixture.train_graph, ws.cfg.neg_budget, nrng);
  EvalReport manual =
      evaluate_pairs(ws.fixture.train_graph, store, params,
                     ws.fixture.split.test_pos, neg, ws.cfg.eval_k);
  CHECK(rep.hits_at_k == manual.hits_at_k);
}

TEST_CASE("missing inputs surface as typed errors") {
  Workspace ws(20);
  std::ostringstream out;
  SUBCASE("absent graph file") {
    ws.cfg.graph = ws.dir.file("nope.tsv");
    CHECK_THROWS_AS(cmd_featurize(ws.cfg, out), IoError);
  }
  SUBCASE("absent feature store for training") {
    CHECK_THROWS_AS(cmd_train(ws.cfg, out), IoError);
  }
  SUBCASE("gamma below one without labels") {
    cmd_featurize(ws.cfg, out);
    ws.cfg.gamma = 0.5;
    ws.cfg.labels = "";
    CHECK_THROWS_AS(cmd_train(ws.cfg, out), ConfigError);
  }
  SUBCASE("training without a validation split") {
    cmd_featurize(ws.cfg, out);
    ws.cfg.valid_edges = "";
    CHECK_THROWS_AS(cmd_train(ws.cfg, out), ConfigError);
  }
}

TEST_CASE("config text parsing, overrides and hashing") {
  RunConfig cfg;
  std::istringstream text(
      "# a comment\n"
      "epochs = 7\n"
      "gamma=0.25\n"
      "eval_k=20,50\n"
      "aggregator = max\n");
  load_config_text(text, cfg);
  CHECK(cfg.epochs == 7);
  CHECK(cfg.gamma == 0.25);
  CHECK(cfg.eval_k == std::vector<std::size_t>{20, 50});
  CHECK(cfg.aggregator == "max");

  std::string h1 = cfg.config_hash();
  cfg.set("epochs", "8");
  CHECK(cfg.config_hash() != h1);
  cfg.set("epochs", "7");
  CHECK(cfg.config_hash() == h1);

  CHECK_THROWS_AS(cfg.set("not_a_key", "1"), ConfigError);
  CHECK_THROWS_AS(cfg.set("epochs", "banana"), ConfigError);
  std::istringstream bad("epochs 7\n");
  RunConfig cfg2;
  CHECK_THROWS_AS(load_config_text(bad, cfg2), ConfigError);

  CHECK(cfg.artifact_header().find("seed=1") != std::string::npos);
  CHECK(cfg.artifact_header().find("config=") != std::string::npos);
}

TEST_CASE("lambda key fans out to all five groups") {
  RunConfig cfg;
  cfg.set("lambda", "0.125");
  RegWeights reg = cfg.reg_weights();
  CHECK(reg.self_group == 0.125);
  CHECK(reg.neighbor_group == 0.125);
  CHECK(reg.edge_group == 0.125);
  CHECK(reg.readout_group == 0.125);
  CHECK(reg.label_group == 0.125);
  cfg.set("lambda5", "0.5");
  CHECK(cfg.reg_weights().label_group == 0.5);
  CHECK(cfg.reg_weights().self_group == 0.125);
}

}  // TEST_SUITE
