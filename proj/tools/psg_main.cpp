// Command-line front end for the PSG link-prediction pipeline:
// featurize -> cluster -> train -> eval, driven by key=value config files
// with per-key flag overrides.

#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "psg/psg.hpp"

namespace {

struct CommandLine {
  std::string config_path;
  std::map<std::string, std::string> overrides;
};

void add_common_options(CLI::App* cmd, CommandLine& cl) {
  cmd->add_option("--config", cl.config_path, "key=value config file");
  for (const std::string& key : psg::RunConfig::known_keys()) {
    cmd->add_option_function<std::string>(
        "--" + key,
        [&cl, key](const std::string& v) { cl.overrides[key] = v; },
        "override config key '" + key + "'");
  }
}

psg::RunConfig build_config(const CommandLine& cl) {
  psg::RunConfig cfg;
  if (!cl.config_path.empty()) {
    std::ifstream in(cl.config_path);
    if (!in)
      throw psg::IoError("cannot open config file '" + cl.config_path + "'");
    psg::load_config_text(in, cfg);
  }
  for (const auto& [key, value] : cl.overrides) cfg.set(key, value);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PSG link prediction pipeline"};
  app.set_version_flag("--version", std::string("psg ") + psg::kVersion);
  app.require_subcommand(1);

  CommandLine cl_featurize, cl_cluster, cl_train, cl_eval;
  CLI::App* featurize =
      app.add_subcommand("featurize", "compute relay-path SPD edge features");
  add_common_options(featurize, cl_featurize);
  CLI::App* cluster =
      app.add_subcommand("cluster", "K-means content labels for nodes");
  add_common_options(cluster, cl_cluster);
  CLI::App* train = app.add_subcommand("train", "train the link predictor");
  add_common_options(train, cl_train);
  CLI::App* eval =
      app.add_subcommand("eval", "evaluate a checkpoint on a held-out split");
  add_common_options(eval, cl_eval);

  CLI11_PARSE(app, argc, argv);

  try {
    if (featurize->parsed()) psg::cmd_featurize(build_config(cl_featurize));
    if (cluster->parsed()) psg::cmd_cluster(build_config(cl_cluster));
    if (train->parsed()) psg::cmd_train(build_config(cl_train));
    if (eval->parsed()) psg::cmd_eval(build_config(cl_eval));
  } catch (const psg::Error& e) {
    std::cerr << "error: [" << e.error_class() << "] " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: [internal] " << e.what() << "\n";
    return 2;
  }
  return 0;
}
