// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0
//
// pragmafill: corpus generation, dataset prep, training, prediction and
// evaluation from one config file.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pragmafill/pipeline.hpp"

namespace {

using namespace pragmafill;

int usage_error(const std::string& msg) {
  std::cerr << "pragmafill: " << msg << "\nRun with --help for usage.\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pragma insertion for HLS kernels with a graph-supervised sequence model"};
  app.require_subcommand(1);

  std::string config_path, work_dir;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "Config file (flat key = value)");
  app.add_option("--work", work_dir, "Working directory (sets work.dir)");
  app.add_option("--set", overrides, "Override one config key, KEY=VALUE")->take_all();

  auto* gen = app.add_subcommand("gen-corpus", "Generate the synthetic corpus");
  std::string gen_out;
  gen->add_option("--out", gen_out, "Corpus directory (sets corpus.dir)");
  auto* prep = app.add_subcommand("prep", "Split, weight, resample and tokenize");
  auto* pre = app.add_subcommand("pretrain-gnn", "Pretrain the graph encoder on latency labels");
  auto* train = app.add_subcommand("train", "Fine-tune the sequence model");
  std::string alpha;
  train->add_option("--alpha", alpha, "Graph-distance coefficient (sets train.alpha)");
  auto* pred = app.add_subcommand("predict", "Fill the pragma slots of one kernel");
  std::string kernel;
  pred->add_option("kernel", kernel, "Kernel source file")->required();
  auto* eval = app.add_subcommand("eval", "Evaluate predictions on the test kernels");
  auto* exp = app.add_subcommand("export-embeddings", "Write sequence and graph embeddings as CSV");
  std::string exp_out, exp_split = "test";
  exp->add_option("--out", exp_out, "Output CSV (default <work>/eval/embeddings.csv)");
  exp->add_option("--split", exp_split, "train, validation, test or all")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  RunConfig config;
  try {
    if (!config_path.empty()) config = load_run_config(config_path);
    apply_environment(config);
    for (const auto& kv : overrides) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) return usage_error("--set expects KEY=VALUE, got '" + kv + "'");
      config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!work_dir.empty()) config.work_dir = work_dir;
    if (!gen_out.empty()) config.corpus_dir = gen_out;
    if (!alpha.empty()) config.set("train.alpha", alpha);
    config.work();
    config.train_config().check();
  } catch (const ConfigError& e) {
    return usage_error(e.what());
  } catch (const std::invalid_argument& e) {
    return usage_error(e.what());
  }

  CLI::App* cmd = app.get_subcommands().front();
  std::cerr << "# pragmafill " << cmd->get_name() << "\n# seed = " << config.seed << '\n';
  std::string text = config.to_text();
  for (std::size_t pos = 0; pos < text.size();) {
    std::size_t nl = text.find('\n', pos);
    std::cerr << "#   " << text.substr(pos, nl - pos) << '\n';
    pos = nl + 1;
  }

  try {
    if (cmd == gen) {
      cmd_gen_corpus(config, std::cout);
    } else if (cmd == prep) {
      cmd_prep(config, std::cout);
    } else if (cmd == pre) {
      cmd_pretrain_gnn(config, std::cout);
    } else if (cmd == train) {
      cmd_train(config, std::cout);
    } else if (cmd == pred) {
      // stdout carries only the filled kernel.
      cmd_predict(config, kernel, std::cout);
    } else if (cmd == eval) {
      cmd_eval(config, std::cout);
    } else if (cmd == exp) {
      cmd_export_embeddings(config, exp_split, exp_out.empty() ? config.eval_path() / "embeddings.csv" : std::filesystem::path(exp_out),
                            std::cout);
    }
  } catch (const ConfigError& e) {
    return usage_error(e.what());
  } catch (const MissingArtifact& e) {
    std::cerr << "pragmafill " << cmd->get_name() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "pragmafill " << cmd->get_name() << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
