// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pragmafill/pipeline.hpp"

using namespace pragmafill;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("pragmafill-pipeline-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

RunConfig tiny(const fs::path& work) {
  RunConfig c = parse_run_config(R"(
    # small enough to run in a unit test
    corpus.n_kernels = 10
    corpus.configs_per_kernel = 6
    split.train = 0.6
    split.validation = 0.2
    split.test = 0.2
    gnn.layers = 2
    gnn.hidden = 8
    gnn.embed = 6
    gnn.epochs = 1
    model.width = 8
    train.epochs = 1
    eval.n_random = 10
  )");
  c.work_dir = work.string();
  return c;
}

}  // namespace

TEST_CASE("config parsing") {
  RunConfig c = parse_run_config("seed = 11  # trailing comment\n\ntrain.lr=0.5\ndeterministic = false\n", "t.cfg");
  CHECK(c.seed == 11);
  CHECK(c.train.lr == 0.5);
  CHECK_FALSE(c.deterministic);
  CHECK(c.resolved_train_seed() == derive_seed(11, 5));
  CHECK(c.train_config().seed == c.resolved_train_seed());

  RunConfig pinned = parse_run_config("seed = 11\ntrain.seed = 3\n");
  CHECK(pinned.train_config().seed == 3);
  CHECK(pinned.resolved_split_seed() == c.resolved_split_seed());

  try {
    parse_run_config("seed = 1\nno.such.key = 2\n", "t.cfg");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()) == "t.cfg:2: unknown config key 'no.such.key'");
  }
  CHECK_THROWS_AS(parse_run_config("seed = seven\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("seed\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("deterministic = maybe\n"), ConfigError);
  CHECK_THROWS_AS(load_run_config("/nonexistent/run.cfg"), ConfigError);
  CHECK_THROWS_AS(RunConfig{}.work(), ConfigError);
}

TEST_CASE("config text round-trips with resolved seeds") {
  RunConfig c = parse_run_config("seed = 9\ngnn.lr = 0.0025\nwork.dir = /tmp/x\n");
  std::string text = c.to_text();
  RunConfig back = parse_run_config(text);
  CHECK(back.to_text() == text);
  CHECK(back.train_config().seed == c.train_config().seed);
  CHECK(text.find("gnn.lr = 0.0025\n") != std::string::npos);
  CHECK(RunConfig::keys().size() == static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')));
}

TEST_CASE("LIFT_SEED overrides the master seed") {
  RunConfig c = parse_run_config("seed = 2\n");
  ::setenv("LIFT_SEED", "41", 1);
  apply_environment(c);
  CHECK(c.seed == 41);
  ::setenv("LIFT_SEED", "x1", 1);
  CHECK_THROWS_AS(apply_environment(c), ConfigError);
  ::unsetenv("LIFT_SEED");
  apply_environment(c);
  CHECK(c.seed == 41);
}

TEST_CASE("commands report missing upstream artifacts") {
  fs::path work = scratch_dir("missing");
  RunConfig c = tiny(work);
  std::ostringstream out;
  CHECK_THROWS_AS(cmd_prep(c, out), MissingArtifact);
  cmd_gen_corpus(c, out);
  CHECK_THROWS_AS(cmd_pretrain_gnn(c, out), MissingArtifact);
  CHECK_THROWS_AS(cmd_train(c, out), MissingArtifact);
  CHECK_THROWS_AS(cmd_eval(c, out), MissingArtifact);
  CHECK_THROWS_AS(cmd_predict(c, work / "corpus" / "nope.c", out), MissingArtifact);
}

TEST_CASE("small pipeline writes every artifact") {
  fs::path work = scratch_dir("small");
  RunConfig c = tiny(work);
  std::ostringstream out;
  cmd_gen_corpus(c, out);
  CHECK(out.str().rfind("wrote 10 kernels and 60 design points", 0) == 0);
  cmd_prep(c, out);
  cmd_pretrain_gnn(c, out);
  cmd_train(c, out);
  cmd_eval(c, out);
  for (const char* f : {"prep/split.json", "prep/vocab.txt", "prep/train.jsonl", "prep/validation.jsonl",
                        "prep/test.jsonl", "prep/summary.txt", "gnn/encoder.ckpt", "gnn/pretrain.log",
                        "model/epoch-1.ckpt", "model/model.ckpt", "model/metrics.log", "eval/report.txt",
                        "eval/report.jsonl", "eval/summary.json"}) {
    CHECK(fs::exists(work / f));
  }
  std::string metrics = slurp(work / "model" / "metrics.log");
  CHECK(metrics.rfind("epoch=1 mean_ce=", 0) == 0);
  CHECK(metrics.find("wall_seconds=0.000\n") != std::string::npos);
  CHECK(slurp(work / "gnn" / "pretrain.log").find("validation_spearman=") != std::string::npos);
  CHECK(slurp(work / "eval" / "report.txt").find("geomean speedup vs random median: ") != std::string::npos);

  std::ostringstream filled;
  fs::path kernel = work / "corpus" / "k000" / "kernel.c";
  cmd_predict(c, kernel, filled);
  CHECK(filled.str().find("auto{") == std::string::npos);
  CHECK(filled.str().find("#pragma ACCEL kernel") != std::string::npos);

  fs::path csv = work / "emb.csv";
  std::ostringstream exp;
  cmd_export_embeddings(c, "all", csv, exp);
  CHECK(exp.str() == "wrote 60 rows to " + csv.string() + "\n");
  CHECK_THROWS_AS(cmd_export_embeddings(c, "holdout", csv, exp), ConfigError);

  // Rerunning train replaces the model outputs byte for byte.
  std::string ckpt = slurp(work / "model" / "model.ckpt");
  cmd_train(c, out);
  CHECK(slurp(work / "model" / "model.ckpt") == ckpt);
}
