// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration and the command implementations behind the CLI.
//
// Config files are flat `key = value` lines; `#` starts a comment. Every
// key has a default, unknown keys are errors. Unset sub-seeds derive from
// `seed`, which the LIFT_SEED environment variable overrides.

#ifndef PRAGMAFILL_PIPELINE_HPP_
#define PRAGMAFILL_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pragmafill/training.hpp"

namespace pragmafill {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A command's precondition failed: an upstream artifact is missing.
class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::uint64_t seed = 7;
  bool deterministic = true;  // metrics log records wall_seconds as 0

  std::string work_dir;    // required by every command
  std::string corpus_dir;  // empty: <work_dir>/corpus

  std::size_t n_kernels = 150;
  std::size_t configs_per_kernel = 20;
  std::optional<std::uint64_t> corpus_seed;

  ResourceBudget budget;
  SpaceCaps caps;

  double split_train = 0.7;
  double split_validation = 0.15;
  double split_test = 0.15;
  std::optional<std::uint64_t> split_seed;

  WeightParams weight;
  ResampleParams resample;  // resample.seed is resolved separately
  std::optional<std::uint64_t> resample_seed;

  PretrainConfig gnn;  // gnn.seed is resolved separately
  std::optional<std::uint64_t> gnn_seed;

  TrainConfig train;  // train.seed is resolved separately
  std::optional<std::uint64_t> train_seed;

  int eval_n_random = 100;
  std::uint64_t eval_exhaustive_limit = 10000;
  std::optional<std::uint64_t> eval_seed;

  /// Sets one dotted key from text. Throws ConfigError.
  void set(const std::string& key, const std::string& value);
  /// Every key in sorted order with resolved seeds, one `key = value` line each.
  std::string to_text() const;
  static std::vector<std::string> keys();

  std::uint64_t resolved_corpus_seed() const;
  std::uint64_t resolved_split_seed() const;
  std::uint64_t resolved_resample_seed() const;
  std::uint64_t resolved_gnn_seed() const;
  std::uint64_t resolved_train_seed() const;
  std::uint64_t resolved_eval_seed() const;

  std::filesystem::path work() const;
  std::filesystem::path corpus_path() const;
  std::filesystem::path prep_path() const { return work() / "prep"; }
  std::filesystem::path gnn_path() const { return work() / "gnn"; }
  std::filesystem::path model_path() const { return work() / "model"; }
  std::filesystem::path eval_path() const { return work() / "eval"; }

  SyntheticSpec synthetic_spec() const;
  PretrainConfig pretrain_config() const;
  TrainConfig train_config() const;
  EvalConfig eval_config() const;
};

/// `source` names the input in error messages.
RunConfig parse_run_config(const std::string& text, const std::string& source = "config");
RunConfig load_run_config(const std::filesystem::path& path);
/// Applies LIFT_SEED when set.
void apply_environment(RunConfig& config);

// Commands. Progress and summaries go to `out`; artifacts go under
// work_dir. Missing inputs throw MissingArtifact.
void cmd_gen_corpus(const RunConfig& config, std::ostream& out);
void cmd_prep(const RunConfig& config, std::ostream& out);
void cmd_pretrain_gnn(const RunConfig& config, std::ostream& out);
void cmd_train(const RunConfig& config, std::ostream& out);
/// Writes the kernel with every slot filled to `out`.
void cmd_predict(const RunConfig& config, const std::filesystem::path& kernel, std::ostream& out);
void cmd_eval(const RunConfig& config, std::ostream& out);
/// `split` is train, validation, test or all.
void cmd_export_embeddings(const RunConfig& config, const std::string& split, const std::filesystem::path& path,
                           std::ostream& out);

}  // namespace pragmafill

#endif  // PRAGMAFILL_PIPELINE_HPP_
